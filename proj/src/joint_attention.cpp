#include "sac/joint_attention.hpp"

#include "sac/diffcore.hpp"
#include "sac/error.hpp"

#include <cmath>

namespace sac::joint {

Params add_parameters(ParameterSet& set, std::size_t d_f, std::size_t d_e, std::size_t d_j, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d_f * d_e));
  set.add("joint.T_u", "joint_attention", uniform_tensor({d_f, d_e, d_j}, -s, s, rng));
  set.add("joint.T_M", "joint_attention", uniform_tensor({d_f, d_e}, -s, s, rng));
  return bind_parameters(set);
}

Params bind_parameters(ParameterSet& set) { return {&set.get("joint.T_u"), &set.get("joint.T_M")}; }

namespace {

void check_attention_shapes(const Tensor& F, const Tensor& E, const Tensor& T_M) {
  if (F.rank() != 2 || E.rank() != 2 || T_M.rank() != 2 || T_M.dim(0) != F.dim(0) || T_M.dim(1) != E.dim(0)) {
    fail(ErrorKind::kShape, "attention_map: F " + shape_string(F.shape()) + ", E " + shape_string(E.shape()) +
                                ", T_M " + shape_string(T_M.shape()) + " do not conform");
  }
}

void check_joint_shapes(const Tensor& F, const Tensor& E, const Tensor& T_u, const Tensor& M) {
  if (F.rank() != 2 || E.rank() != 2 || T_u.rank() != 3 || T_u.dim(0) != F.dim(0) || T_u.dim(1) != E.dim(0)) {
    fail(ErrorKind::kShape, "joint_representation: F " + shape_string(F.shape()) + ", E " +
                                shape_string(E.shape()) + ", T_u " + shape_string(T_u.shape()) + " do not conform");
  }
  if (M.shape() != Shape{F.dim(1), E.dim(1)}) {
    fail(ErrorKind::kShape, "joint_representation: M " + shape_string(M.shape()) + " vs (f, k) = (" +
                                std::to_string(F.dim(1)) + ", " + std::to_string(E.dim(1)) + ")");
  }
}

}  // namespace

AttentionMap attention_map(const Tensor& F, const Tensor& E, const Tensor& T_M) {
  check_attention_shapes(F, E, T_M);
  AttentionMap out;
  out.logits = Tensor({F.dim(1), E.dim(1)});
  out.logits.mat().noalias() = F.mat().transpose() * (T_M.mat() * E.mat());
  out.M = diff::softmax(out.logits);
  return out;
}

Tensor couple_joint(const Tensor& F_i, const Tensor& E_j, const Tensor& T_u) {
  if (T_u.rank() != 3 || F_i.size() != T_u.dim(0) || E_j.size() != T_u.dim(1)) {
    fail(ErrorKind::kShape, "couple_joint: F_i " + shape_string(F_i.shape()) + ", E_j " + shape_string(E_j.shape()) +
                                ", T_u " + shape_string(T_u.shape()) + " do not conform");
  }
  const std::size_t d_f = T_u.dim(0), d_e = T_u.dim(1), d_j = T_u.dim(2);
  Tensor outer({d_f * d_e});
  for (std::size_t a = 0; a < d_f; ++a) {
    for (std::size_t b = 0; b < d_e; ++b) outer[a * d_e + b] = F_i[a] * E_j[b];
  }
  Tensor J({d_j});
  J.vec().noalias() = T_u.reshaped({d_f * d_e, d_j}).mat().transpose() * outer.vec();
  return J;
}

Tensor couple_moment(const Tensor& F, const Tensor& E, const Tensor& M) {
  Tensor G({F.dim(0), E.dim(0)});
  G.mat().noalias() = (F.mat() * M.mat()) * E.mat().transpose();
  return G;
}

Tensor joint_representation(const Tensor& F, const Tensor& E, const Tensor& T_u, const Tensor& M) {
  check_joint_shapes(F, E, T_u, M);
  const std::size_t d_f = T_u.dim(0), d_e = T_u.dim(1), d_j = T_u.dim(2);
  const Tensor G = couple_moment(F, E, M);
  Tensor J({d_j});
  J.vec().noalias() = ConstMatrixMap(T_u.data(), static_cast<Eigen::Index>(d_f * d_e),
                                     static_cast<Eigen::Index>(d_j))
                          .transpose() *
                      G.vec();
  return J;
}

Tensor full_bilinear_reference(const Tensor& F, const Tensor& E, const Tensor& T) {
  const std::size_t dF = F.size(), dE = E.size();
  if (T.rank() != 3) fail(ErrorKind::kShape, "full_bilinear_reference: T must be 3-D, got " + shape_string(T.shape()));
  if (T.size() > kFullBilinearBudget) {
    fail(ErrorKind::kRange, "full_bilinear_reference: tensor of " + std::to_string(T.size()) +
                                " entries exceeds the budget of " + std::to_string(kFullBilinearBudget));
  }
  if (T.dim(0) != dF || T.dim(1) != dE) {
    fail(ErrorKind::kShape, "full_bilinear_reference: T " + shape_string(T.shape()) + " vs vec(F) " +
                                std::to_string(dF) + ", vec(E) " + std::to_string(dE));
  }
  const std::size_t d_j = T.dim(2);
  Tensor J({d_j});
  for (std::size_t a = 0; a < dF; ++a) {
    for (std::size_t b = 0; b < dE; ++b) {
      const double w = F[a] * E[b];
      const double* t = T.data() + (a * dE + b) * d_j;
      for (std::size_t c = 0; c < d_j; ++c) J[c] += t[c] * w;
    }
  }
  return J;
}

JointGrads joint_backward(const Tensor& F, const Tensor& E, const Tensor& T_u, const Tensor& T_M,
                          const AttentionMap& attention, const Tensor& dJ, const Tensor& dM_extra,
                          bool want_dT_u) {
  const Tensor& M = attention.M;
  check_joint_shapes(F, E, T_u, M);
  const std::size_t d_f = T_u.dim(0), d_e = T_u.dim(1), d_j = T_u.dim(2);
  if (dJ.size() != d_j) fail(ErrorKind::kShape, "joint_backward: dJ " + shape_string(dJ.shape()));

  JointGrads g{Tensor(F.shape()), Tensor(E.shape()), want_dT_u ? Tensor(T_u.shape()) : Tensor{}, Tensor(T_M.shape())};
  const ConstMatrixMap Tu(T_u.data(), static_cast<Eigen::Index>(d_f * d_e), static_cast<Eigen::Index>(d_j));
  const Tensor G = couple_moment(F, E, M);

  // J = Tu^T vec(G)
  if (want_dT_u) {
    MatrixMap(g.dT_u.data(), static_cast<Eigen::Index>(d_f * d_e), static_cast<Eigen::Index>(d_j)).noalias() =
        G.vec() * dJ.vec().transpose();
  }
  Tensor dG({d_f, d_e});
  dG.vec().noalias() = Tu * dJ.vec();

  // G = F M E^T
  const Eigen::MatrixXd FM = F.mat() * M.mat();        // d_f x k
  const Eigen::MatrixXd dGE = dG.mat() * E.mat();      // d_f x k
  g.dF.mat().noalias() = dGE * M.mat().transpose();
  g.dE.mat().noalias() = dG.mat().transpose() * FM;
  Tensor dM({M.dim(0), M.dim(1)});
  dM.mat().noalias() = F.mat().transpose() * dGE;
  if (!dM_extra.empty()) {
    expect_same_shape(dM, dM_extra, "joint_backward: dM");
    dM.vec() += dM_extra.vec();
  }

  // M = softmax(F^T T_M E) over all entries
  const Tensor dL = diff::softmax_backward(M, dM);
  const Eigen::MatrixXd TE = T_M.mat() * E.mat();      // d_f x k
  g.dF.mat().noalias() += TE * dL.mat().transpose();
  const Eigen::MatrixXd FdL = F.mat() * dL.mat();      // d_f x k
  g.dT_M.mat().noalias() = FdL * E.mat().transpose();
  g.dE.mat().noalias() += T_M.mat().transpose() * FdL;
  return g;
}

void accumulate_T_u_grad(Tensor& grad, const Tensor& Gs, const Tensor& dJs) {
  if (grad.rank() != 3 || Gs.rank() != 2 || dJs.rank() != 2 || Gs.dim(0) != grad.dim(0) * grad.dim(1) ||
      dJs.dim(0) != grad.dim(2) || Gs.dim(1) != dJs.dim(1)) {
    fail(ErrorKind::kShape, "accumulate_T_u_grad: grad " + shape_string(grad.shape()) + ", Gs " +
                                shape_string(Gs.shape()) + ", dJs " + shape_string(dJs.shape()));
  }
  MatrixMap(grad.data(), static_cast<Eigen::Index>(Gs.dim(0)), static_cast<Eigen::Index>(dJs.dim(0))).noalias() +=
      Gs.mat() * dJs.mat().transpose();
}

std::size_t factorized_parameter_count(std::size_t d_f, std::size_t d_e, std::size_t d_j) {
  return d_f * d_e * d_j + d_f * d_e;
}

std::size_t full_parameter_count(std::size_t d_f, std::size_t f, std::size_t d_e, std::size_t k, std::size_t d_j) {
  return d_f * f * d_e * k * d_j;
}

}  // namespace sac::joint
