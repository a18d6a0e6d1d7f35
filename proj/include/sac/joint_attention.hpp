#pragma once

#include "sac/params.hpp"
#include "sac/tensor.hpp"

#include <cstddef>

// Factorised bilinear joint embedding of image regions and class embeddings
// through a unitary attention map over all (region, class) couples.
namespace sac::joint {

struct Config {
  std::size_t d_j = 1024;
};

struct Params {
  Parameter* T_u = nullptr;  // d_f x d_e x d_j
  Parameter* T_M = nullptr;  // d_f x d_e
};

Params add_parameters(ParameterSet& set, std::size_t d_f, std::size_t d_e, std::size_t d_j, Rng& rng);
Params bind_parameters(ParameterSet& set);

struct AttentionMap {
  Tensor logits;  // f x k
  Tensor M;       // f x k, softmax over all f*k entries
};

// F: d_f x f, E: d_e x k, T_M: d_f x d_e.
AttentionMap attention_map(const Tensor& F, const Tensor& E, const Tensor& T_M);

// J_p[c] = sum_ab T_u[a,b,c] F_i[a] E_j[b]
Tensor couple_joint(const Tensor& F_i, const Tensor& E_j, const Tensor& T_u);

// Weighted couple statistic G = F M E^T (d_f x d_e).
Tensor couple_moment(const Tensor& F, const Tensor& E, const Tensor& M);

// J = sum_ij M_ij couple_joint(F_i, E_j), computed as T_u contracted with G.
Tensor joint_representation(const Tensor& F, const Tensor& E, const Tensor& T_u, const Tensor& M);

// Unfactored reference J = (T x_1 vec(F)) x_2 vec(E) for tiny dimensions.
// T: (d_f*f) x (d_e*k) x d_j; vec() flattens row-major.
inline constexpr std::size_t kFullBilinearBudget = 100000;
Tensor full_bilinear_reference(const Tensor& F, const Tensor& E, const Tensor& T);

struct JointGrads {
  Tensor dF;    // d_f x f
  Tensor dE;    // d_e x k
  Tensor dT_u;  // d_f x d_e x d_j
  Tensor dT_M;  // d_f x d_e
};

// Backward through attention_map followed by joint_representation, given dJ
// and optionally an extra cotangent on M (empty when unused). With
// want_dT_u=false the T_u gradient is left empty; callers batching many
// images use accumulate_T_u_grad instead, which is far cheaper than one
// d_f x d_e x d_j outer product per image.
JointGrads joint_backward(const Tensor& F, const Tensor& E, const Tensor& T_u, const Tensor& T_M,
                          const AttentionMap& attention, const Tensor& dJ, const Tensor& dM_extra = {},
                          bool want_dT_u = true);

// grad += sum_b vec(G_b) dJ_b^T, with G_b = couple_moment(...) stacked as the
// columns of Gs ((d_f*d_e) x B) and dJs (d_j x B).
void accumulate_T_u_grad(Tensor& grad, const Tensor& Gs, const Tensor& dJs);

std::size_t factorized_parameter_count(std::size_t d_f, std::size_t d_e, std::size_t d_j);
std::size_t full_parameter_count(std::size_t d_f, std::size_t f, std::size_t d_e, std::size_t k, std::size_t d_j);

}  // namespace sac::joint
