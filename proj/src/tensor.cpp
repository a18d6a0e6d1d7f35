#include "sac/tensor.hpp"

#include "sac/error.hpp"

#include <cmath>
#include <sstream>

namespace sac {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kRange: return "range";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kNoRegion: return "no_region";
    case ErrorKind::kConfig: return "config";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (data_.size() != shape_numel(shape_)) {
    fail(ErrorKind::kShape, "tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorKind::kShape, "ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

namespace {
std::pair<Eigen::Index, Eigen::Index> matrix_dims(const Shape& shape) {
  if (shape.size() == 1) return {static_cast<Eigen::Index>(shape[0]), 1};
  if (shape.size() == 2) return {static_cast<Eigen::Index>(shape[0]), static_cast<Eigen::Index>(shape[1])};
  fail(ErrorKind::kShape, "matrix view requires rank 1 or 2, got " + shape_string(shape));
}
}  // namespace

MatrixMap Tensor::mat() {
  auto [r, c] = matrix_dims(shape_);
  return MatrixMap(data_.data(), r, c);
}

ConstMatrixMap Tensor::mat() const {
  auto [r, c] = matrix_dims(shape_);
  return ConstMatrixMap(data_.data(), r, c);
}

VectorMap Tensor::vec() { return VectorMap(data_.data(), static_cast<Eigen::Index>(data_.size())); }

ConstVectorMap Tensor::vec() const {
  return ConstVectorMap(data_.data(), static_cast<Eigen::Index>(data_.size()));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    fail(ErrorKind::kShape, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void expect_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::kShape, std::string(what) + ": shape " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  // FNV-1a over the purpose, then a splitmix64 finalizer.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : purpose) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull + h;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Distributions are hand-rolled on top of the raw engine so results do not
// depend on the standard library's distribution implementations.
double Rng::uniform(double lo, double hi) {
  const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double Rng::normal(double mean, double stddev) {
  double u1 = uniform(0.0, 1.0);
  while (u1 <= 0.0) u1 = uniform(0.0, 1.0);
  const double u2 = uniform(0.0, 1.0);
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t Rng::index(std::size_t n) {
  return static_cast<std::size_t>(uniform(0.0, 1.0) * static_cast<double>(n)) % n;
}

bool Rng::bernoulli(double p) { return uniform(0.0, 1.0) < p; }

Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace sac
