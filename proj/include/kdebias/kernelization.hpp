#pragma once

#include <cstdint>

#include "kdebias/common.hpp"

namespace kdebias {

enum class BandwidthMode { explicit_value, median_heuristic };

struct KernelConfig {
  double bandwidth = 1.0;  // RBF length-scale; used when mode is explicit_value
  Index rff_dim = 1024;
  std::uint64_t seed = 0;
  BandwidthMode mode = BandwidthMode::median_heuristic;
  Index median_subsample = 2000;

  void validate() const;
};

// Random Fourier feature map for k(x, x') = exp(-|x - x'|^2 / (2 sigma^2)).
// Frequencies ~ N(0, sigma^-2 I), phases ~ U[0, 2 pi), both drawn from the
// seed alone, so the map is reproducible from (bandwidth, D, seed, input_dim).
class RffMap {
 public:
  RffMap(double bandwidth, Index rff_dim, std::uint64_t seed, Index input_dim);

  Matrix apply(const Eigen::Ref<const Matrix>& x) const;

  const Matrix& frequencies() const { return freq_; }
  const Vector& phases() const { return phase_; }
  Index input_dim() const { return freq_.cols(); }
  Index rff_dim() const { return freq_.rows(); }

 private:
  Matrix freq_;  // D x d
  Vector phase_;
};

// L_X with row i = r_X(x_i). `config` is resolved: mode is explicit_value and
// bandwidth holds the value actually used.
struct RffFactor {
  Matrix matrix;
  KernelConfig config;
  Index input_dim = 0;

  Index rows() const { return matrix.rows(); }
  Index cols() const { return matrix.cols(); }
  RffMap feature_map() const;
};

// One-hot n x c indicator matrix; L L^T is the same-class Gram matrix.
struct LabelFactor {
  Matrix matrix;
  int num_classes = 0;

  Index rows() const { return matrix.rows(); }
};

// Median pairwise Euclidean distance over a seeded subsample of rows
// (all rows, in order, when subsample >= n).
double median_bandwidth(const Eigen::Ref<const Matrix>& x, Index subsample, std::uint64_t seed);

// Returns cfg with the bandwidth fixed (runs the median heuristic if requested).
KernelConfig resolve_bandwidth(const Eigen::Ref<const Matrix>& x, KernelConfig cfg);

RffFactor rff_factor(const Eigen::Ref<const Matrix>& x, const KernelConfig& cfg);

LabelFactor label_factor(const LabelVector& labels);

// H m without forming H.
Matrix center(const Eigen::Ref<const Matrix>& m);

// exp(-|a - b|^2 / (2 sigma^2))
double rbf(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, double bandwidth);

}  // namespace kdebias
