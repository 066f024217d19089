#include "kdebias/kernelization.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "kdebias/kernels.hpp"

namespace kdebias {

namespace {

// Independent streams per purpose so that changing the subsample size never
// perturbs the feature draws.
enum class Stream : std::uint64_t { subsample = 1, features = 2 };

std::mt19937_64 make_engine(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

}  // namespace

void KernelConfig::validate() const {
  if (rff_dim < 1) throw ConfigError("kernelization", "rff_dim must be >= 1");
  if (mode == BandwidthMode::explicit_value && !(bandwidth > 0.0 && std::isfinite(bandwidth)))
    throw ConfigError("kernelization", "explicit bandwidth must be positive and finite");
  if (mode == BandwidthMode::median_heuristic && median_subsample < 2)
    throw ConfigError("kernelization", "median subsample must be >= 2");
}

RffMap::RffMap(double bandwidth, Index rff_dim, std::uint64_t seed, Index input_dim)
    : freq_(rff_dim, input_dim), phase_(rff_dim) {
  if (!(bandwidth > 0.0)) throw ConfigError("kernelization", "bandwidth must be positive");
  if (rff_dim < 1 || input_dim < 1) throw ConfigError("kernelization", "empty feature map");
  auto engine = make_engine(seed, Stream::features);
  std::normal_distribution<double> normal(0.0, 1.0 / bandwidth);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  // Row-major draw order; fixed so models can be rebuilt from their seed.
  for (Index j = 0; j < rff_dim; ++j)
    for (Index k = 0; k < input_dim; ++k) freq_(j, k) = normal(engine);
  for (Index j = 0; j < rff_dim; ++j) phase_(j) = uniform(engine);
}

Matrix RffMap::apply(const Eigen::Ref<const Matrix>& x) const {
  if (x.cols() != input_dim()) {
    throw DimensionError("kernelization", "feature map expects " + std::to_string(input_dim()) +
                                              " input columns, got " + std::to_string(x.cols()));
  }
  return kernels::omp::rff_map(x, freq_, phase_);
}

RffMap RffFactor::feature_map() const {
  return RffMap(config.bandwidth, config.rff_dim, config.seed, input_dim);
}

double median_bandwidth(const Eigen::Ref<const Matrix>& x, Index subsample, std::uint64_t seed) {
  const Index n = x.rows();
  if (n < 2) throw InputError("kernelization", "median heuristic needs at least 2 rows");
  if (subsample < 2) throw ConfigError("kernelization", "median subsample must be >= 2");

  std::vector<Index> rows(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  if (subsample < n) {
    auto engine = make_engine(seed, Stream::subsample);
    // Partial Fisher-Yates: first `subsample` entries form a uniform sample.
    for (Index i = 0; i < subsample; ++i) {
      std::uniform_int_distribution<Index> pick(i, n - 1);
      std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(pick(engine))]);
    }
    rows.resize(static_cast<std::size_t>(subsample));
    std::sort(rows.begin(), rows.end());
  }

  const std::size_t m = rows.size();
  std::vector<double> dist;
  dist.reserve(m * (m - 1) / 2);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b)
      dist.push_back((x.row(rows[a]) - x.row(rows[b])).norm());

  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  if (!(median > 0.0)) {
    throw InputError("kernelization",
                     "median pairwise distance is zero (fewer than 2 distinct rows in sample)");
  }
  return median;
}

KernelConfig resolve_bandwidth(const Eigen::Ref<const Matrix>& x, KernelConfig cfg) {
  cfg.validate();
  if (cfg.mode == BandwidthMode::median_heuristic) {
    cfg.bandwidth = median_bandwidth(x, std::min(cfg.median_subsample, x.rows()), cfg.seed);
    cfg.mode = BandwidthMode::explicit_value;
  }
  return cfg;
}

RffFactor rff_factor(const Eigen::Ref<const Matrix>& x, const KernelConfig& cfg) {
  require_finite(x, "kernelization", "input matrix");
  RffFactor out;
  out.config = resolve_bandwidth(x, cfg);
  out.input_dim = x.cols();
  out.matrix = out.feature_map().apply(x);
  return out;
}

LabelFactor label_factor(const LabelVector& labels) {
  labels.validate("kernelization");
  LabelFactor out;
  out.num_classes = labels.num_classes;
  out.matrix = Matrix::Zero(labels.size(), labels.num_classes);
  for (Index i = 0; i < labels.size(); ++i) out.matrix(i, labels[i]) = 1.0;
  return out;
}

Matrix center(const Eigen::Ref<const Matrix>& m) {
  if (m.rows() < 1) throw DimensionError("kernelization", "cannot center an empty matrix");
  return kernels::omp::center_columns(m);
}

double rbf(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, double bandwidth) {
  return std::exp(-(a - b).squaredNorm() / (2.0 * bandwidth * bandwidth));
}

}  // namespace kdebias
