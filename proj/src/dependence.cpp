#include "kdebias/dependence.hpp"

#include "kdebias/kernels.hpp"

namespace kdebias {

namespace {

double inv_n2(Index n) { return 1.0 / (static_cast<double>(n) * static_cast<double>(n)); }

void require_rows(Index a, Index b, const char* what) {
  if (a != b) {
    throw DimensionError("dependence", std::string(what) + ": row counts differ (" +
                                           std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

Representation encode(const Eigen::Ref<const Matrix>& weights, const RffFactor& lx) {
  if (weights.cols() != lx.cols()) {
    throw DimensionError("dependence", "weights have " + std::to_string(weights.cols()) +
                                           " columns but the factor has " +
                                           std::to_string(lx.cols()));
  }
  return Representation{lx.matrix * weights.transpose()};
}

double dep_vs_labels(const Representation& z, const LabelFactor& lf) {
  require_rows(z.rows(), lf.rows(), "dep_vs_labels");
  if (z.rows() == 0) return 0.0;
  return kernels::omp::centered_cross(z.data, lf.matrix).squaredNorm() * inv_n2(z.rows());
}

double dep_vs_labels(const Eigen::Ref<const Matrix>& weights, const RffFactor& lx,
                     const LabelFactor& lf) {
  require_rows(lx.rows(), lf.rows(), "dep_vs_labels");
  return dep_vs_labels(encode(weights, lx), lf);
}

double dep_cross(const Representation& zi, const Representation& zt) {
  require_rows(zi.rows(), zt.rows(), "dep_cross");
  if (zi.rows() == 0) return 0.0;
  return kernels::omp::centered_cross(zi.data, zt.data).squaredNorm() * inv_n2(zi.rows());
}

double dep_cross(const Eigen::Ref<const Matrix>& weights_i, const RffFactor& lx_i,
                 const Eigen::Ref<const Matrix>& weights_t, const RffFactor& lx_t) {
  require_rows(lx_i.rows(), lx_t.rows(), "dep_cross");
  return dep_cross(encode(weights_i, lx_i), encode(weights_t, lx_t));
}

double hsic_from_factors(const Eigen::Ref<const Matrix>& la, const Eigen::Ref<const Matrix>& lb) {
  require_rows(la.rows(), lb.rows(), "hsic");
  if (la.rows() < 4) throw InputError("dependence", "hsic needs at least 4 samples");
  // Contract over the narrower side first.
  const Matrix cross = la.cols() >= lb.cols() ? kernels::omp::centered_cross(la, lb)
                                              : kernels::omp::centered_cross(lb, la);
  return cross.squaredNorm() * inv_n2(la.rows());
}

double hsic(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b,
            const KernelConfig& cfg_a, const KernelConfig& cfg_b) {
  require_rows(a.rows(), b.rows(), "hsic");
  if (a.rows() < 4) throw InputError("dependence", "hsic needs at least 4 samples");
  const RffFactor fa = rff_factor(a, cfg_a);
  // A constant side has zero dependence; the median heuristic would reject it.
  if ((b.rowwise() - b.row(0)).cwiseAbs().maxCoeff() == 0.0) return 0.0;
  const RffFactor fb = rff_factor(b, cfg_b);
  return hsic_from_factors(fa.matrix, fb.matrix);
}

}  // namespace kdebias
