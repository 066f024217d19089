#include "kdebias/kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kdebias::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

void check_rff_shapes(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& freq,
                      const Eigen::Ref<const Vector>& phase) {
  if (freq.cols() != x.cols() || phase.size() != freq.rows()) {
    throw DimensionError("kernels", "rff_map shape mismatch: x is " + std::to_string(x.rows()) +
                                        "x" + std::to_string(x.cols()) + ", frequencies " +
                                        std::to_string(freq.rows()) + "x" +
                                        std::to_string(freq.cols()));
  }
}

void check_same_rows(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("kernels", "row count mismatch: " + std::to_string(a.rows()) + " vs " +
                                        std::to_string(b.rows()));
  }
}

Index chunk_count(Index n) { return (n + kRowChunk - 1) / kRowChunk; }

}  // namespace

namespace serial {

Matrix rff_map(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& freq,
               const Eigen::Ref<const Vector>& phase) {
  check_rff_shapes(x, freq, phase);
  const Index n = x.rows();
  const Index dim = freq.rows();
  const double scale = std::sqrt(2.0 / static_cast<double>(dim));
  Matrix out(n, dim);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < dim; ++j) {
      double acc = phase(j);
      for (Index k = 0; k < x.cols(); ++k) acc += freq(j, k) * x(i, k);
      out(i, j) = scale * std::cos(acc);
    }
  }
  return out;
}

Vector column_means(const Eigen::Ref<const Matrix>& a) {
  Vector mean = Vector::Zero(a.cols());
  if (a.rows() == 0) return mean;
  for (Index j = 0; j < a.cols(); ++j) {
    double acc = 0.0;
    for (Index i = 0; i < a.rows(); ++i) acc += a(i, j);
    mean(j) = acc / static_cast<double>(a.rows());
  }
  return mean;
}

Matrix center_columns(const Eigen::Ref<const Matrix>& a) {
  const Vector mean = column_means(a);
  Matrix out(a.rows(), a.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) out(i, j) = a(i, j) - mean(j);
  return out;
}

Matrix centered_cross(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
  check_same_rows(a, b);
  const Matrix bc = center_columns(b);
  Matrix out = Matrix::Zero(a.cols(), b.cols());
  for (Index p = 0; p < a.cols(); ++p)
    for (Index q = 0; q < b.cols(); ++q) {
      double acc = 0.0;
      for (Index i = 0; i < a.rows(); ++i) acc += a(i, p) * bc(i, q);
      out(p, q) = acc;
    }
  return out;
}

Matrix centered_gram(const Eigen::Ref<const Matrix>& a) {
  const Matrix ac = center_columns(a);
  Matrix out(a.cols(), a.cols());
  for (Index p = 0; p < a.cols(); ++p)
    for (Index q = 0; q <= p; ++q) {
      double acc = 0.0;
      for (Index i = 0; i < a.rows(); ++i) acc += ac(i, p) * ac(i, q);
      out(p, q) = acc;
      out(q, p) = acc;
    }
  return out;
}

}  // namespace serial

namespace omp {

Matrix rff_map(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& freq,
               const Eigen::Ref<const Vector>& phase) {
  check_rff_shapes(x, freq, phase);
  const Index n = x.rows();
  const Index dim = freq.rows();
  const double scale = std::sqrt(2.0 / static_cast<double>(dim));
  Matrix out(n, dim);
  const Index chunks = chunk_count(n);
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < chunks; ++c) {
    const Index lo = c * kRowChunk;
    const Index len = std::min(kRowChunk, n - lo);
    Matrix proj = x.middleRows(lo, len) * freq.transpose();
    proj.rowwise() += phase.transpose();
    out.middleRows(lo, len) = scale * proj.array().cos().matrix();
  }
  return out;
}

Vector column_means(const Eigen::Ref<const Matrix>& a) {
  const Index n = a.rows();
  Vector mean = Vector::Zero(a.cols());
  if (n == 0) return mean;
  const int threads = max_threads();
  std::vector<Vector> partial(static_cast<std::size_t>(threads), Vector::Zero(a.cols()));
  const Index chunks = chunk_count(n);
#pragma omp parallel
  {
#ifdef _OPENMP
    Vector& acc = partial[static_cast<std::size_t>(omp_get_thread_num())];
#else
    Vector& acc = partial[0];
#endif
#pragma omp for schedule(static)
    for (Index c = 0; c < chunks; ++c) {
      const Index lo = c * kRowChunk;
      const Index len = std::min(kRowChunk, n - lo);
      acc += a.middleRows(lo, len).colwise().sum().transpose();
    }
  }
  for (const auto& p : partial) mean += p;
  return mean / static_cast<double>(n);
}

Matrix center_columns(const Eigen::Ref<const Matrix>& a) {
  const Vector mean = column_means(a);
  const Index n = a.rows();
  Matrix out(n, a.cols());
  const Index chunks = chunk_count(n);
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < chunks; ++c) {
    const Index lo = c * kRowChunk;
    const Index len = std::min(kRowChunk, n - lo);
    out.middleRows(lo, len) = a.middleRows(lo, len).rowwise() - mean.transpose();
  }
  return out;
}

Matrix centered_cross(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
  check_same_rows(a, b);
  const Index n = a.rows();
  const Vector mean_b = column_means(b);
  const int threads = max_threads();
  std::vector<Matrix> partial(static_cast<std::size_t>(threads),
                              Matrix::Zero(a.cols(), b.cols()));
  const Index chunks = chunk_count(n);
#pragma omp parallel
  {
#ifdef _OPENMP
    Matrix& acc = partial[static_cast<std::size_t>(omp_get_thread_num())];
#else
    Matrix& acc = partial[0];
#endif
#pragma omp for schedule(static)
    for (Index c = 0; c < chunks; ++c) {
      const Index lo = c * kRowChunk;
      const Index len = std::min(kRowChunk, n - lo);
      const Matrix bc = b.middleRows(lo, len).rowwise() - mean_b.transpose();
      acc.noalias() += a.middleRows(lo, len).transpose() * bc;
    }
  }
  Matrix out = Matrix::Zero(a.cols(), b.cols());
  for (const auto& p : partial) out += p;
  return out;
}

Matrix centered_gram(const Eigen::Ref<const Matrix>& a) {
  const Index n = a.rows();
  const Index p = a.cols();
  const Vector mean = column_means(a);
  const int threads = max_threads();
  std::vector<Matrix> partial(static_cast<std::size_t>(threads), Matrix::Zero(p, p));
  const Index chunks = chunk_count(n);
#pragma omp parallel
  {
#ifdef _OPENMP
    Matrix& acc = partial[static_cast<std::size_t>(omp_get_thread_num())];
#else
    Matrix& acc = partial[0];
#endif
#pragma omp for schedule(static)
    for (Index c = 0; c < chunks; ++c) {
      const Index lo = c * kRowChunk;
      const Index len = std::min(kRowChunk, n - lo);
      const Matrix ac = a.middleRows(lo, len).rowwise() - mean.transpose();
      acc.selfadjointView<Eigen::Lower>().rankUpdate(ac.transpose());
    }
  }
  Matrix out = Matrix::Zero(p, p);
  for (const auto& part : partial) out += part;
  out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
  return out;
}

}  // namespace omp

}  // namespace kdebias::kernels
