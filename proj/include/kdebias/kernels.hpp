#pragma once

// Row-parallel numeric kernels shared by kernelization, dependence and solver.
//
// Two implementations with identical contracts:
//   serial::  plain loops, kept as the reference for tests and benchmarks
//   omp::     OpenMP over fixed row chunks; used by the library
//
// The omp:: RFF map is bit-identical across thread counts (chunk boundaries do
// not depend on the thread count). Reductions over rows (means, cross
// products) sum per-thread partials in thread order, so they are
// deterministic for a fixed thread count and agree across thread counts to
// rounding.

#include "kdebias/common.hpp"

namespace kdebias::kernels {

// Rows per work unit for the omp:: kernels.
inline constexpr Index kRowChunk = 256;

int max_threads();

namespace serial {

// out(i, j) = sqrt(2/D) * cos(<freq.row(j), x.row(i)> + phase(j)), D = freq.rows().
Matrix rff_map(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& freq,
               const Eigen::Ref<const Vector>& phase);

Vector column_means(const Eigen::Ref<const Matrix>& a);

// H a, with H = I - (1/n) 1 1^T, via the rank-one update a - 1 (1^T a)/n.
Matrix center_columns(const Eigen::Ref<const Matrix>& a);

// a^T H b for a (n x p), b (n x q).
Matrix centered_cross(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b);

// a^T H a.
Matrix centered_gram(const Eigen::Ref<const Matrix>& a);

}  // namespace serial

namespace omp {

Matrix rff_map(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& freq,
               const Eigen::Ref<const Vector>& phase);
Vector column_means(const Eigen::Ref<const Matrix>& a);
Matrix center_columns(const Eigen::Ref<const Matrix>& a);
Matrix centered_cross(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b);
Matrix centered_gram(const Eigen::Ref<const Matrix>& a);

}  // namespace omp

}  // namespace kdebias::kernels
