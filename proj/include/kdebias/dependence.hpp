#pragma once

// Empirical dependence estimators. Everything is evaluated as centered
// cross products of tall n x k factors, so no n x n matrix is formed.

#include "kdebias/kernelization.hpp"

namespace kdebias {

// Z = L_X W^T for feature-space weights W (r x D).
Representation encode(const Eigen::Ref<const Matrix>& weights, const RffFactor& lx);

// (1/n^2) |Z^T H L|_F^2: sum over output coordinates and one-hot classes of
// the squared empirical covariance.
double dep_vs_labels(const Representation& z, const LabelFactor& lf);
double dep_vs_labels(const Eigen::Ref<const Matrix>& weights, const RffFactor& lx,
                     const LabelFactor& lf);

// (1/n^2) |Z_I^T H Z_T|_F^2 with a linear kernel on the Z_T coordinates.
double dep_cross(const Representation& zi, const Representation& zt);
double dep_cross(const Eigen::Ref<const Matrix>& weights_i, const RffFactor& lx_i,
                 const Eigen::Ref<const Matrix>& weights_t, const RffFactor& lx_t);

// Biased HSIC (1/n^2) Tr[K_A H K_B H] = (1/n^2) |L_A^T H L_B|_F^2 for any
// factors with K = L L^T.
double hsic_from_factors(const Eigen::Ref<const Matrix>& la, const Eigen::Ref<const Matrix>& lb);

// HSIC with RBF kernels on both sides approximated by random Fourier features.
double hsic(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b,
            const KernelConfig& cfg_a, const KernelConfig& cfg_b);

}  // namespace kdebias
