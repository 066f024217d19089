#pragma once

// Closed-form encoder for one side of the alternating problem.
//
// With L the n x D feature factor, the subproblem
//
//   max_W  (1/n^2) ( |W L^T H L_Y|^2 - tau |W L^T H L_S|^2 + tau_z |W L^T H Z_O|^2 )
//   s.t.   W C W^T = I_r,   C = (1/n) L^T H L + gamma I
//
// is solved by the top-r eigenvectors U of B u = lambda C u with
// B = (1/n^2) L^T (H K_Y H - tau H K_S H + tau_z H Z_O Z_O^T H) L, giving
// W = U^T and an attained objective equal to the sum of those eigenvalues.
//
// W is the feature-space form of the kernel expansion coefficients: for a
// full-column-rank L it equals Theta L with Theta the minimum-norm
// coefficient matrix, and eigenvectors with nonzero eigenvalue always lie in
// the row space of L, so Z = L W^T matches the kernel expansion on training
// points and f(x) = W r(x) on new ones.

#include <optional>
#include <utility>

#include "kdebias/kernelization.hpp"

namespace kdebias {

inline constexpr double kDefaultGamma = 1e-4;

struct SolveSpec {
  double tau = 0.0;
  double tau_z = 0.0;
  double gamma = kDefaultGamma;
  Index r = 1;
  std::optional<Representation> z_other;  // absent: the tau_z term is dropped

  void validate(Index rff_dim, Index n) const;
};

struct Encoder {
  Matrix weights;       // r x D
  KernelConfig kernel;  // resolved; rebuilds the feature map for new points
  Index input_dim = 0;
  Vector train_mean;    // mean of Z over the training rows

  Index r() const { return weights.rows(); }
  RffMap feature_map() const { return RffMap(kernel.bandwidth, kernel.rff_dim, kernel.seed, input_dim); }
};

struct EigenSolution {
  Vector eigenvalues;  // all D generalized eigenvalues, descending
  Matrix eigenvectors; // D x r, columns C-orthonormal
  double objective = 0.0;
};

struct SolveResult {
  Encoder encoder;
  EigenSolution eigen;
};

// A feature factor prepared for repeated solves: caches (1/n) L^T H L and
// the Cholesky factor of C for the construction-time gamma.
class EncoderProblem {
 public:
  // Ordinary factor: L is lx.matrix.
  EncoderProblem(const RffFactor& lx, double gamma);

  // Grouped factor: row i of L is row group[i] of class_factor. Used for
  // the text side, where each sample is paired with its class prompt.
  EncoderProblem(const RffFactor& class_factor, const LabelVector& group, double gamma);

  SolveResult solve(const LabelFactor& ly, const LabelFactor& ls, const SolveSpec& spec) const;

  // L^T H m for an n x k matrix m.
  Matrix centered_cross(const Eigen::Ref<const Matrix>& m) const;
  // C for the given gamma.
  Matrix constraint_matrix(double gamma) const;
  // Z = L W^T over the n training rows.
  Representation encode(const Eigen::Ref<const Matrix>& weights) const;
  // Dense n x D factor (materializes the grouped expansion).
  Matrix dense_factor() const;

  Index rows() const { return n_; }
  Index rff_dim() const { return factor_.cols(); }
  double gamma() const { return gamma_; }
  const RffFactor& factor() const { return factor_; }

 private:
  RffFactor factor_;                  // L, or the per-class factor when grouped
  std::optional<LabelVector> group_;  // row -> class, when grouped
  Index n_ = 0;
  double gamma_ = kDefaultGamma;
  Matrix gram_;                       // (1/n) L^T H L
  Eigen::LLT<Matrix> chol_;           // of gram_ + gamma_ I
};

SolveResult solve_encoder(const RffFactor& lx, const LabelFactor& ly, const LabelFactor& ls,
                          const SolveSpec& spec);

// Row i is W r(x_i).
Representation apply_encoder(const Encoder& enc, const Eigen::Ref<const Matrix>& x);

// The subproblem objective for weights W evaluated term by term.
double subproblem_objective(const Representation& z, const LabelFactor& ly, const LabelFactor& ls,
                            double tau, double tau_z, const Representation* z_other);

// Five-term objective of the joint problem from the two representations.
double objective_value(const Representation& zi, const Representation& zt, const LabelFactor& ly,
                       const LabelFactor& ls, double tau_i, double tau_t, double tau_z);

double objective_value(const Encoder& enc_i, const Encoder& enc_t, const RffFactor& lx_i,
                       const RffFactor& lx_t, const LabelFactor& ly, const LabelFactor& ls,
                       double tau_i, double tau_t, double tau_z);

// |W C W^T - I|_F for the factor's constraint matrix.
double constraint_residual(const Eigen::Ref<const Matrix>& weights, const Eigen::Ref<const Matrix>& lx,
                           double gamma);

}  // namespace kdebias
