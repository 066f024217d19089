#include "kdebias/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kdebias/dependence.hpp"
#include "kdebias/kernels.hpp"

namespace kdebias {

namespace {

Eigen::LLT<Matrix> factorize_constraint(const Matrix& gram, double gamma) {
  Matrix c = gram;
  c.diagonal().array() += gamma;
  Eigen::LLT<Matrix> chol(c);
  if (chol.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "Cholesky of the constraint matrix failed (D=" << c.rows() << ", gamma=" << gamma
        << ", trace=" << c.trace() << ", min diagonal=" << c.diagonal().minCoeff()
        << "); increase gamma";
    throw NumericalError("solver", msg.str());
  }
  return chol;
}

// First clearly nonzero component made positive.
void fix_sign(Eigen::Ref<Vector> u) {
  const double scale = u.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  for (Index i = 0; i < u.size(); ++i) {
    if (std::abs(u(i)) > 1e-12 * scale) {
      if (u(i) < 0.0) u = -u;
      return;
    }
  }
}

}  // namespace

void SolveSpec::validate(Index rff_dim, Index n) const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("solver", "gamma must be > 0");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("solver", "tau must be >= 0");
  if (!(tau_z >= 0.0) || !std::isfinite(tau_z)) throw ConfigError("solver", "tau_z must be >= 0");
  if (r < 1) throw ConfigError("solver", "r must be >= 1");
  if (r > rff_dim) {
    throw ConfigError("solver", "r = " + std::to_string(r) + " exceeds the feature dimension " +
                                    std::to_string(rff_dim));
  }
  if (z_other && z_other->rows() != n) {
    throw DimensionError("solver", "z_other has " + std::to_string(z_other->rows()) +
                                       " rows, expected " + std::to_string(n));
  }
}

EncoderProblem::EncoderProblem(const RffFactor& lx, double gamma)
    : factor_(lx), n_(lx.rows()), gamma_(gamma) {
  if (n_ < 1) throw DimensionError("solver", "empty feature factor");
  if (!(gamma > 0.0)) throw ConfigError("solver", "gamma must be > 0");
  gram_ = kernels::omp::centered_gram(factor_.matrix) / static_cast<double>(n_);
  chol_ = factorize_constraint(gram_, gamma_);
}

EncoderProblem::EncoderProblem(const RffFactor& class_factor, const LabelVector& group,
                               double gamma)
    : factor_(class_factor), group_(group), n_(group.size()), gamma_(gamma) {
  if (n_ < 1) throw DimensionError("solver", "empty group assignment");
  if (!(gamma > 0.0)) throw ConfigError("solver", "gamma must be > 0");
  group.validate("solver");
  if (group.num_classes > class_factor.rows()) {
    throw DimensionError("solver", "group labels reference " + std::to_string(group.num_classes) +
                                       " classes but the class factor has " +
                                       std::to_string(class_factor.rows()) + " rows");
  }
  // P^T H P = diag(counts) - counts counts^T / n for the row-selection P.
  const auto counts = group.class_counts();
  const Index c = class_factor.rows();
  Vector cnt = Vector::Zero(c);
  for (std::size_t k = 0; k < counts.size(); ++k) cnt(static_cast<Index>(k)) = static_cast<double>(counts[k]);
  Matrix php = Matrix(cnt.asDiagonal()) - cnt * cnt.transpose() / static_cast<double>(n_);
  gram_ = class_factor.matrix.transpose() * php * class_factor.matrix / static_cast<double>(n_);
  gram_ = 0.5 * (gram_ + gram_.transpose()).eval();
  chol_ = factorize_constraint(gram_, gamma_);
}

Matrix EncoderProblem::centered_cross(const Eigen::Ref<const Matrix>& m) const {
  if (m.rows() != n_) {
    throw DimensionError("solver", "matrix has " + std::to_string(m.rows()) + " rows, expected " +
                                       std::to_string(n_));
  }
  if (!group_) return kernels::omp::centered_cross(factor_.matrix, m);
  const Matrix mc = kernels::omp::center_columns(m);
  Matrix per_class = Matrix::Zero(factor_.rows(), m.cols());
  for (Index i = 0; i < n_; ++i) per_class.row((*group_)[i]) += mc.row(i);
  return factor_.matrix.transpose() * per_class;
}

Matrix EncoderProblem::constraint_matrix(double gamma) const {
  Matrix c = gram_;
  c.diagonal().array() += gamma;
  return c;
}

Representation EncoderProblem::encode(const Eigen::Ref<const Matrix>& weights) const {
  if (weights.cols() != factor_.cols()) throw DimensionError("solver", "weights/factor width mismatch");
  if (!group_) return Representation{factor_.matrix * weights.transpose()};
  const Matrix per_class = factor_.matrix * weights.transpose();
  Representation z{Matrix(n_, weights.rows())};
  for (Index i = 0; i < n_; ++i) z.data.row(i) = per_class.row((*group_)[i]);
  return z;
}

Matrix EncoderProblem::dense_factor() const {
  if (!group_) return factor_.matrix;
  Matrix out(n_, factor_.cols());
  for (Index i = 0; i < n_; ++i) out.row(i) = factor_.matrix.row((*group_)[i]);
  return out;
}

SolveResult EncoderProblem::solve(const LabelFactor& ly, const LabelFactor& ls,
                                  const SolveSpec& spec) const {
  const Index dim = factor_.cols();
  spec.validate(dim, n_);
  if (ly.rows() != n_ || ls.rows() != n_) {
    throw DimensionError("solver", "label factors must have " + std::to_string(n_) + " rows");
  }

  std::optional<Eigen::LLT<Matrix>> local_chol;
  if (spec.gamma != gamma_) local_chol = factorize_constraint(gram_, spec.gamma);
  const Eigen::LLT<Matrix>& chol = local_chol ? *local_chol : chol_;

  // B = G diag(sigma) G^T with G = [L^T H L_Y, L^T H L_S, L^T H Z_O].
  const double inv_n2 = 1.0 / (static_cast<double>(n_) * static_cast<double>(n_));
  std::vector<Matrix> blocks;
  std::vector<double> block_weight;
  blocks.push_back(centered_cross(ly.matrix));
  block_weight.push_back(inv_n2);
  if (spec.tau != 0.0) {
    blocks.push_back(centered_cross(ls.matrix));
    block_weight.push_back(-spec.tau * inv_n2);
  }
  if (spec.z_other && spec.tau_z != 0.0) {
    blocks.push_back(centered_cross(spec.z_other->data));
    block_weight.push_back(spec.tau_z * inv_n2);
  }
  Index k = 0;
  for (const auto& b : blocks) k += b.cols();
  Matrix g(dim, k);
  Vector sigma(k);
  Index col = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    g.middleCols(col, blocks[b].cols()) = blocks[b];
    sigma.segment(col, blocks[b].cols()).setConstant(block_weight[b]);
    col += blocks[b].cols();
  }

  // R^{-1} B R^{-T} = (R^{-1} G) diag(sigma) (R^{-1} G)^T = Q (T sigma T^T) Q^T.
  const Matrix whitened = chol.matrixL().solve(g);
  Eigen::HouseholderQR<Matrix> qr(whitened);
  const Index kq = std::min(dim, k);
  const Matrix q_full = qr.householderQ();
  const Matrix t = qr.matrixQR().topRows(kq).triangularView<Eigen::Upper>();
  Matrix core = t * sigma.asDiagonal() * t.transpose();
  core = 0.5 * (core + core.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(core);
  if (eig.info() != Eigen::Success) throw NumericalError("solver", "eigensolver did not converge");

  // Spectrum = eig(core) plus (dim - kq) zeros from the complement of Q.
  Vector all(dim);
  all.head(kq) = eig.eigenvalues();
  all.tail(dim - kq).setZero();
  std::sort(all.data(), all.data() + dim, std::greater<>());

  // Pick the top r, preferring core directions over padding at equal value.
  Matrix y(dim, spec.r);
  double objective = 0.0;
  Index next_core = kq - 1;  // eigenvalues() ascending
  Index next_pad = kq;
  for (Index j = 0; j < spec.r; ++j) {
    const bool core_left = next_core >= 0;
    const bool pad_left = next_pad < dim;
    const bool take_core = core_left && (!pad_left || eig.eigenvalues()(next_core) >= 0.0);
    if (take_core) {
      y.col(j) = q_full.leftCols(kq) * eig.eigenvectors().col(next_core);
      objective += eig.eigenvalues()(next_core);
      --next_core;
    } else {
      y.col(j) = q_full.col(next_pad);
      ++next_pad;
    }
  }

  Matrix u = chol.matrixU().solve(y);
  for (Index j = 0; j < u.cols(); ++j) fix_sign(u.col(j));

  SolveResult out;
  out.eigen.eigenvalues = std::move(all);
  out.eigen.eigenvectors = u;
  out.eigen.objective = objective;
  out.encoder.weights = u.transpose();
  out.encoder.kernel = factor_.config;
  out.encoder.input_dim = factor_.input_dim;
  out.encoder.train_mean = kernels::omp::column_means(encode(out.encoder.weights).data);
  return out;
}

SolveResult solve_encoder(const RffFactor& lx, const LabelFactor& ly, const LabelFactor& ls,
                          const SolveSpec& spec) {
  if (!(spec.gamma > 0.0)) throw ConfigError("solver", "gamma must be > 0");
  return EncoderProblem(lx, spec.gamma).solve(ly, ls, spec);
}

Representation apply_encoder(const Encoder& enc, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != enc.input_dim) {
    throw DimensionError("solver", "encoder expects " + std::to_string(enc.input_dim) +
                                       "-dimensional inputs, got " + std::to_string(x.cols()));
  }
  const Matrix features = enc.feature_map().apply(x);
  return Representation{features * enc.weights.transpose()};
}

double subproblem_objective(const Representation& z, const LabelFactor& ly, const LabelFactor& ls,
                            double tau, double tau_z, const Representation* z_other) {
  double j = dep_vs_labels(z, ly) - tau * dep_vs_labels(z, ls);
  if (z_other != nullptr && tau_z != 0.0) j += tau_z * dep_cross(z, *z_other);
  return j;
}

double objective_value(const Representation& zi, const Representation& zt, const LabelFactor& ly,
                       const LabelFactor& ls, double tau_i, double tau_t, double tau_z) {
  return dep_vs_labels(zi, ly) - tau_i * dep_vs_labels(zi, ls) + dep_vs_labels(zt, ly) -
         tau_t * dep_vs_labels(zt, ls) + tau_z * dep_cross(zi, zt);
}

double objective_value(const Encoder& enc_i, const Encoder& enc_t, const RffFactor& lx_i,
                       const RffFactor& lx_t, const LabelFactor& ly, const LabelFactor& ls,
                       double tau_i, double tau_t, double tau_z) {
  return objective_value(encode(enc_i.weights, lx_i), encode(enc_t.weights, lx_t), ly, ls, tau_i,
                         tau_t, tau_z);
}

double constraint_residual(const Eigen::Ref<const Matrix>& weights, const Eigen::Ref<const Matrix>& lx,
                           double gamma) {
  Matrix c = kernels::omp::centered_gram(lx) / static_cast<double>(lx.rows());
  c.diagonal().array() += gamma;
  const Matrix gap = weights * c * weights.transpose() - Matrix::Identity(weights.rows(), weights.rows());
  return gap.norm();
}

}  // namespace kdebias
