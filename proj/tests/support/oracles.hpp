#pragma once

// Independent reference computations: dense n x n forms and definitional
// sums, usable only at small n.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "kdebias/common.hpp"

namespace kdebias::oracle {

inline Matrix dense_h(Index n) {
  return Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
}

inline Matrix one_hot(const LabelVector& y) {
  Matrix m = Matrix::Zero(y.size(), y.num_classes);
  for (Index i = 0; i < y.size(); ++i) m(i, y[i]) = 1.0;
  return m;
}

inline Matrix same_class(const LabelVector& y) {
  Matrix k(y.size(), y.size());
  for (Index i = 0; i < y.size(); ++i)
    for (Index j = 0; j < y.size(); ++j) k(i, j) = y[i] == y[j] ? 1.0 : 0.0;
  return k;
}

inline Matrix rbf_gram(const Matrix& a, const Matrix& b, double sigma) {
  Matrix k(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j) {
      double sq = 0.0;
      for (Index t = 0; t < a.cols(); ++t) sq += (a(i, t) - b(j, t)) * (a(i, t) - b(j, t));
      k(i, j) = std::exp(-sq / (2.0 * sigma * sigma));
    }
  return k;
}

// Symmetric PSD square-root factor F with F F^T = k.
inline Matrix psd_factor(const Matrix& k) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(k);
  Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

inline double all_pairs_median(const Matrix& x) {
  std::vector<double> d;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = i + 1; j < x.rows(); ++j) d.push_back((x.row(i) - x.row(j)).norm());
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  return m % 2 == 1 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

// sum_j sum_beta Cov^2(Z_j, beta) over the one-hot basis of `y`.
inline double dep_labels_by_covariance(const Matrix& z, const LabelVector& y) {
  const double n = static_cast<double>(z.rows());
  double total = 0.0;
  for (Index j = 0; j < z.cols(); ++j)
    for (int c = 0; c < y.num_classes; ++c) {
      double zb = 0.0, zs = 0.0, bs = 0.0;
      for (Index i = 0; i < z.rows(); ++i) {
        const double beta = y[i] == c ? 1.0 : 0.0;
        zb += z(i, j) * beta;
        zs += z(i, j);
        bs += beta;
      }
      const double cov = zb / n - zs * bs / (n * n);
      total += cov * cov;
    }
  return total;
}

// sum_{m,j} [ (1/n) sum_i f_j g_m - (1/n^2) sum f_j sum g_m ]^2
inline double dep_cross_by_covariance(const Matrix& f, const Matrix& g) {
  const double n = static_cast<double>(f.rows());
  double total = 0.0;
  for (Index j = 0; j < f.cols(); ++j)
    for (Index m = 0; m < g.cols(); ++m) {
      double fg = 0.0, fs = 0.0, gs = 0.0;
      for (Index i = 0; i < f.rows(); ++i) {
        fg += f(i, j) * g(i, m);
        fs += f(i, j);
        gs += g(i, m);
      }
      const double cov = fg / n - fs * gs / (n * n);
      total += cov * cov;
    }
  return total;
}

inline double hsic_dense(const Matrix& ka, const Matrix& kb) {
  const Index n = ka.rows();
  const Matrix h = dense_h(n);
  return (ka * h * kb * h).trace() / static_cast<double>(n * n);
}

// Dense B and C of the generalized problem for feature factor l.
struct DenseProblem {
  Matrix b;
  Matrix c;
};

inline DenseProblem dense_problem(const Matrix& l, const LabelVector& y, const LabelVector& s,
                                  double tau, double tau_z, const Matrix* z_other, double gamma) {
  const Index n = l.rows();
  const double nn = static_cast<double>(n);
  const Matrix h = dense_h(n);
  Matrix inner = h * same_class(y) * h - tau * h * same_class(s) * h;
  if (z_other != nullptr) inner += tau_z * h * (*z_other) * z_other->transpose() * h;
  DenseProblem p;
  p.b = l.transpose() * inner * l / (nn * nn);
  p.c = l.transpose() * h * l / nn + gamma * Matrix::Identity(l.cols(), l.cols());
  return p;
}

// Generalized eigenvalues of (b, c), descending.
inline Vector generalized_eigenvalues(const DenseProblem& p) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(p.b, p.c);
  return es.eigenvalues().reverse();
}

// J(W) = Tr(W B W^T).
inline double subproblem_value(const DenseProblem& p, const Matrix& w) {
  return (w * p.b * w.transpose()).trace();
}

// W = O C^{-1/2} for orthonormal-row O satisfies W C W^T = I.
inline Matrix inverse_sqrt(const Matrix& c) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(c);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

inline double constraint_residual(const Matrix& w, const Matrix& l, double gamma) {
  const Index n = l.rows();
  const Matrix c = l.transpose() * dense_h(n) * l / static_cast<double>(n) +
                   gamma * Matrix::Identity(l.cols(), l.cols());
  return (w * c * w.transpose() - Matrix::Identity(w.rows(), w.rows())).norm();
}

inline std::vector<int> cosine_argmax(const Matrix& a, const Matrix& p) {
  std::vector<int> out;
  for (Index i = 0; i < a.rows(); ++i) {
    int best = 0;
    double best_cos = -2.0;
    for (Index k = 0; k < p.rows(); ++k) {
      double dot = 0.0, na = 0.0, np = 0.0;
      for (Index t = 0; t < a.cols(); ++t) {
        dot += a(i, t) * p(k, t);
        na += a(i, t) * a(i, t);
        np += p(k, t) * p(k, t);
      }
      const double cosv = dot / std::sqrt(na * np);
      if (cosv > best_cos) {
        best_cos = cosv;
        best = static_cast<int>(k);
      }
    }
    out.push_back(best);
  }
  return out;
}

// Splits unquoted comma-separated lines; the first line is the header.
inline std::vector<std::vector<std::string>> split_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

}  // namespace kdebias::oracle
