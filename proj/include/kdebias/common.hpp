#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kdebias {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Error hierarchy. Every message is prefixed with the module that raised it.
class Error : public std::runtime_error {
 public:
  Error(const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what) {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or non-finite input data, empty label sets, degenerate inputs.
class InputError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// File-format problems: bad magic, version, dtype, truncation.
class FormatError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Categorical labels in {0, ..., num_classes - 1}.
struct LabelVector {
  std::vector<int> values;
  int num_classes = 0;

  Index size() const { return static_cast<Index>(values.size()); }
  int operator[](Index i) const { return values[static_cast<std::size_t>(i)]; }

  // Infers num_classes as max + 1. Throws on negative entries or empty input.
  static LabelVector from_values(std::vector<int> values);
  // Throws InputError unless every value lies in [0, num_classes).
  void validate(const std::string& module) const;
  std::vector<Index> class_counts() const;
};

// n x d frozen-encoder features.
struct EmbeddingMatrix {
  Matrix data;
  bool normalized = false;

  Index rows() const { return data.rows(); }
  Index cols() const { return data.cols(); }
};

// n x r encoded features, row i = f(x_i).
struct Representation {
  Matrix data;

  Index rows() const { return data.rows(); }
  Index cols() const { return data.cols(); }
};

void require_finite(const Eigen::Ref<const Matrix>& m, const std::string& module,
                    const std::string& what);

// Rows scaled to unit Euclidean norm; zero rows are left untouched.
Matrix l2_normalize_rows(const Eigen::Ref<const Matrix>& m);

Matrix select_rows(const Eigen::Ref<const Matrix>& m, const std::vector<Index>& rows);
LabelVector select(const LabelVector& labels, const std::vector<Index>& rows);

}  // namespace kdebias
