#include "kdebias/common.hpp"

#include <algorithm>
#include <cmath>

namespace kdebias {

LabelVector LabelVector::from_values(std::vector<int> values) {
  if (values.empty()) throw InputError("labels", "empty label vector");
  const int max_value = *std::max_element(values.begin(), values.end());
  const int min_value = *std::min_element(values.begin(), values.end());
  if (min_value < 0) throw InputError("labels", "negative class index " + std::to_string(min_value));
  LabelVector out;
  out.values = std::move(values);
  out.num_classes = max_value + 1;
  return out;
}

void LabelVector::validate(const std::string& module) const {
  if (values.empty()) throw InputError(module, "empty label vector");
  if (num_classes < 1) throw InputError(module, "label vector declares no classes");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0 || values[i] >= num_classes) {
      throw InputError(module, "label " + std::to_string(values[i]) + " at row " +
                                   std::to_string(i) + " outside [0, " +
                                   std::to_string(num_classes) + ")");
    }
  }
}

std::vector<Index> LabelVector::class_counts() const {
  std::vector<Index> counts(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
  for (int v : values) ++counts[static_cast<std::size_t>(v)];
  return counts;
}

void require_finite(const Eigen::Ref<const Matrix>& m, const std::string& module,
                    const std::string& what) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j))) {
        throw InputError(module, what + " has a non-finite entry at (" + std::to_string(i) + ", " +
                                     std::to_string(j) + ")");
      }
}

Matrix l2_normalize_rows(const Eigen::Ref<const Matrix>& m) {
  Matrix out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

Matrix select_rows(const Eigen::Ref<const Matrix>& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(rows[k]);
  return out;
}

LabelVector select(const LabelVector& labels, const std::vector<Index>& rows) {
  LabelVector out;
  out.num_classes = labels.num_classes;
  out.values.reserve(rows.size());
  for (Index r : rows) out.values.push_back(labels[r]);
  return out;
}

}  // namespace kdebias
