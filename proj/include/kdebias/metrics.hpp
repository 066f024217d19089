#pragma once

// Fairness and group-robustness metrics over hard predictions.

#include <map>
#include <string>
#include <vector>

#include "kdebias/common.hpp"

namespace kdebias {

struct GroupAccuracy {
  int y = 0;
  int s = 0;
  Index count = 0;
  double accuracy = 0.0;
};

struct GroupReport {
  double avg = 0.0;  // overall (sample-weighted) accuracy
  double wg = 0.0;   // min over nonempty (y, s) cells
  double gap = 0.0;  // avg - wg
  std::vector<GroupAccuracy> groups;  // nonempty cells ordered by (y, s)
};

struct MetricsReport {
  double eod = 0.0;
  GroupReport groups;
  std::map<std::string, double> max_skew;
  double dep_zy = 0.0;
  double dep_zs = 0.0;
};

// |P(yhat = p | y = p, s = 1) - P(yhat = p | y = p, s = 0)| for binary s.
double eod(const LabelVector& yhat, const LabelVector& y, const LabelVector& s, int positive = 1);

GroupReport group_accuracies(const LabelVector& yhat, const LabelVector& y, const LabelVector& s);

// Rank by score descending (ties by index), take the top k, and return
// max_g ln(p_topk(g) / p_desired(g)) with a uniform desired distribution.
// Classes missing from the top k count as 1/(2k).
double max_skew_at_k(const Eigen::Ref<const Vector>& scores, const LabelVector& s, Index k);

}  // namespace kdebias
