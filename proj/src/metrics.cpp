#include "kdebias/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kdebias {

namespace {

void require_aligned(const LabelVector& a, const LabelVector& b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionError("metrics", std::string(what) + " length " + std::to_string(b.size()) +
                                        " differs from " + std::to_string(a.size()));
  }
}

}  // namespace

double eod(const LabelVector& yhat, const LabelVector& y, const LabelVector& s, int positive) {
  require_aligned(yhat, y, "y");
  require_aligned(yhat, s, "s");
  Index hits[2] = {0, 0};
  Index total[2] = {0, 0};
  for (Index i = 0; i < y.size(); ++i) {
    if (s[i] != 0 && s[i] != 1) {
      throw InputError("metrics", "eod needs a binary sensitive attribute, got value " + std::to_string(s[i]));
    }
    if (y[i] != positive) continue;
    ++total[s[i]];
    hits[s[i]] += yhat[i] == positive;
  }
  for (int g = 0; g < 2; ++g) {
    if (total[g] == 0) {
      throw InputError("metrics", "eod: cell (y=" + std::to_string(positive) + ", s=" +
                                      std::to_string(g) + ") is empty");
    }
  }
  const double tpr1 = static_cast<double>(hits[1]) / static_cast<double>(total[1]);
  const double tpr0 = static_cast<double>(hits[0]) / static_cast<double>(total[0]);
  return std::abs(tpr1 - tpr0);
}

GroupReport group_accuracies(const LabelVector& yhat, const LabelVector& y, const LabelVector& s) {
  require_aligned(yhat, y, "y");
  require_aligned(yhat, s, "s");
  if (y.size() == 0) throw InputError("metrics", "no samples");
  std::map<std::pair<int, int>, std::pair<Index, Index>> cells;  // (y, s) -> (correct, count)
  Index correct = 0;
  for (Index i = 0; i < y.size(); ++i) {
    auto& cell = cells[{y[i], s[i]}];
    const bool hit = yhat[i] == y[i];
    cell.first += hit;
    ++cell.second;
    correct += hit;
  }
  GroupReport out;
  out.avg = static_cast<double>(correct) / static_cast<double>(y.size());
  out.wg = 1.0;
  for (const auto& [key, cell] : cells) {
    GroupAccuracy g;
    g.y = key.first;
    g.s = key.second;
    g.count = cell.second;
    g.accuracy = static_cast<double>(cell.first) / static_cast<double>(cell.second);
    out.wg = std::min(out.wg, g.accuracy);
    out.groups.push_back(g);
  }
  out.gap = out.avg - out.wg;
  return out;
}

double max_skew_at_k(const Eigen::Ref<const Vector>& scores, const LabelVector& s, Index k) {
  if (scores.size() != s.size()) throw DimensionError("metrics", "scores and labels differ in length");
  if (k <= 0 || k > s.size()) {
    throw ConfigError("metrics", "k = " + std::to_string(k) + " outside [1, " + std::to_string(s.size()) + "]");
  }
  s.validate("metrics");
  const auto overall = s.class_counts();
  for (std::size_t g = 0; g < overall.size(); ++g) {
    if (overall[g] == 0) throw InputError("metrics", "sensitive class " + std::to_string(g) + " never occurs");
  }
  std::vector<Index> order(static_cast<std::size_t>(s.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });

  std::vector<Index> top(overall.size(), 0);
  for (Index i = 0; i < k; ++i) ++top[static_cast<std::size_t>(s[order[static_cast<std::size_t>(i)]])];
  const double desired = 1.0 / static_cast<double>(overall.size());
  double best = -std::numeric_limits<double>::infinity();
  for (Index count : top) {
    const double p = count > 0 ? static_cast<double>(count) / static_cast<double>(k) : 0.5 / static_cast<double>(k);
    best = std::max(best, std::log(p / desired));
  }
  return best;
}

}  // namespace kdebias
