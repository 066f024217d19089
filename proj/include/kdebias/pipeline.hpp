#pragma once

// Train/evaluate/sweep orchestration shared by the CLI and the tests.

#include <ostream>
#include <string>
#include <vector>

#include "kdebias/data_io.hpp"

namespace kdebias {

struct EvalOptions {
  int positive = 1;      // EOD positive class
  Index skew_k = 1000;   // clipped to n
};

// Predictions, group metrics, EOD, MaxSkew@k per class prompt (ranking by
// cosine to that class) and Dep(Z_I, Y), Dep(Z_I, S) on the given split.
// Needs ground-truth y and s.
MetricsReport evaluate(const TrainedModel& model, const TrainingData& split,
                       const std::vector<std::string>& class_names, const EvalOptions& opts = {});

struct SweepRow {
  double tau = 0.0;
  double tau_z = 0.0;
  double avg = 0.0;
  double wg = 0.0;
  double gap = 0.0;
  double eod = 0.0;
  double seconds = 0.0;
  std::string error;  // empty on success
};

// One independent train + evaluate per (tau, tau_z) pair; tau sets both
// tau_i and tau_t. Rows are ordered by (tau, tau_z). A failing cell gets NaN
// metrics and its error message; the remaining cells still run.
std::vector<SweepRow> sweep(const io::Dataset& train_set, const io::Dataset& eval_set,
                            const TrainConfig& base, std::vector<double> taus,
                            std::vector<double> tau_zs, const EvalOptions& opts = {});

// Header tau,tau_z,avg,wg,gap,eod,seconds preceded by a '#' config line;
// failing cells are followed by a '# error' comment line.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, const io::json& config_echo);

}  // namespace kdebias
