#pragma once

// Alternating training of the image and text encoders from pseudo labels.
//
// The text side is paired with the image side sample by sample: row i of
// the text factor is the feature vector of the class prompt of Yhat_i. Both
// sides therefore share n, L_Y and L_S, and the cross term Dep(Z_I, Z_T) is
// taken over the same rows.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kdebias/solver.hpp"

namespace kdebias {

struct TrainConfig {
  double tau_i = 0.7;
  double tau_t = 0.7;
  double tau_z = 0.7;
  double gamma = kDefaultGamma;
  Index r = 0;  // 0 selects c - 1 (at least 1)
  Index rff_dim = 1024;
  int iters = 10;
  std::uint64_t seed = 0;
  bool supervised_y = false;
  bool supervised_s = false;
  bool balance_presample = false;
  std::optional<double> bandwidth_i;  // explicit RBF bandwidths; median heuristic otherwise
  std::optional<double> bandwidth_t;
  Index median_subsample = 2000;

  void validate() const;
  Index resolved_r(int num_classes) const;
};

struct TrainingData {
  EmbeddingMatrix images;                        // X_I, n x d
  EmbeddingMatrix class_text;                    // X_T, c x d
  std::optional<EmbeddingMatrix> sensitive_text; // X_TS, c_S x d
  std::optional<LabelVector> y;                  // ground truth, used when supervised or for diagnostics
  std::optional<LabelVector> s;
};

struct IterationRecord {
  int iteration = -1;        // -1 for the initialization step
  double j_start = 0.0;      // J of the incoming encoders under this step's Yhat (NaN if undefined)
  double j_text = 0.0;       // J after the text half-step (NaN at initialization)
  double j_image = 0.0;      // J after the image half-step
  double dep_zi_y = 0.0;     // against the Yhat used in this step
  double dep_zi_s = 0.0;
  double dep_zt_y = 0.0;
  double dep_zt_s = 0.0;
  double dep_cross = 0.0;
  double agreement_prev = 1.0;   // fraction of rows whose Yhat is unchanged by this step's refinement
  double agreement_truth = 0.0;  // Yhat after this step vs ground truth (NaN without labels)
  Index changed = 0;
};

struct TrainedModel {
  TrainConfig config;
  int num_classes = 0;
  Encoder encoder_i;
  std::optional<Encoder> encoder_t;  // absent when iters == 0
  Matrix class_text;                 // X_T as used in training
  Matrix class_reps;                 // c x r, centered text representation of each class prompt
  std::vector<IterationRecord> history;
  LabelVector yhat;                  // final pseudo labels on the training rows
  LabelVector shat;
  std::vector<Index> train_rows;     // rows used (all rows unless presampled)
};

// Snapshot passed to an observer after every step.
struct TrainState {
  int iteration;
  const LabelVector& yhat;
  const LabelVector& shat;
  const Encoder& encoder_i;
  const Encoder* encoder_t;
};

using TrainObserver = std::function<void(const TrainState&)>;

// Cosine argmax of each row of `a` against the rows of `prototypes`. Ties go
// to the lowest index; zero-norm prototypes never win; zero-norm rows of `a`
// get class 0.
LabelVector zero_shot_predict(const Eigen::Ref<const Matrix>& a,
                              const Eigen::Ref<const Matrix>& prototypes);

// Equal-count subsample of each predicted class (count = smallest class).
// Returned indices are sorted.
std::vector<Index> balanced_presample(const LabelVector& yhat, std::uint64_t seed);

TrainedModel train(const TrainingData& data, const TrainConfig& cfg,
                   const TrainObserver& observer = nullptr);

// Z_I - mean for new images.
Representation image_representation(const TrainedModel& model, const Eigen::Ref<const Matrix>& x);

// Class predictions for new images: cosine against the class
// representations, or raw zero-shot when the model has no text encoder.
LabelVector predict(const TrainedModel& model, const Eigen::Ref<const Matrix>& x);

}  // namespace kdebias
