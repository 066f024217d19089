#include "kdebias/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "kdebias/dependence.hpp"
#include "kdebias/kernels.hpp"

namespace kdebias {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double agreement(const LabelVector& a, const LabelVector& b) {
  Index same = 0;
  for (Index i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

KernelConfig kernel_config(const TrainConfig& cfg, std::optional<double> bandwidth,
                           std::uint64_t seed) {
  KernelConfig k;
  k.rff_dim = cfg.rff_dim;
  k.seed = seed;
  k.median_subsample = cfg.median_subsample;
  if (bandwidth) {
    k.mode = BandwidthMode::explicit_value;
    k.bandwidth = *bandwidth;
  }
  return k;
}

// Rotate `enc` so that its representation on `problem` best matches `fixed`
// (orthogonal Procrustes). Every term of J is invariant under the rotation.
void align_to(Encoder& enc, const EncoderProblem& problem, const Representation& fixed) {
  const Representation z = problem.encode(enc.weights);
  const Matrix m = kernels::omp::centered_cross(z.data, fixed.data);
  if (m.norm() == 0.0) return;
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix rot = svd.matrixU() * svd.matrixV().transpose();
  enc.weights = (rot.transpose() * enc.weights).eval();
  enc.train_mean = (rot.transpose() * enc.train_mean).eval();
}

Matrix class_representations(const RffFactor& text_factor, const Encoder& enc_t) {
  Matrix reps = text_factor.matrix * enc_t.weights.transpose();
  reps.rowwise() -= enc_t.train_mean.transpose();
  return reps;
}

LabelVector with_classes(LabelVector labels, int num_classes) {
  labels.num_classes = num_classes;
  return labels;
}

}  // namespace

void TrainConfig::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("trainer", std::string(name) + " must be >= 0");
  };
  nonneg(tau_i, "tau_i");
  nonneg(tau_t, "tau_t");
  nonneg(tau_z, "tau_z");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("trainer", "gamma must be > 0");
  if (r < 0) throw ConfigError("trainer", "r must be >= 1 (or 0 for the default)");
  if (rff_dim < 1) throw ConfigError("trainer", "rff_dim must be >= 1");
  if (iters < 0) throw ConfigError("trainer", "iters must be >= 0");
  if (median_subsample < 2) throw ConfigError("trainer", "median subsample must be >= 2");
  if (bandwidth_i && !(*bandwidth_i > 0.0)) throw ConfigError("trainer", "image bandwidth must be > 0");
  if (bandwidth_t && !(*bandwidth_t > 0.0)) throw ConfigError("trainer", "text bandwidth must be > 0");
}

Index TrainConfig::resolved_r(int num_classes) const {
  if (r > 0) return r;
  return std::max<Index>(1, num_classes - 1);
}

LabelVector zero_shot_predict(const Eigen::Ref<const Matrix>& a,
                              const Eigen::Ref<const Matrix>& prototypes) {
  if (a.cols() != prototypes.cols()) {
    throw DimensionError("trainer", "zero-shot: image dim " + std::to_string(a.cols()) +
                                        " differs from prompt dim " +
                                        std::to_string(prototypes.cols()));
  }
  if (prototypes.rows() < 1) throw InputError("trainer", "zero-shot: no prompts");
  if (a.rows() < 1) throw InputError("trainer", "zero-shot: no rows to classify");

  const Vector pnorm = prototypes.rowwise().norm();
  if (pnorm.maxCoeff() == 0.0) throw InputError("trainer", "zero-shot: every prompt row has zero norm");
  const Vector anorm = a.rowwise().norm();
  if (anorm.maxCoeff() == 0.0) throw InputError("trainer", "zero-shot: every image row has zero norm");

  const Matrix dots = a * prototypes.transpose();
  LabelVector out;
  out.num_classes = static_cast<int>(prototypes.rows());
  out.values.resize(static_cast<std::size_t>(a.rows()), 0);
  for (Index i = 0; i < a.rows(); ++i) {
    if (anorm(i) == 0.0) continue;
    double best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Index k = 0; k < prototypes.rows(); ++k) {
      if (pnorm(k) == 0.0) continue;
      const double cosine = dots(i, k) / (anorm(i) * pnorm(k));
      if (cosine > best) {
        best = cosine;
        arg = static_cast<int>(k);
      }
    }
    out.values[static_cast<std::size_t>(i)] = arg;
  }
  return out;
}

std::vector<Index> balanced_presample(const LabelVector& yhat, std::uint64_t seed) {
  yhat.validate("trainer");
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(yhat.num_classes));
  for (Index i = 0; i < yhat.size(); ++i) by_class[static_cast<std::size_t>(yhat[i])].push_back(i);
  std::size_t keep = std::numeric_limits<std::size_t>::max();
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    if (by_class[k].empty()) {
      throw InputError("trainer", "pre-sampling: predicted class " + std::to_string(k) + " is empty");
    }
    keep = std::min(keep, by_class[k].size());
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 7u};
  std::mt19937_64 engine(seq);
  std::vector<Index> out;
  for (auto& rows : by_class) {
    for (std::size_t i = 0; i < keep; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
      std::swap(rows[i], rows[pick(engine)]);
    }
    out.insert(out.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(out.begin(), out.end());
  return out;
}

TrainedModel train(const TrainingData& data, const TrainConfig& cfg, const TrainObserver& observer) {
  cfg.validate();
  const Matrix& x_all = data.images.data;
  const Matrix& x_t = data.class_text.data;
  const Index n_all = x_all.rows();
  const int c = static_cast<int>(x_t.rows());
  if (c < 2) throw InputError("trainer", "need at least 2 class prompts, got " + std::to_string(c));
  if (n_all < 2) throw InputError("trainer", "need at least 2 images");
  if (x_t.cols() != x_all.cols()) {
    throw DimensionError("trainer", "class prompts have dim " + std::to_string(x_t.cols()) +
                                        ", images have dim " + std::to_string(x_all.cols()));
  }
  if (data.sensitive_text && data.sensitive_text->cols() != x_all.cols()) {
    throw DimensionError("trainer", "sensitive prompts have dim " +
                                        std::to_string(data.sensitive_text->cols()) +
                                        ", images have dim " + std::to_string(x_all.cols()));
  }
  for (const auto* labels : {&data.y, &data.s}) {
    if (*labels && (*labels)->size() != n_all) {
      throw DimensionError("trainer", "label vector has " + std::to_string((*labels)->size()) +
                                          " rows, images have " + std::to_string(n_all));
    }
  }
  if (data.y) {
    data.y->validate("trainer");
    if (data.y->num_classes > c) {
      throw DimensionError("trainer", "labels have " + std::to_string(data.y->num_classes) +
                                          " classes but there are " + std::to_string(c) +
                                          " class prompts");
    }
  }

  // Pseudo labels.
  LabelVector yhat_all;
  if (cfg.supervised_y) {
    if (!data.y) throw ConfigError("trainer", "supervised_y requires ground-truth target labels");
    yhat_all = with_classes(*data.y, c);
  } else {
    yhat_all = zero_shot_predict(x_all, x_t);
  }
  LabelVector shat_all;
  if (cfg.supervised_s) {
    if (!data.s) throw ConfigError("trainer", "supervised_s requires ground-truth sensitive labels");
    data.s->validate("trainer");
    shat_all = *data.s;
  } else if (data.sensitive_text) {
    shat_all = zero_shot_predict(x_all, data.sensitive_text->data);
  } else {
    throw ConfigError("trainer", "no sensitive source: provide sensitive prompts or use supervised_s");
  }

  TrainedModel model;
  model.config = cfg;
  model.num_classes = c;
  model.class_text = x_t;
  if (cfg.balance_presample) {
    model.train_rows = balanced_presample(yhat_all, derive_seed(cfg.seed, 2));
  } else {
    model.train_rows.resize(static_cast<std::size_t>(n_all));
    for (Index i = 0; i < n_all; ++i) model.train_rows[static_cast<std::size_t>(i)] = i;
  }
  const auto& rows = model.train_rows;
  const Matrix x_i = cfg.balance_presample ? select_rows(x_all, rows) : x_all;
  LabelVector yhat = cfg.balance_presample ? select(yhat_all, rows) : yhat_all;
  const LabelVector shat = cfg.balance_presample ? select(shat_all, rows) : shat_all;
  std::optional<LabelVector> truth;
  if (data.y) truth = cfg.balance_presample ? select(*data.y, rows) : *data.y;

  const Index r = cfg.resolved_r(c);
  const RffFactor lx_i = rff_factor(x_i, kernel_config(cfg, cfg.bandwidth_i, cfg.seed));
  const RffFactor lx_t = rff_factor(x_t, kernel_config(cfg, cfg.bandwidth_t, derive_seed(cfg.seed, 1)));
  const EncoderProblem image_problem(lx_i, cfg.gamma);
  const LabelFactor ls = label_factor(shat);
  LabelFactor ly = label_factor(yhat);

  auto truth_agreement = [&](const LabelVector& labels) {
    return truth ? agreement(labels, *truth) : kNaN;
  };
  auto notify = [&](int iteration, const Encoder& ei, const Encoder* et) {
    if (observer) observer(TrainState{iteration, yhat, shat, ei, et});
  };

  // Initialization: image side alone, no cross term.
  SolveSpec init_spec;
  init_spec.tau = cfg.tau_i;
  init_spec.gamma = cfg.gamma;
  init_spec.r = r;
  Encoder enc_i = image_problem.solve(ly, ls, init_spec).encoder;
  Representation z_i = image_problem.encode(enc_i.weights);
  {
    IterationRecord rec;
    rec.iteration = -1;
    rec.j_start = kNaN;
    rec.j_text = kNaN;
    rec.j_image = subproblem_objective(z_i, ly, ls, cfg.tau_i, 0.0, nullptr);
    rec.dep_zi_y = dep_vs_labels(z_i, ly);
    rec.dep_zi_s = dep_vs_labels(z_i, ls);
    rec.dep_zt_y = rec.dep_zt_s = rec.dep_cross = kNaN;
    rec.agreement_truth = truth_agreement(yhat);
    model.history.push_back(rec);
  }
  notify(-1, enc_i, nullptr);

  std::optional<Encoder> enc_t;
  for (int it = 0; it < cfg.iters; ++it) {
    IterationRecord rec;
    rec.iteration = it;
    const EncoderProblem text_problem(lx_t, yhat, cfg.gamma);
    rec.j_start = enc_t ? objective_value(z_i, text_problem.encode(enc_t->weights), ly, ls, cfg.tau_i,
                                          cfg.tau_t, cfg.tau_z)
                        : kNaN;

    SolveSpec text_spec;
    text_spec.tau = cfg.tau_t;
    text_spec.tau_z = cfg.tau_z;
    text_spec.gamma = cfg.gamma;
    text_spec.r = r;
    text_spec.z_other = z_i;
    Encoder next_t = text_problem.solve(ly, ls, text_spec).encoder;
    align_to(next_t, text_problem, z_i);
    const Representation z_t = text_problem.encode(next_t.weights);
    rec.j_text = objective_value(z_i, z_t, ly, ls, cfg.tau_i, cfg.tau_t, cfg.tau_z);

    SolveSpec image_spec;
    image_spec.tau = cfg.tau_i;
    image_spec.tau_z = cfg.tau_z;
    image_spec.gamma = cfg.gamma;
    image_spec.r = r;
    image_spec.z_other = z_t;
    Encoder next_i = image_problem.solve(ly, ls, image_spec).encoder;
    align_to(next_i, image_problem, z_t);
    z_i = image_problem.encode(next_i.weights);
    rec.j_image = objective_value(z_i, z_t, ly, ls, cfg.tau_i, cfg.tau_t, cfg.tau_z);
    rec.dep_zi_y = dep_vs_labels(z_i, ly);
    rec.dep_zi_s = dep_vs_labels(z_i, ls);
    rec.dep_zt_y = dep_vs_labels(z_t, ly);
    rec.dep_zt_s = dep_vs_labels(z_t, ls);
    rec.dep_cross = dep_cross(z_i, z_t);
    enc_i = std::move(next_i);
    enc_t = std::move(next_t);

    if (!cfg.supervised_y) {
      Matrix centered = z_i.data;
      centered.rowwise() -= enc_i.train_mean.transpose();
      LabelVector refined = zero_shot_predict(centered, class_representations(lx_t, *enc_t));
      for (Index i = 0; i < refined.size(); ++i) rec.changed += refined[i] != yhat[i];
      rec.agreement_prev = agreement(refined, yhat);
      yhat = std::move(refined);
      ly = label_factor(yhat);
    }
    rec.agreement_truth = truth_agreement(yhat);
    model.history.push_back(rec);
    notify(it, enc_i, &*enc_t);
    // Pseudo labels reached a fixed point; further steps would repeat this one.
    if (!cfg.supervised_y && rec.changed == 0) break;
  }

  model.encoder_i = std::move(enc_i);
  if (enc_t) {
    model.class_reps = class_representations(lx_t, *enc_t);
    model.encoder_t = std::move(enc_t);
  }
  model.yhat = std::move(yhat);
  model.shat = shat;
  return model;
}

Representation image_representation(const TrainedModel& model, const Eigen::Ref<const Matrix>& x) {
  Representation z = apply_encoder(model.encoder_i, x);
  z.data.rowwise() -= model.encoder_i.train_mean.transpose();
  return z;
}

LabelVector predict(const TrainedModel& model, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != model.class_text.cols()) {
    throw DimensionError("trainer", "model expects " + std::to_string(model.class_text.cols()) +
                                        "-dimensional images, got " + std::to_string(x.cols()));
  }
  if (!model.encoder_t) return zero_shot_predict(x, model.class_text);
  return zero_shot_predict(image_representation(model, x).data, model.class_reps);
}

}  // namespace kdebias
