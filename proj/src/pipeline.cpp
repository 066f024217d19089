#include "kdebias/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>

#include "kdebias/dependence.hpp"

namespace kdebias {

namespace {

// Cosine of each row of a against one prototype row.
Vector cosine_scores(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Vector>& proto) {
  const double pn = proto.norm();
  Vector out = a * proto;
  for (Index i = 0; i < a.rows(); ++i) {
    const double an = a.row(i).norm();
    out(i) = (an > 0.0 && pn > 0.0) ? out(i) / (an * pn) : -1.0;
  }
  return out;
}

}  // namespace

MetricsReport evaluate(const TrainedModel& model, const TrainingData& split,
                       const std::vector<std::string>& class_names, const EvalOptions& opts) {
  if (!split.y || !split.s) throw InputError("pipeline", "evaluation needs ground-truth y and s labels");
  const Matrix& x = split.images.data;
  if (split.y->num_classes > model.num_classes) {
    throw DimensionError("pipeline", "labels have " + std::to_string(split.y->num_classes) +
                                         " classes, the model has " + std::to_string(model.num_classes));
  }
  const LabelVector yhat = predict(model, x);

  MetricsReport report;
  report.groups = group_accuracies(yhat, *split.y, *split.s);
  report.eod = eod(yhat, *split.y, *split.s, opts.positive);

  Matrix reps;
  Matrix protos;
  if (model.encoder_t) {
    reps = image_representation(model, x).data;
    protos = model.class_reps;
  } else {
    reps = x;
    protos = model.class_text;
  }
  const Index k = std::min(opts.skew_k, x.rows());
  for (Index c = 0; c < protos.rows(); ++c) {
    const std::string name = c < static_cast<Index>(class_names.size()) ? class_names[static_cast<std::size_t>(c)]
                                                                          : std::to_string(c);
    report.max_skew[name] = max_skew_at_k(cosine_scores(reps, protos.row(c).transpose()), *split.s, k);
  }
  const Representation z = model.encoder_t ? Representation{reps} : image_representation(model, x);
  report.dep_zy = dep_vs_labels(z, label_factor(*split.y));
  report.dep_zs = dep_vs_labels(z, label_factor(*split.s));
  return report;
}

std::vector<SweepRow> sweep(const io::Dataset& train_set, const io::Dataset& eval_set,
                            const TrainConfig& base, std::vector<double> taus,
                            std::vector<double> tau_zs, const EvalOptions& opts) {
  if (taus.empty() || tau_zs.empty()) throw ConfigError("pipeline", "sweep grid is empty");
  std::sort(taus.begin(), taus.end());
  std::sort(tau_zs.begin(), tau_zs.end());
  std::vector<SweepRow> rows;
  for (double tau : taus) {
    for (double tau_z : tau_zs) {
      SweepRow row;
      row.tau = tau;
      row.tau_z = tau_z;
      TrainConfig cfg = base;
      cfg.tau_i = cfg.tau_t = tau;
      cfg.tau_z = tau_z;
      const auto start = std::chrono::steady_clock::now();
      try {
        const TrainedModel model = train(train_set.data, cfg);
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const MetricsReport report = evaluate(model, eval_set.data, eval_set.class_names, opts);
        row.avg = report.groups.avg;
        row.wg = report.groups.wg;
        row.gap = report.groups.gap;
        row.eod = report.eod;
      } catch (const std::exception& e) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.avg = row.wg = row.gap = row.eod = nan;
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, const io::json& config_echo) {
  out << "# config: " << config_echo.dump() << '\n';
  out << "tau,tau_z,avg,wg,gap,eod,seconds\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.tau << ',' << r.tau_z << ',' << r.avg << ',' << r.wg << ',' << r.gap << ',' << r.eod << ','
        << r.seconds << '\n';
    if (!r.error.empty()) {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << "# error tau=" << r.tau << " tau_z=" << r.tau_z << ": " << msg << '\n';
    }
  }
}

}  // namespace kdebias
