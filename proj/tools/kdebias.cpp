// kdebias command line: synth, train, predict, eval, sweep, hsic.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "kdebias/data_io.hpp"
#include "kdebias/dependence.hpp"
#include "kdebias/pipeline.hpp"
#include "kdebias/synth.hpp"

namespace {

using namespace kdebias;
using io::json;

struct TrainFlags {
  TrainConfig cfg;
  double bandwidth_i = 0.0;
  double bandwidth_t = 0.0;

  void add(CLI::App* app) {
    app->add_option("--tau-i", cfg.tau_i, "Image-side sensitive penalty")->capture_default_str();
    app->add_option("--tau-t", cfg.tau_t, "Text-side sensitive penalty")->capture_default_str();
    app->add_option("--tau-z", cfg.tau_z, "Image/text alignment weight")->capture_default_str();
    app->add_option("--gamma", cfg.gamma, "Constraint regularizer")->capture_default_str();
    app->add_option("--rff-dim", cfg.rff_dim, "Random Fourier feature dimension D")->capture_default_str();
    app->add_option("--r", cfg.r, "Output dimension (0: classes - 1)")->capture_default_str();
    app->add_option("--iters", cfg.iters, "Alternating iterations m")->capture_default_str();
    app->add_option("--seed", cfg.seed, "Seed for feature draws and sampling")->capture_default_str();
    app->add_flag("--supervised-y", cfg.supervised_y, "Use ground-truth target labels");
    app->add_flag("--supervised-s", cfg.supervised_s, "Use ground-truth sensitive labels");
    app->add_flag("--balance", cfg.balance_presample, "Class-balanced pre-sampling on zero-shot labels");
    app->add_option("--bandwidth-i", bandwidth_i, "Explicit image RBF bandwidth (default: median heuristic)");
    app->add_option("--bandwidth-t", bandwidth_t, "Explicit text RBF bandwidth (default: median heuristic)");
  }

  TrainConfig resolved() const {
    TrainConfig out = cfg;
    if (bandwidth_i > 0.0) out.bandwidth_i = bandwidth_i;
    if (bandwidth_t > 0.0) out.bandwidth_t = bandwidth_t;
    out.validate();
    return out;
  }
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ConfigError("cli", "not a number in list: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("cli", "empty list '" + text + "'");
  return out;
}

int cmd_synth(const std::string& out_dir, synth::SynthSpec spec, const std::string& mode,
              const std::string& split, bool raw) {
  if (mode == "spurious") {
    spec.mode = synth::CorrelationMode::spurious;
  } else if (mode == "intrinsic") {
    spec.mode = synth::CorrelationMode::intrinsic;
  } else {
    throw ConfigError("cli", "mode must be spurious or intrinsic");
  }
  const auto data = synth::generate(spec);
  const auto manifest = synth::write_dataset(out_dir, data, split, !raw);
  std::cout << manifest.string() << '\n';
  return 0;
}

int cmd_train(const std::string& manifest, const std::string& model_path, const std::string& record_path,
              const TrainFlags& flags) {
  const TrainConfig cfg = flags.resolved();
  const io::Dataset ds = io::load_dataset(manifest);
  const auto start = std::chrono::steady_clock::now();
  const TrainedModel model = train(ds.data, cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  io::save_model(model_path, model);

  json record;
  record["config"] = {{"train", io::to_json(cfg)}, {"manifest", manifest}, {"dataset", io::manifest_to_json(ds.manifest)}};
  record["timing"] = {{"train_seconds", seconds}};
  record["history"] = json::array();
  for (const auto& rec : model.history) record["history"].push_back(io::to_json(rec));
  record["metrics"] = (ds.data.y && ds.data.s) ? io::to_json(evaluate(model, ds.data, ds.class_names)) : json(nullptr);
  record["artifacts"] = {{"model", model_path}, {"record", record_path}};
  io::write_json(record_path, record);
  // Confirm the model reloads before reporting success.
  (void)io::load_model(model_path);
  std::cout << "trained in " << seconds << " s, " << model.history.size() << " history entries\n";
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& manifest, const std::string& out) {
  const TrainedModel model = io::load_model(model_path);
  const io::Dataset ds = io::load_dataset(manifest);
  const LabelVector yhat = predict(model, ds.data.images.data);
  io::CsvTable table;
  table.header = {"row", "yhat", "class"};
  for (Index i = 0; i < yhat.size(); ++i) {
    const auto k = static_cast<std::size_t>(yhat[i]);
    table.rows.push_back({std::to_string(i), std::to_string(yhat[i]),
                          k < ds.class_names.size() ? ds.class_names[k] : std::to_string(k)});
  }
  io::write_csv(out, table);
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& manifest, const std::string& out,
             const EvalOptions& opts) {
  const TrainedModel model = io::load_model(model_path);
  const io::Dataset ds = io::load_dataset(manifest);
  const MetricsReport report = evaluate(model, ds.data, ds.class_names, opts);
  json j = io::to_json(report);
  j["config"] = {{"train", io::to_json(model.config)},
                 {"model", model_path},
                 {"manifest", manifest},
                 {"split", ds.manifest.split},
                 {"positive", opts.positive},
                 {"skew_k", opts.skew_k}};
  io::write_json(out, j);
  std::cout << "avg " << report.groups.avg << " wg " << report.groups.wg << " gap " << report.groups.gap
            << " eod " << report.eod << '\n';
  return 0;
}

int cmd_sweep(const std::string& manifest, const std::string& eval_manifest, const std::string& taus,
              const std::string& tau_zs, const std::string& out, const TrainFlags& flags,
              const EvalOptions& opts) {
  const TrainConfig cfg = flags.resolved();
  const io::Dataset train_set = io::load_dataset(manifest);
  const io::Dataset eval_set = eval_manifest.empty() ? train_set : io::load_dataset(eval_manifest);
  const auto rows = sweep(train_set, eval_set, cfg, parse_list(taus), parse_list(tau_zs), opts);
  json echo = {{"train", io::to_json(cfg)},
               {"manifest", manifest},
               {"eval_manifest", eval_manifest.empty() ? manifest : eval_manifest},
               {"taus", taus},
               {"tau_zs", tau_zs},
               {"positive", opts.positive}};
  std::ofstream file(out);
  if (!file) throw InputError("cli", "cannot write " + out);
  write_sweep_csv(file, rows, echo);
  file.close();
  if (!file) throw InputError("cli", "failed writing " + out);
  int failed = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      ++failed;
      std::cerr << "cell tau=" << r.tau << " tau_z=" << r.tau_z << " failed: " << r.error << '\n';
    }
  }
  return failed == 0 ? 0 : 2;
}

int cmd_hsic(const std::string& manifest, Index rff_dim, std::uint64_t seed) {
  const io::Dataset ds = io::load_dataset(manifest);
  KernelConfig kx;
  kx.rff_dim = rff_dim;
  kx.seed = seed;
  const RffFactor lx = rff_factor(ds.data.images.data, kx);
  json j;
  j["config"] = {{"manifest", manifest}, {"rff_dim", rff_dim}, {"seed", seed}};
  if (ds.data.y) j["hsic_x_y"] = hsic_from_factors(lx.matrix, label_factor(*ds.data.y).matrix);
  if (ds.data.s) j["hsic_x_s"] = hsic_from_factors(lx.matrix, label_factor(*ds.data.s).matrix);
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel debiasing of paired image/text embeddings"};
  app.require_subcommand(1);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset (NPY + CSV + manifest)");
  std::string synth_out;
  std::string synth_mode = "spurious";
  std::string synth_split = "train";
  bool synth_raw = false;
  synth::SynthSpec spec;
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--n", spec.n)->capture_default_str();
  synth_cmd->add_option("--d", spec.d)->capture_default_str();
  synth_cmd->add_option("--mode", synth_mode, "spurious or intrinsic")->capture_default_str();
  synth_cmd->add_option("--rho", spec.rho, "P(s == y)")->capture_default_str();
  synth_cmd->add_option("--signal-gap", spec.signal_gap)->capture_default_str();
  synth_cmd->add_option("--bias-gap", spec.bias_gap)->capture_default_str();
  synth_cmd->add_option("--noise", spec.noise_sigma)->capture_default_str();
  synth_cmd->add_option("--prompt-leak", spec.prompt_leak)->capture_default_str();
  synth_cmd->add_option("--seed", spec.seed, "Sample seed")->capture_default_str();
  synth_cmd->add_option("--geometry-seed", spec.geometry_seed, "Rotation seed shared by all splits")->capture_default_str();
  synth_cmd->add_option("--split", synth_split)->capture_default_str();
  synth_cmd->add_flag("--no-normalize", synth_raw, "Record normalize=false in the manifest");

  auto* train_cmd = app.add_subcommand("train", "Train encoders and write a model and run record");
  std::string train_manifest;
  std::string model_path = "model.kdbs";
  std::string record_path = "run.json";
  TrainFlags train_flags;
  train_cmd->add_option("--manifest", train_manifest)->required();
  train_cmd->add_option("--model", model_path)->capture_default_str();
  train_cmd->add_option("--record", record_path)->capture_default_str();
  train_flags.add(train_cmd);

  auto* predict_cmd = app.add_subcommand("predict", "Predict classes for a dataset");
  std::string predict_model;
  std::string predict_manifest;
  std::string predict_out = "predictions.csv";
  predict_cmd->add_option("--model", predict_model)->required();
  predict_cmd->add_option("--manifest", predict_manifest)->required();
  predict_cmd->add_option("--out", predict_out)->capture_default_str();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model against ground-truth labels");
  std::string eval_model;
  std::string eval_manifest;
  std::string eval_out = "report.json";
  EvalOptions eval_opts;
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--manifest", eval_manifest)->required();
  eval_cmd->add_option("--out", eval_out)->capture_default_str();
  eval_cmd->add_option("--positive", eval_opts.positive, "EOD positive class")->capture_default_str();
  eval_cmd->add_option("--skew-k", eval_opts.skew_k, "k for MaxSkew@k")->capture_default_str();

  auto* sweep_cmd = app.add_subcommand("sweep", "Grid over tau and tau_z; writes a CSV");
  std::string sweep_manifest;
  std::string sweep_eval;
  std::string sweep_taus = "0,0.35,0.7";
  std::string sweep_tau_zs = "0,0.35,0.7";
  std::string sweep_out = "sweep.csv";
  TrainFlags sweep_flags;
  EvalOptions sweep_opts;
  sweep_cmd->add_option("--manifest", sweep_manifest, "Training split")->required();
  sweep_cmd->add_option("--eval-manifest", sweep_eval, "Evaluation split (default: training split)");
  sweep_cmd->add_option("--taus", sweep_taus, "Comma-separated tau values")->capture_default_str();
  sweep_cmd->add_option("--tau-zs", sweep_tau_zs, "Comma-separated tau_z values")->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out)->capture_default_str();
  sweep_cmd->add_option("--positive", sweep_opts.positive)->capture_default_str();
  sweep_flags.add(sweep_cmd);

  auto* hsic_cmd = app.add_subcommand("hsic", "HSIC between image embeddings and the labels");
  std::string hsic_manifest;
  Index hsic_dim = 1024;
  std::uint64_t hsic_seed = 0;
  hsic_cmd->add_option("--manifest", hsic_manifest)->required();
  hsic_cmd->add_option("--rff-dim", hsic_dim)->capture_default_str();
  hsic_cmd->add_option("--seed", hsic_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) return cmd_synth(synth_out, spec, synth_mode, synth_split, synth_raw);
    if (*train_cmd) return cmd_train(train_manifest, model_path, record_path, train_flags);
    if (*predict_cmd) return cmd_predict(predict_model, predict_manifest, predict_out);
    if (*eval_cmd) return cmd_eval(eval_model, eval_manifest, eval_out, eval_opts);
    if (*sweep_cmd) return cmd_sweep(sweep_manifest, sweep_eval, sweep_taus, sweep_tau_zs, sweep_out, sweep_flags, sweep_opts);
    if (*hsic_cmd) return cmd_hsic(hsic_manifest, hsic_dim, hsic_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
