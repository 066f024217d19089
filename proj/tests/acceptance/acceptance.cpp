// Prints one PASS/FAIL line per acceptance criterion and exits nonzero if
// any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "alloc_audit.hpp"
#include "gen.hpp"
#include "kdebias/dependence.hpp"
#include "kdebias/metrics.hpp"
#include "kdebias/solver.hpp"
#include "kdebias/synth.hpp"
#include "kdebias/trainer.hpp"
#include "metric_fixtures.hpp"
#include "oracles.hpp"

using namespace kdebias;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

Outcome estimator_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  test::Gen g(101);
  int bad = 0;
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const Index n = g.uniform_int(4, 50);
    const Index r = g.uniform_int(1, 4);
    const int c = g.uniform_int(2, 3);
    const Representation zi{g.gaussian(n, r)};
    const Representation zt{g.gaussian(n, g.uniform_int(1, 4))};
    const LabelVector y = g.labels(n, c);
    const double a = dep_vs_labels(zi, label_factor(y));
    const double a_ref = oracle::dep_labels_by_covariance(zi.data, y);
    const double b = dep_cross(zi, zt);
    const double b_ref = oracle::dep_cross_by_covariance(zi.data, zt.data);
    worst = std::max({worst, std::abs(a - a_ref) / std::abs(a_ref), std::abs(b - b_ref) / std::abs(b_ref)});
    if (!rel_close(a, a_ref, 1e-8) || !rel_close(b, b_ref, 1e-8)) ++bad;
  }
  const double secs = seconds_since(t0);
  o.require(bad == 0, std::to_string(bad) + " instances outside 1e-8");
  o.require(secs < 10.0, "runtime");
  o.note(fmt("worst relative error %.2e, %.2f s", worst, secs));
  return o;
}

Outcome solver_certificate() {
  Outcome o;
  const auto t0 = Clock::now();
  test::Gen g(202);
  int eig_bad = 0;
  int beaten = 0;
  double worst_resid = 0.0;
  double worst_rel = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const Index n = g.uniform_int(10, 100);
    const Index dim = g.uniform_int(4, 20);
    const Index r = g.uniform_int(1, static_cast<int>(std::min<Index>(dim, 4)));
    KernelConfig kc;
    kc.rff_dim = dim;
    kc.seed = static_cast<std::uint64_t>(inst);
    const RffFactor lx = rff_factor(g.gaussian(n, 3), kc);
    const LabelVector y = g.labels(n, g.uniform_int(2, 3));
    const LabelVector s = g.labels(n, 2);
    const Matrix z_other = g.gaussian(n, 2);
    SolveSpec spec;
    spec.tau = g.uniform(0.0, 1.0);
    spec.tau_z = g.uniform(0.0, 1.0);
    spec.gamma = 1e-3;
    spec.r = r;
    spec.z_other = Representation{z_other};
    const SolveResult res = solve_encoder(lx, label_factor(y), label_factor(s), spec);
    const auto dense = oracle::dense_problem(lx.matrix, y, s, spec.tau, spec.tau_z, &z_other, spec.gamma);
    const Matrix& w = res.encoder.weights;
    const double attained = oracle::subproblem_value(dense, w);
    const double top = oracle::generalized_eigenvalues(dense).head(r).sum();
    worst_rel = std::max(worst_rel, std::abs(attained - top) / std::abs(top));
    if (!rel_close(attained, top, 1e-8)) ++eig_bad;
    const Matrix root = oracle::inverse_sqrt(dense.c);
    for (int trial = 0; trial < 10000; ++trial) {
      const Matrix wr = g.orthonormal_rows(r, dim) * root;
      if (oracle::subproblem_value(dense, wr) > attained + 1e-12 * std::abs(attained)) ++beaten;
    }
    worst_resid = std::max(worst_resid, oracle::constraint_residual(w, lx.matrix, spec.gamma));
  }
  const double secs = seconds_since(t0);
  o.require(eig_bad == 0, std::to_string(eig_bad) + " eigenvalue sums outside 1e-8");
  o.require(beaten == 0, std::to_string(beaten) + " random feasible encoders beat the optimum");
  o.require(worst_resid < 1e-6, "constraint residual");
  o.require(secs < 60.0, "runtime");
  o.note(fmt("worst relative gap %.2e, worst residual %.2e", worst_rel, worst_resid));
  o.note(fmt("%.2f s", secs));
  return o;
}

double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

Outcome rff_fidelity() {
  Outcome o;
  test::Gen g(303);
  const Index n = 200;
  const Matrix x = g.gaussian(n, 5);
  const double sigma = oracle::all_pairs_median(x);
  const Matrix exact = oracle::rbf_gram(x, x, sigma);
  const std::vector<Index> dims = {64, 256, 1024};
  const int seeds = 30;
  int decreasing = 0;
  std::vector<Matrix> sum(dims.size(), Matrix::Zero(n, n));
  std::vector<Matrix> sumsq(dims.size(), Matrix::Zero(n, n));
  for (int seed = 0; seed < seeds; ++seed) {
    double previous = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (std::size_t k = 0; k < dims.size(); ++k) {
      KernelConfig kc;
      kc.mode = BandwidthMode::explicit_value;
      kc.bandwidth = sigma;
      kc.rff_dim = dims[k];
      kc.seed = static_cast<std::uint64_t>(seed);
      const RffFactor f = rff_factor(x, kc);
      const Matrix err = f.matrix * f.matrix.transpose() - exact;
      const double mean_abs = err.cwiseAbs().mean();
      ok = ok && mean_abs < previous;
      previous = mean_abs;
      sum[k] += err;
      sumsq[k] += err.cwiseProduct(err);
    }
    if (ok) ++decreasing;
  }
  std::vector<double> logd, logsd;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const Matrix mean = sum[k] / seeds;
    const Matrix var = ((sumsq[k] - seeds * mean.cwiseProduct(mean)) / (seeds - 1)).cwiseMax(0.0);
    logd.push_back(std::log(static_cast<double>(dims[k])));
    logsd.push_back(std::log(var.cwiseSqrt().mean()));
  }
  const double slope = log_slope(logd, logsd);
  o.require(decreasing >= 28, "decreasing for only " + std::to_string(decreasing) + "/30 seeds");
  o.require(std::abs(slope + 0.5) <= 0.15, "slope");
  o.note("decreasing for " + std::to_string(decreasing) + "/30 seeds");
  o.note(fmt("per-pair std slope %.3f", slope));
  return o;
}

struct Split {
  synth::SynthData raw;
  TrainingData data;
};

Split make_split(synth::SynthSpec spec, std::uint64_t seed) {
  spec.seed = seed;
  Split out;
  out.raw = synth::generate(spec);
  out.data.images = EmbeddingMatrix{l2_normalize_rows(out.raw.images), true};
  out.data.class_text = EmbeddingMatrix{l2_normalize_rows(out.raw.class_text), true};
  out.data.sensitive_text = EmbeddingMatrix{l2_normalize_rows(out.raw.sensitive_text), true};
  out.data.y = out.raw.y;
  out.data.s = out.raw.s;
  return out;
}

struct Scores {
  double avg, wg, gap, eod;
};

Scores score(const LabelVector& yhat, const TrainingData& split) {
  const GroupReport g = group_accuracies(yhat, *split.y, *split.s);
  return {g.avg, g.wg, g.gap, eod(yhat, *split.y, *split.s)};
}

std::string describe(const char* name, const Scores& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s avg %.3f wg %.3f gap %.3f eod %.3f", name, s.avg, s.wg, s.gap, s.eod);
  return buf;
}

// Spurious-mode fixture: rho 0.95, bias_gap / signal_gap = 3, n = 5000,
// D = 512, m = 10, tau = tau_z = 0.7. Train and test draws share geometry.
struct SpuriousRun {
  Split train_split;
  Split test_split;
  TrainConfig cfg;
  TrainedModel model;
  double train_seconds = 0.0;
  bool shat_fixed = true;
  int observed = 0;
};

SpuriousRun spurious_run() {
  synth::SynthSpec spec;
  spec.mode = synth::CorrelationMode::spurious;
  spec.n = 5000;
  spec.d = 16;
  spec.rho = 0.95;
  spec.signal_gap = 1.0;
  spec.bias_gap = 3.0;
  spec.noise_sigma = 0.8;
  spec.prompt_leak = 0.2;
  spec.geometry_seed = 1;
  SpuriousRun run;
  run.train_split = make_split(spec, 1);
  run.test_split = make_split(spec, 1001);
  run.cfg.rff_dim = 512;
  run.cfg.iters = 10;
  run.cfg.tau_i = run.cfg.tau_t = run.cfg.tau_z = 0.7;
  std::vector<int> first_shat;
  const TrainObserver observer = [&](const TrainState& st) {
    if (run.observed++ == 0) first_shat = st.shat.values;
    else if (st.shat.values != first_shat) run.shat_fixed = false;
  };
  const auto t0 = Clock::now();
  run.model = train(run.train_split.data, run.cfg, observer);
  run.train_seconds = seconds_since(t0);
  return run;
}

Outcome spurious_debiasing(const SpuriousRun& run) {
  Outcome o;
  const TrainingData& test = run.test_split.data;
  const Scores zs = score(zero_shot_predict(test.images.data, test.class_text.data), test);
  const Scores tr = score(predict(run.model, test.images.data), test);
  // Pre-training probe: identity encoder on the raw image features.
  const RffFactor lx{run.model.encoder_i.feature_map().apply(run.train_split.data.images.data),
                     run.model.encoder_i.kernel, run.train_split.data.images.data.cols()};
  const double probe = hsic_from_factors(lx.matrix, label_factor(run.model.shat).matrix);
  const double final_dep = run.model.history.back().dep_zi_s;
  o.require(zs.gap >= 0.20, "zero-shot gap below 20 points");
  o.require(tr.gap <= 0.5 * zs.gap, "gap not halved");
  o.require(tr.wg - zs.wg >= 0.10, "worst-group gain below 10 points");
  o.require(final_dep < 0.05 * probe, "Dep(Z_I, S) not below 5% of the probe");
  o.require(run.train_seconds < 120.0, "runtime");
  o.note(describe("zero-shot", zs));
  o.note(describe("trained", tr));
  o.note(fmt("Dep(Z_I,S) %.4g vs probe %.4g", final_dep, probe));
  o.note(fmt("%.1f s", run.train_seconds));
  return o;
}

Outcome intrinsic_debiasing() {
  Outcome o;
  synth::SynthSpec spec;
  spec.mode = synth::CorrelationMode::intrinsic;
  spec.n = 5000;
  spec.d = 16;
  spec.rho = 0.7;
  spec.noise_sigma = 0.25;
  spec.geometry_seed = 1;
  const Split train_split = make_split(spec, 1);
  const Split test_split = make_split(spec, 1001);
  TrainConfig cfg;
  cfg.rff_dim = 512;
  cfg.iters = 10;
  cfg.supervised_y = true;
  cfg.tau_i = cfg.tau_t = cfg.tau_z = 0.7;
  TrainConfig plain = cfg;
  plain.tau_i = plain.tau_t = 0.0;
  const Scores full = score(predict(train(train_split.data, cfg), test_split.data.images.data), test_split.data);
  const Scores base = score(predict(train(train_split.data, plain), test_split.data.images.data), test_split.data);
  o.require(full.eod <= 0.02, "EOD above 0.02");
  o.require(base.avg - full.avg <= 0.05, "average accuracy fell more than 5 points");
  o.note(describe("tau=0.7", full));
  o.note(describe("tau=0", base));
  return o;
}

Outcome refinement_behavior(const SpuriousRun& run) {
  Outcome o;
  const TrainingData& data = run.train_split.data;
  const LabelVector zs = zero_shot_predict(data.images.data, data.class_text.data);
  double zs_agree = 0.0;
  for (Index i = 0; i < zs.size(); ++i) zs_agree += zs[i] == (*data.y)[i] ? 1.0 : 0.0;
  zs_agree /= static_cast<double>(zs.size());
  const double final_agree = run.model.history.back().agreement_truth;
  o.require(final_agree >= zs_agree, "pseudo-label agreement fell below zero-shot");
  o.require(run.shat_fixed, "pseudo S changed between steps");
  o.note(fmt("agreement zero-shot %.4f, after training %.4f", zs_agree, final_agree));
  o.note("S-hat identical across " + std::to_string(run.observed) + " observed steps");
  return o;
}

Outcome ablation(const SpuriousRun& run) {
  Outcome o;
  const TrainingData& test = run.test_split.data;
  const Scores full = score(predict(run.model, test.images.data), test);
  TrainConfig no_tau = run.cfg;
  no_tau.tau_i = no_tau.tau_t = 0.0;
  TrainConfig no_tau_z = run.cfg;
  no_tau_z.tau_z = 0.0;
  const Scores a = score(predict(train(run.train_split.data, no_tau), test.images.data), test);
  const Scores b = score(predict(train(run.train_split.data, no_tau_z), test.images.data), test);
  o.require(a.gap > full.gap && a.eod > full.eod, "tau = 0 not strictly worse on Gap and EOD");
  o.require(b.avg < full.avg, "tau_z = 0 average not lower");
  o.note(describe("full", full));
  o.note(describe("tau=0", a));
  o.note(describe("tau_z=0", b));
  return o;
}

Outcome complexity() {
  Outcome o;
  synth::SynthSpec spec;
  spec.n = 20000;
  spec.d = 16;
  spec.seed = 8;
  const Split split = make_split(spec, 8);
  TrainConfig cfg;
  cfg.rff_dim = 1000;
  cfg.iters = 10;
  test::audit_reset();
  const auto t0 = Clock::now();
  const TrainedModel model = train(split.data, cfg);
  const double secs = seconds_since(t0);
  const std::size_t largest = test::audit_largest();
  const std::size_t quadratic = static_cast<std::size_t>(spec.n) * static_cast<std::size_t>(spec.n) * sizeof(double);
  o.require(secs < 60.0, "runtime");
  o.require(largest < quadratic, "an n x n allocation was recorded");
  o.note(fmt("%.1f s, %.0f history entries", secs, static_cast<double>(model.history.size())));
  o.note(fmt("largest allocation %.1f MB vs n^2 doubles %.0f MB", static_cast<double>(largest) / 1e6,
             static_cast<double>(quadratic) / 1e6));
  return o;
}

Outcome metric_fixtures() {
  Outcome o;
  int bad = 0;
  const fixtures::EodCase e;
  const GroupReport ge = group_accuracies(e.yhat, e.y, e.s);
  bad += eod(e.yhat, e.y, e.s) != e.eod;
  bad += ge.avg != e.avg || ge.wg != e.wg || ge.gap != e.gap;
  for (std::size_t k = 0; k < ge.groups.size(); ++k) bad += ge.groups[k].accuracy != e.cell_acc[k];
  const fixtures::FourCellCase f;
  const GroupReport gf = group_accuracies(f.yhat, f.y, f.s);
  bad += eod(f.yhat, f.y, f.s) != f.eod;
  bad += gf.avg != f.avg || gf.wg != f.wg || gf.gap != f.gap || gf.groups.size() != 4;
  for (std::size_t k = 0; k < gf.groups.size(); ++k)
    bad += gf.groups[k].count != f.cell_count[k] || gf.groups[k].accuracy != f.cell_acc[k];
  const fixtures::SkewCase sk;
  const Vector scores = Eigen::Map<const Vector>(sk.scores.data(), static_cast<Index>(sk.scores.size()));
  for (const auto& [k, expected] : sk.expected) bad += max_skew_at_k(scores, sk.s, k) != expected;
  o.require(bad == 0, std::to_string(bad) + " mismatches");
  o.note("EOD, group accuracies and MaxSkew@k fixtures");
  return o;
}

}  // namespace

int main() {
  int failed = 0;
  const auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  };
  report(1, "estimator equivalence", estimator_equivalence());
  report(2, "eigen certificate", solver_certificate());
  report(3, "rff fidelity", rff_fidelity());
  const SpuriousRun run = spurious_run();
  report(4, "spurious debiasing", spurious_debiasing(run));
  report(5, "intrinsic debiasing", intrinsic_debiasing());
  report(6, "pseudo-label refinement", refinement_behavior(run));
  report(7, "ablation direction", ablation(run));
  report(8, "complexity", complexity());
  report(9, "metric fixtures", metric_fixtures());
  std::printf("%d of 9 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
