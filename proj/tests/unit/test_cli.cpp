#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "kdebias/data_io.hpp"
#include "temp_dir.hpp"

using namespace kdebias;
using nlohmann::json;

namespace {

struct Run {
  int status;
  std::string out;
};

// Runs the CLI through the shell, capturing stdout and stderr together.
Run cli(const std::string& args) {
  const std::string cmd = std::string(KDEBIAS_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, got);
  const int raw = pclose(pipe);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::string make_split(const test::TempDir& dir, const std::string& split, int seed) {
  const Run r = cli("synth --out " + q(dir.path() / split) + " --n 300 --d 6 --seed " + std::to_string(seed) +
                    " --geometry-seed 5 --split " + split);
  REQUIRE_MESSAGE(r.status == 0, r.out);
  return trim(r.out);
}

const std::string kSmall = " --rff-dim 64 --iters 2";

}  // namespace

TEST_CASE("synth, train, eval and predict end to end") {
  test::TempDir dir("cli_e2e");
  const std::string train_m = make_split(dir, "train", 1);
  const std::string test_m = make_split(dir, "test", 2);
  CHECK(std::filesystem::exists(train_m));

  const auto model = dir / "model.kdb";
  const auto record = dir / "run.json";
  Run r = cli("train --manifest " + q(train_m) + " --model " + q(model) + " --record " + q(record) + kSmall);
  REQUIRE_MESSAGE(r.status == 0, r.out);
  CHECK(std::filesystem::exists(model));
  const json rec = io::read_json(record);
  for (const char* key : {"config", "timing", "history", "metrics", "artifacts"}) CHECK(rec.contains(key));
  CHECK(rec["history"].size() == 3);
  CHECK(rec["timing"]["train_seconds"].get<double>() >= 0.0);
  CHECK(rec["config"]["train"]["iters"] == 2);

  const auto rep_train = dir / "train.json";
  const auto rep_test = dir / "test.json";
  r = cli("eval --model " + q(model) + " --manifest " + q(train_m) + " --out " + q(rep_train));
  REQUIRE_MESSAGE(r.status == 0, r.out);
  r = cli("eval --model " + q(model) + " --manifest " + q(test_m) + " --out " + q(rep_test) + " --skew-k 10");
  REQUIRE_MESSAGE(r.status == 0, r.out);
  const json a = io::read_json(rep_train);
  const json b = io::read_json(rep_test);
  CHECK(a["config"]["split"] == "train");
  CHECK(b["config"]["split"] == "test");
  CHECK(b["config"]["skew_k"] == 10);
  CHECK(a["avg"] != b["avg"]);
  for (const json* j : {&a, &b}) {
    for (const char* key : {"eod", "avg", "wg", "gap", "groups", "max_skew", "dep_zy", "dep_zs"})
      CHECK((*j).contains(key));
    CHECK((*j)["avg"].get<double>() >= (*j)["wg"].get<double>());
    CHECK((*j)["groups"].size() == 4);
  }

  const auto preds = dir / "pred.csv";
  r = cli("predict --model " + q(model) + " --manifest " + q(test_m) + " --out " + q(preds));
  REQUIRE_MESSAGE(r.status == 0, r.out);
  const io::CsvTable table = io::read_csv(preds);
  CHECK(table.header == std::vector<std::string>{"row", "yhat", "class"});
  CHECK(table.rows.size() == 300);
}

TEST_CASE("zero iterations leave a single history entry") {
  test::TempDir dir("cli_m0");
  const std::string m = make_split(dir, "train", 3);
  const auto record = dir / "run.json";
  const Run r = cli("train --manifest " + q(m) + " --model " + q(dir / "m.kdb") + " --record " + q(record) +
                    " --rff-dim 32 --iters 0");
  REQUIRE_MESSAGE(r.status == 0, r.out);
  CHECK(io::read_json(record)["history"].size() == 1);
}

TEST_CASE("sweep writes the config echo and header") {
  test::TempDir dir("cli_sweep");
  const std::string m = make_split(dir, "train", 4);
  const auto out = dir / "sweep.csv";
  Run r = cli("sweep --manifest " + q(m) + " --taus 0,0.5 --tau-zs 0.5 --out " + q(out) + kSmall);
  REQUIRE_MESSAGE(r.status == 0, r.out);
  const auto lines = read_lines(out);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0].rfind("# config: {", 0) == 0);
  CHECK(json::parse(lines[0].substr(10))["taus"] == "0,0.5");
  CHECK(lines[1] == "tau,tau_z,avg,wg,gap,eod,seconds");
  CHECK(lines[2].rfind("0,0.5,", 0) == 0);
  CHECK(lines[3].rfind("0.5,0.5,", 0) == 0);

  r = cli("sweep --manifest " + q(m) + " --taus -1,0.5 --tau-zs 0.5 --out " + q(out) + kSmall);
  CHECK(r.status == 2);
  CHECK(r.out.find("failed") != std::string::npos);
  CHECK(read_lines(out).size() == 5);
}

TEST_CASE("hsic reports both label dependences") {
  test::TempDir dir("cli_hsic");
  const std::string m = make_split(dir, "train", 5);
  const Run r = cli("hsic --manifest " + q(m) + " --rff-dim 64");
  REQUIRE_MESSAGE(r.status == 0, r.out);
  const json j = json::parse(r.out);
  CHECK(j["hsic_x_y"].get<double>() > 0.0);
  CHECK(j["hsic_x_s"].get<double>() > 0.0);
}

TEST_CASE("errors exit nonzero with a message") {
  test::TempDir dir("cli_err");
  Run r = cli("train --manifest " + q(dir / "missing.json") + " --model " + q(dir / "m.kdb"));
  CHECK(r.status != 0);
  CHECK(r.out.find("error:") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "m.kdb"));

  const std::string m = make_split(dir, "train", 6);
  r = cli("train --manifest " + q(m) + " --model " + q(dir / "m.kdb") + " --tau-z -1");
  CHECK(r.status != 0);
  CHECK(r.out.find("error:") != std::string::npos);

  r = cli("eval --model " + q(dir / "nope.kdb") + " --manifest " + q(m));
  CHECK(r.status != 0);
  CHECK(r.out.find("error:") != std::string::npos);

  r = cli("frobnicate");
  CHECK(r.status != 0);
}
