#include "kdebias/synth.hpp"

#include <cmath>
#include <random>

#include "kdebias/data_io.hpp"

namespace kdebias::synth {

namespace {

std::mt19937_64 engine_for(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

// Haar-distributed orthonormal d x d matrix (QR of a Gaussian with the
// signs of R's diagonal folded into Q).
Matrix random_rotation(Index d, std::uint64_t seed) {
  auto engine = engine_for(seed, 11);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) g(i, j) = normal(engine);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR();
  for (Index j = 0; j < d; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace

void SynthSpec::validate() const {
  if (n < 1) throw ConfigError("synth", "n must be >= 1");
  if (d < 2) throw ConfigError("synth", "d must be >= 2");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("synth", "rho must lie in [0, 1]");
  if (!(signal_gap > 0.0) || !(bias_gap > 0.0)) throw ConfigError("synth", "gaps must be > 0");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("synth", "noise_sigma must be >= 0");
  if (!std::isfinite(prompt_leak)) throw ConfigError("synth", "prompt_leak must be finite");
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  auto engine = engine_for(spec.seed, 12);
  std::bernoulli_distribution half(0.5);
  std::bernoulli_distribution aligned(spec.rho);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);

  SynthData out;
  out.y.num_classes = 2;
  out.s.num_classes = 2;
  out.y.values.resize(static_cast<std::size_t>(spec.n));
  out.s.values.resize(static_cast<std::size_t>(spec.n));
  Matrix latent = Matrix::Zero(spec.n, spec.d);
  for (Index i = 0; i < spec.n; ++i) {
    int y = 0;
    int s = 0;
    if (spec.mode == CorrelationMode::spurious) {
      y = half(engine);
      s = aligned(engine) ? y : 1 - y;
    } else {
      s = half(engine);
      y = aligned(engine) ? s : 1 - s;
    }
    out.y.values[static_cast<std::size_t>(i)] = y;
    out.s.values[static_cast<std::size_t>(i)] = s;
    for (Index k = 0; k < spec.d; ++k) latent(i, k) = spec.noise_sigma > 0.0 ? noise(engine) : 0.0;
    latent(i, 0) += (y - 0.5) * spec.signal_gap;
    latent(i, 1) += (s - 0.5) * spec.bias_gap;
  }

  Matrix prompts = Matrix::Zero(2, spec.d);
  Matrix sensitive = Matrix::Zero(2, spec.d);
  for (int k = 0; k < 2; ++k) {
    const double sign = 2.0 * k - 1.0;
    prompts(k, 0) = sign;
    prompts(k, 1) = sign * spec.prompt_leak;
    sensitive(k, 1) = sign;
  }

  const Matrix q = random_rotation(spec.d, spec.geometry_seed);
  out.images = latent * q.transpose();
  out.class_text = prompts * q.transpose();
  out.sensitive_text = sensitive * q.transpose();
  return out;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, const SynthData& data,
                                    const std::string& split, bool normalize) {
  std::filesystem::create_directories(dir);
  io::write_npy(dir / "images.npy", data.images, io::NpyDtype::f32);
  io::write_npy(dir / "class_text.npy", data.class_text, io::NpyDtype::f32);
  io::write_npy(dir / "sensitive_text.npy", data.sensitive_text, io::NpyDtype::f32);
  io::CsvTable table;
  table.header = {"y", "s"};
  for (Index i = 0; i < data.y.size(); ++i)
    table.rows.push_back({std::to_string(data.y[i]), std::to_string(data.s[i])});
  io::write_csv(dir / "labels.csv", table);

  io::DatasetManifest m;
  m.split = split;
  m.n = data.images.rows();
  m.d = data.images.cols();
  m.normalize = normalize;
  m.image_embeddings = "images.npy";
  m.class_text_embeddings = "class_text.npy";
  m.sensitive_text_embeddings = "sensitive_text.npy";
  m.labels = "labels.csv";
  const auto path = dir / "manifest.json";
  io::write_manifest(path, m);
  return path;
}

}  // namespace kdebias::synth
