#pragma once

// Seeded two-axis Gaussian datasets with a controllable Y-S correlation.
//
// Latent image features are (y - 1/2) g_Y e1 + (s - 1/2) g_S e2 + N(0, sigma^2 I),
// rotated into d dimensions by a seeded orthonormal map. Class prompts lie
// along e1 with a small component along e2 (prompt_leak), which makes raw
// zero-shot prediction lean on the sensitive axis; sensitive prompts lie
// along e2.

#include <cstdint>
#include <filesystem>
#include <string>

#include "kdebias/common.hpp"

namespace kdebias::synth {

enum class CorrelationMode { spurious, intrinsic };

struct SynthSpec {
  Index n = 5000;
  Index d = 16;
  CorrelationMode mode = CorrelationMode::spurious;
  double rho = 0.95;          // P(s == y)
  double signal_gap = 1.0;    // distance between class means along e1
  double bias_gap = 3.0;      // distance between sensitive-group means along e2
  double noise_sigma = 0.8;
  double prompt_leak = 0.2;   // e2 weight of the class prompts relative to e1
  std::uint64_t seed = 0;           // sample draws
  std::uint64_t geometry_seed = 0;  // rotation; splits sharing it share geometry

  void validate() const;
};

struct SynthData {
  Matrix images;          // n x d
  Matrix class_text;      // 2 x d
  Matrix sensitive_text;  // 2 x d
  LabelVector y;
  LabelVector s;
};

// Spurious: y ~ Bern(1/2), s = y with probability rho.
// Intrinsic: s ~ Bern(1/2), P(y = s | s) = rho.
SynthData generate(const SynthSpec& spec);

// Writes images.npy, class_text.npy, sensitive_text.npy, labels.csv and
// manifest.json into `dir`; returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const SynthData& data,
                                    const std::string& split = "train", bool normalize = true);

}  // namespace kdebias::synth
