#pragma once

// On-disk formats: NPY v1.0 embedding matrices, CSV label tables, JSON
// dataset manifests and reports, and the binary model container.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kdebias/metrics.hpp"
#include "kdebias/trainer.hpp"

namespace kdebias::io {

using nlohmann::json;
namespace fs = std::filesystem;

enum class NpyDtype { f32, f64 };

// 2-D, C-order, little-endian float32/float64 only. float32 is widened.
Matrix read_npy(const fs::path& path, NpyDtype* stored = nullptr);
void write_npy(const fs::path& path, const Eigen::Ref<const Matrix>& m, NpyDtype dtype = NpyDtype::f32);

EmbeddingMatrix load_embeddings(const fs::path& path, std::optional<Index> expect_dim = std::nullopt,
                                bool normalize = true);

// RFC-4180 subset: comma separator, double-quoted fields with "" escapes,
// LF or CRLF line ends. The first record is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws InputError if absent
};

CsvTable read_csv(const fs::path& path);
void write_csv(const fs::path& path, const CsvTable& table);

struct LoadedLabels {
  LabelVector labels;
  std::vector<std::string> class_names;  // index -> original value
};

// With `classes`, values map to their position in that list. Otherwise a
// column of non-negative integers is used as class indices directly and any
// other column is indexed by order of first appearance.
LoadedLabels load_labels(const fs::path& path, const std::string& column,
                         const std::vector<std::string>* classes = nullptr);

struct DatasetManifest {
  std::string split = "train";
  Index n = 0;
  Index d = 0;
  bool normalize = true;
  fs::path image_embeddings;
  fs::path class_text_embeddings;
  std::optional<fs::path> sensitive_text_embeddings;
  std::optional<fs::path> labels;
  std::string target_column = "y";
  std::string sensitive_column = "s";
  std::vector<std::string> class_names;      // optional explicit class lists
  std::vector<std::string> sensitive_names;
  fs::path base_dir;  // directory the relative paths resolve against

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }
};

DatasetManifest read_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const DatasetManifest& manifest);
json manifest_to_json(const DatasetManifest& manifest);

struct Dataset {
  DatasetManifest manifest;
  TrainingData data;
  std::vector<std::string> class_names;
  std::vector<std::string> sensitive_names;
};

// Loads every referenced file and checks all shapes against the manifest.
// Any inconsistency throws before returning.
Dataset load_dataset(const fs::path& manifest_path);

// Model container: "KDBS", u32 version, u64 metadata length, JSON metadata,
// then the float64 arrays listed in the metadata.
inline constexpr std::uint32_t kModelVersion = 1;
void save_model(const fs::path& path, const TrainedModel& model);
TrainedModel load_model(const fs::path& path);

json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const json& j);
json to_json(const IterationRecord& rec);
json to_json(const MetricsReport& report);

void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

}  // namespace kdebias::io
