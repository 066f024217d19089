#include "kdebias/data_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace kdebias::io {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace {

constexpr char kNpyMagic[] = "\x93NUMPY";
constexpr char kModelMagic[4] = {'K', 'D', 'B', 'S'};

std::string read_file(const fs::path& path, const char* module) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(module, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path, const char* module) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(module, "cannot write " + path.string());
  return out;
}

[[noreturn]] void npy_fail(const fs::path& path, std::size_t offset, const std::string& what) {
  throw FormatError("data-io", path.string() + ": " + what + " (byte offset " + std::to_string(offset) + ")");
}

// Value text following 'key': in a NPY header dict.
std::string header_value(const std::string& header, const std::string& key, const fs::path& path) {
  const std::string needle = "'" + key + "'";
  const auto at = header.find(needle);
  if (at == std::string::npos) npy_fail(path, 10, "header lacks key " + key);
  auto pos = header.find(':', at + needle.size());
  if (pos == std::string::npos) npy_fail(path, 10 + at, "malformed header entry " + key);
  ++pos;
  while (pos < header.size() && header[pos] == ' ') ++pos;
  std::size_t end = pos;
  if (pos < header.size() && header[pos] == '(') {
    end = header.find(')', pos);
    if (end == std::string::npos) npy_fail(path, 10 + pos, "unterminated shape tuple");
    return header.substr(pos, end - pos + 1);
  }
  if (pos < header.size() && header[pos] == '\'') {
    end = header.find('\'', pos + 1);
    if (end == std::string::npos) npy_fail(path, 10 + pos, "unterminated string");
    return header.substr(pos + 1, end - pos - 1);
  }
  while (end < header.size() && header[end] != ',' && header[end] != '}') ++end;
  return header.substr(pos, end - pos);
}

std::vector<long long> parse_shape(const std::string& tuple, const fs::path& path) {
  std::vector<long long> dims;
  std::string body = tuple.substr(1, tuple.size() - 2);
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(' ');
    if (first == std::string::npos) continue;
    const auto last = item.find_last_not_of(' ');
    const std::string token = item.substr(first, last - first + 1);
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size() || v < 0) npy_fail(path, 10, "bad shape entry '" + token + "'");
    dims.push_back(v);
  }
  return dims;
}

double num_or_nan(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json kernel_json(const KernelConfig& k) {
  return {{"bandwidth", k.bandwidth},
          {"rff_dim", k.rff_dim},
          {"seed", k.seed},
          {"mode", k.mode == BandwidthMode::explicit_value ? "explicit" : "median_heuristic"},
          {"median_subsample", k.median_subsample}};
}

KernelConfig kernel_from_json(const json& j) {
  KernelConfig k;
  k.bandwidth = j.at("bandwidth").get<double>();
  k.rff_dim = j.at("rff_dim").get<Index>();
  k.seed = j.at("seed").get<std::uint64_t>();
  k.mode = j.at("mode").get<std::string>() == "explicit" ? BandwidthMode::explicit_value
                                                        : BandwidthMode::median_heuristic;
  k.median_subsample = j.at("median_subsample").get<Index>();
  return k;
}

}  // namespace

// --- NPY -------------------------------------------------------------------

Matrix read_npy(const fs::path& path, NpyDtype* stored) {
  const std::string bytes = read_file(path, "data-io");
  if (bytes.size() < 10) npy_fail(path, bytes.size(), "file too short for a NPY header");
  if (bytes.compare(0, 6, kNpyMagic, 6) != 0) npy_fail(path, 0, "bad magic (not a NPY file)");
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  if (major != 1 || minor != 0) {
    npy_fail(path, 6, "unsupported NPY version " + std::to_string(major) + "." + std::to_string(minor) +
                          " (only 1.0 is read)");
  }
  const std::size_t header_len = static_cast<unsigned char>(bytes[8]) |
                                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < 10 + header_len) npy_fail(path, bytes.size(), "truncated header");
  const std::string header = bytes.substr(10, header_len);

  const std::string descr = header_value(header, "descr", path);
  std::size_t item = 0;
  NpyDtype dtype;
  if (descr == "<f4") {
    dtype = NpyDtype::f32;
    item = 4;
  } else if (descr == "<f8") {
    dtype = NpyDtype::f64;
    item = 8;
  } else {
    npy_fail(path, 10, "unsupported dtype '" + descr + "' (expected <f4 or <f8)");
  }
  const std::string fortran = header_value(header, "fortran_order", path);
  if (fortran.find("False") == std::string::npos) npy_fail(path, 10, "Fortran-order arrays are not supported");
  const auto shape = parse_shape(header_value(header, "shape", path), path);
  if (shape.size() != 2) npy_fail(path, 10, "expected a 2-D array, got rank " + std::to_string(shape.size()));

  const auto rows = static_cast<std::size_t>(shape[0]);
  const auto cols = static_cast<std::size_t>(shape[1]);
  const std::size_t offset = 10 + header_len;
  const std::size_t payload = rows * cols * item;
  if (bytes.size() - offset < payload) {
    npy_fail(path, bytes.size(), "truncated payload: expected " + std::to_string(payload) + " bytes, found " +
                                     std::to_string(bytes.size() - offset));
  }
  if (bytes.size() - offset > payload) npy_fail(path, offset + payload, "trailing bytes after payload");

  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  const char* src = bytes.data() + offset;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t k = (i * cols + j) * item;
      if (dtype == NpyDtype::f32) {
        float v;
        std::memcpy(&v, src + k, 4);
        m(static_cast<Index>(i), static_cast<Index>(j)) = static_cast<double>(v);
      } else {
        double v;
        std::memcpy(&v, src + k, 8);
        m(static_cast<Index>(i), static_cast<Index>(j)) = v;
      }
    }
  }
  if (stored) *stored = dtype;
  return m;
}

void write_npy(const fs::path& path, const Eigen::Ref<const Matrix>& m, NpyDtype dtype) {
  std::string header = std::string("{'descr': '") + (dtype == NpyDtype::f32 ? "<f4" : "<f8") +
                       "', 'fortran_order': False, 'shape': (" + std::to_string(m.rows()) + ", " +
                       std::to_string(m.cols()) + "), }";
  // Pad so the payload starts on a 64-byte boundary; the header ends in '\n'.
  const std::size_t total = 10 + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header.push_back('\n');

  auto out = open_out(path, "data-io");
  out.write(kNpyMagic, 6);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const std::uint16_t len = static_cast<std::uint16_t>(header.size());
  out.write(reinterpret_cast<const char*>(&len), 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (dtype == NpyDtype::f32) {
        const float v = static_cast<float>(m(i, j));
        out.write(reinterpret_cast<const char*>(&v), 4);
      } else {
        const double v = m(i, j);
        out.write(reinterpret_cast<const char*>(&v), 8);
      }
    }
  }
  if (!out) throw InputError("data-io", "failed writing " + path.string());
}

EmbeddingMatrix load_embeddings(const fs::path& path, std::optional<Index> expect_dim, bool normalize) {
  Matrix m = read_npy(path);
  if (m.cols() < 1) throw FormatError("data-io", path.string() + ": embedding dimension is 0");
  if (expect_dim && m.cols() != *expect_dim) {
    throw DimensionError("data-io", path.string() + ": expected dimension " + std::to_string(*expect_dim) +
                                        ", file has " + std::to_string(m.cols()));
  }
  require_finite(m, "data-io", path.string());
  EmbeddingMatrix out;
  out.normalized = normalize;
  out.data = normalize ? l2_normalize_rows(m) : std::move(m);
  return out;
}

// --- CSV -------------------------------------------------------------------

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return k;
  throw InputError("data-io", "label table has no column '" + name + "'");
}

CsvTable read_csv(const fs::path& path) {
  const std::string text = read_file(path, "data-io");
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // A blank line yields a single empty field; skip it.
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      continue;
    } else if (ch == '\n') {
      end_record();
      ++line;
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
  if (quoted) throw FormatError("data-io", path.string() + ": unterminated quoted field at line " + std::to_string(line));
  if (field_started || !field.empty() || !record.empty()) end_record();
  if (records.empty()) throw FormatError("data-io", path.string() + ": missing header row");

  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw FormatError("data-io", path.string() + ": record " + std::to_string(r + 1) + " has " +
                                       std::to_string(records[r].size()) + " fields, header has " +
                                       std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

void write_csv(const fs::path& path, const CsvTable& table) {
  auto out = open_out(path, "data-io");
  auto emit = [&](const std::vector<std::string>& rec) {
    for (std::size_t k = 0; k < rec.size(); ++k) {
      if (k) out << ',';
      const std::string& f = rec[k];
      if (f.find_first_of(",\"\r\n") == std::string::npos) {
        out << f;
      } else {
        out << '"';
        for (char ch : f) {
          if (ch == '"') out << '"';
          out << ch;
        }
        out << '"';
      }
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
}

LoadedLabels load_labels(const fs::path& path, const std::string& column,
                         const std::vector<std::string>* classes) {
  const CsvTable table = read_csv(path);
  const std::size_t col = table.column(column);
  if (table.rows.empty()) throw InputError("data-io", path.string() + ": label table has no rows");
  LoadedLabels out;
  std::vector<int> values;
  values.reserve(table.rows.size());

  if (classes) {
    std::map<std::string, int> index;
    for (std::size_t k = 0; k < classes->size(); ++k) index[(*classes)[k]] = static_cast<int>(k);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto it = index.find(table.rows[r][col]);
      if (it == index.end()) {
        throw InputError("data-io", path.string() + ": value '" + table.rows[r][col] + "' in row " +
                                        std::to_string(r + 1) + " is not a declared class");
      }
      values.push_back(it->second);
    }
    out.labels.values = std::move(values);
    out.labels.num_classes = static_cast<int>(classes->size());
    out.class_names = *classes;
    return out;
  }

  bool all_ints = true;
  for (const auto& row : table.rows) {
    const std::string& v = row[col];
    if (v.empty() || v.size() > 9 || v.find_first_not_of("0123456789") != std::string::npos) {
      all_ints = false;
      break;
    }
  }
  if (all_ints) {
    for (const auto& row : table.rows) values.push_back(std::stoi(row[col]));
    out.labels = LabelVector::from_values(std::move(values));
    for (int k = 0; k < out.labels.num_classes; ++k) out.class_names.push_back(std::to_string(k));
    return out;
  }
  std::map<std::string, int> index;
  for (const auto& row : table.rows) {
    auto [it, inserted] = index.emplace(row[col], static_cast<int>(out.class_names.size()));
    if (inserted) out.class_names.push_back(row[col]);
    values.push_back(it->second);
  }
  out.labels.values = std::move(values);
  out.labels.num_classes = static_cast<int>(out.class_names.size());
  return out;
}

// --- manifest --------------------------------------------------------------

json manifest_to_json(const DatasetManifest& m) {
  json j = {{"split", m.split},
            {"n", m.n},
            {"d", m.d},
            {"normalize", m.normalize},
            {"image_embeddings", m.image_embeddings.generic_string()},
            {"class_text_embeddings", m.class_text_embeddings.generic_string()},
            {"target_column", m.target_column},
            {"sensitive_column", m.sensitive_column}};
  if (m.sensitive_text_embeddings) j["sensitive_text_embeddings"] = m.sensitive_text_embeddings->generic_string();
  if (m.labels) j["labels"] = m.labels->generic_string();
  if (!m.class_names.empty()) j["class_names"] = m.class_names;
  if (!m.sensitive_names.empty()) j["sensitive_names"] = m.sensitive_names;
  return j;
}

DatasetManifest read_manifest(const fs::path& path) {
  const json j = read_json(path);
  DatasetManifest m;
  m.base_dir = path.parent_path();
  try {
    m.split = j.value("split", std::string("train"));
    m.n = j.at("n").get<Index>();
    m.d = j.at("d").get<Index>();
    m.normalize = j.value("normalize", true);
    m.image_embeddings = j.at("image_embeddings").get<std::string>();
    m.class_text_embeddings = j.at("class_text_embeddings").get<std::string>();
    if (j.contains("sensitive_text_embeddings"))
      m.sensitive_text_embeddings = j.at("sensitive_text_embeddings").get<std::string>();
    if (j.contains("labels")) m.labels = j.at("labels").get<std::string>();
    m.target_column = j.value("target_column", std::string("y"));
    m.sensitive_column = j.value("sensitive_column", std::string("s"));
    if (j.contains("class_names")) m.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (j.contains("sensitive_names")) m.sensitive_names = j.at("sensitive_names").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError("data-io", path.string() + ": invalid manifest: " + e.what());
  }
  if (m.n < 1 || m.d < 1) throw InputError("data-io", path.string() + ": manifest n and d must be >= 1");
  return m;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  write_json(path, manifest_to_json(manifest));
}

Dataset load_dataset(const fs::path& manifest_path) {
  Dataset ds;
  ds.manifest = read_manifest(manifest_path);
  const auto& m = ds.manifest;
  std::vector<std::string> problems;
  auto check_file = [&](const fs::path& p, const char* what) {
    if (!fs::exists(m.resolve(p))) problems.push_back(std::string(what) + " file " + m.resolve(p).string() + " does not exist");
  };
  check_file(m.image_embeddings, "image embedding");
  check_file(m.class_text_embeddings, "class text embedding");
  if (m.sensitive_text_embeddings) check_file(*m.sensitive_text_embeddings, "sensitive text embedding");
  if (m.labels) check_file(*m.labels, "label");
  if (!problems.empty()) {
    std::string msg = manifest_path.string() + ":";
    for (const auto& p : problems) msg += " " + p + ";";
    throw InputError("data-io", msg);
  }

  ds.data.images = load_embeddings(m.resolve(m.image_embeddings), m.d, m.normalize);
  if (ds.data.images.rows() != m.n) {
    throw DimensionError("data-io", "image embeddings have " + std::to_string(ds.data.images.rows()) +
                                        " rows, manifest declares n = " + std::to_string(m.n));
  }
  ds.data.class_text = load_embeddings(m.resolve(m.class_text_embeddings), m.d, m.normalize);
  if (!m.class_names.empty() && static_cast<Index>(m.class_names.size()) != ds.data.class_text.rows()) {
    throw DimensionError("data-io", "manifest lists " + std::to_string(m.class_names.size()) +
                                        " class names but the class text file has " +
                                        std::to_string(ds.data.class_text.rows()) + " rows");
  }
  if (m.sensitive_text_embeddings)
    ds.data.sensitive_text = load_embeddings(m.resolve(*m.sensitive_text_embeddings), m.d, m.normalize);

  if (m.labels) {
    const fs::path labels_path = m.resolve(*m.labels);
    const CsvTable table = read_csv(labels_path);
    if (static_cast<Index>(table.rows.size()) != m.n) {
      throw DimensionError("data-io", labels_path.string() + " has " + std::to_string(table.rows.size()) +
                                          " rows, manifest declares n = " + std::to_string(m.n));
    }
    auto column_present = [&](const std::string& name) {
      for (const auto& h : table.header)
        if (h == name) return true;
      return false;
    };
    if (column_present(m.target_column)) {
      auto y = load_labels(labels_path, m.target_column, m.class_names.empty() ? nullptr : &m.class_names);
      if (y.labels.num_classes > ds.data.class_text.rows()) {
        throw DimensionError("data-io", "target labels have " + std::to_string(y.labels.num_classes) +
                                            " classes but there are " +
                                            std::to_string(ds.data.class_text.rows()) + " class prompts");
      }
      y.labels.num_classes = static_cast<int>(ds.data.class_text.rows());
      ds.data.y = std::move(y.labels);
      ds.class_names = std::move(y.class_names);
    }
    if (column_present(m.sensitive_column)) {
      auto s = load_labels(labels_path, m.sensitive_column,
                           m.sensitive_names.empty() ? nullptr : &m.sensitive_names);
      ds.data.s = std::move(s.labels);
      ds.sensitive_names = std::move(s.class_names);
    }
    if (!ds.data.y && !ds.data.s) {
      throw InputError("data-io", labels_path.string() + " has neither column '" + m.target_column +
                                      "' nor '" + m.sensitive_column + "'");
    }
  }
  if (ds.class_names.empty()) {
    ds.class_names = m.class_names;
    for (Index k = static_cast<Index>(ds.class_names.size()); k < ds.data.class_text.rows(); ++k)
      ds.class_names.push_back(std::to_string(k));
  }
  return ds;
}

// --- model container -------------------------------------------------------

json to_json(const TrainConfig& cfg) {
  json j = {{"tau_i", cfg.tau_i},
            {"tau_t", cfg.tau_t},
            {"tau_z", cfg.tau_z},
            {"gamma", cfg.gamma},
            {"r", cfg.r},
            {"rff_dim", cfg.rff_dim},
            {"iters", cfg.iters},
            {"seed", cfg.seed},
            {"supervised_y", cfg.supervised_y},
            {"supervised_s", cfg.supervised_s},
            {"balance_presample", cfg.balance_presample},
            {"median_subsample", cfg.median_subsample}};
  j["bandwidth_i"] = cfg.bandwidth_i ? json(*cfg.bandwidth_i) : json(nullptr);
  j["bandwidth_t"] = cfg.bandwidth_t ? json(*cfg.bandwidth_t) : json(nullptr);
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.tau_i = j.at("tau_i").get<double>();
  cfg.tau_t = j.at("tau_t").get<double>();
  cfg.tau_z = j.at("tau_z").get<double>();
  cfg.gamma = j.at("gamma").get<double>();
  cfg.r = j.at("r").get<Index>();
  cfg.rff_dim = j.at("rff_dim").get<Index>();
  cfg.iters = j.at("iters").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.supervised_y = j.at("supervised_y").get<bool>();
  cfg.supervised_s = j.at("supervised_s").get<bool>();
  cfg.balance_presample = j.at("balance_presample").get<bool>();
  cfg.median_subsample = j.at("median_subsample").get<Index>();
  if (!j.at("bandwidth_i").is_null()) cfg.bandwidth_i = j.at("bandwidth_i").get<double>();
  if (!j.at("bandwidth_t").is_null()) cfg.bandwidth_t = j.at("bandwidth_t").get<double>();
  return cfg;
}

json to_json(const IterationRecord& rec) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"iteration", rec.iteration},     {"j_start", num(rec.j_start)},
          {"j_text", num(rec.j_text)},       {"j_image", num(rec.j_image)},
          {"dep_zi_y", num(rec.dep_zi_y)},   {"dep_zi_s", num(rec.dep_zi_s)},
          {"dep_zt_y", num(rec.dep_zt_y)},   {"dep_zt_s", num(rec.dep_zt_s)},
          {"dep_cross", num(rec.dep_cross)}, {"agreement_prev", num(rec.agreement_prev)},
          {"agreement_truth", num(rec.agreement_truth)}, {"changed", rec.changed}};
}

json to_json(const MetricsReport& report) {
  json groups = json::array();
  for (const auto& g : report.groups.groups)
    groups.push_back({{"y", g.y}, {"s", g.s}, {"count", g.count}, {"accuracy", g.accuracy}});
  return {{"eod", report.eod},       {"avg", report.groups.avg}, {"wg", report.groups.wg},
          {"gap", report.groups.gap}, {"groups", groups},        {"max_skew", report.max_skew},
          {"dep_zy", report.dep_zy},  {"dep_zs", report.dep_zs}};
}

namespace {

IterationRecord record_from_json(const json& j) {
  IterationRecord rec;
  rec.iteration = j.at("iteration").get<int>();
  rec.j_start = num_or_nan(j.at("j_start"));
  rec.j_text = num_or_nan(j.at("j_text"));
  rec.j_image = num_or_nan(j.at("j_image"));
  rec.dep_zi_y = num_or_nan(j.at("dep_zi_y"));
  rec.dep_zi_s = num_or_nan(j.at("dep_zi_s"));
  rec.dep_zt_y = num_or_nan(j.at("dep_zt_y"));
  rec.dep_zt_s = num_or_nan(j.at("dep_zt_s"));
  rec.dep_cross = num_or_nan(j.at("dep_cross"));
  rec.agreement_prev = num_or_nan(j.at("agreement_prev"));
  rec.agreement_truth = num_or_nan(j.at("agreement_truth"));
  rec.changed = j.at("changed").get<Index>();
  return rec;
}

struct ArrayRef {
  std::string name;
  const Matrix* m;
};

}  // namespace

void save_model(const fs::path& path, const TrainedModel& model) {
  const Matrix mean_i_m = model.encoder_i.train_mean;
  std::vector<ArrayRef> arrays = {{"weights_i", &model.encoder_i.weights},
                                  {"class_text", &model.class_text},
                                  {"mean_i", &mean_i_m}};
  Matrix mean_t_m;
  if (model.encoder_t) {
    mean_t_m = model.encoder_t->train_mean;
    arrays.push_back({"weights_t", &model.encoder_t->weights});
    arrays.push_back({"mean_t", &mean_t_m});
    arrays.push_back({"class_reps", &model.class_reps});
  }

  json meta;
  meta["format"] = "kdebias-model";
  meta["config"] = to_json(model.config);
  meta["num_classes"] = model.num_classes;
  meta["r"] = model.encoder_i.r();
  meta["input_dim"] = model.encoder_i.input_dim;
  meta["gamma"] = model.config.gamma;
  meta["kernel_i"] = kernel_json(model.encoder_i.kernel);
  if (model.encoder_t) {
    meta["kernel_t"] = kernel_json(model.encoder_t->kernel);
    meta["text_input_dim"] = model.encoder_t->input_dim;
  }
  meta["history"] = json::array();
  for (const auto& rec : model.history) meta["history"].push_back(to_json(rec));
  meta["train_rows"] = model.train_rows.size();
  meta["arrays"] = json::array();
  for (const auto& a : arrays) meta["arrays"].push_back({{"name", a.name}, {"rows", a.m->rows()}, {"cols", a.m->cols()}});

  const std::string text = meta.dump();
  auto out = open_out(path, "data-io");
  out.write(kModelMagic, 4);
  const std::uint32_t version = kModelVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : arrays) {
    // Row-major payload.
    for (Index i = 0; i < a.m->rows(); ++i)
      for (Index j = 0; j < a.m->cols(); ++j) {
        const double v = (*a.m)(i, j);
        out.write(reinterpret_cast<const char*>(&v), 8);
      }
  }
  if (!out) throw InputError("data-io", "failed writing " + path.string());
}

TrainedModel load_model(const fs::path& path) {
  const std::string bytes = read_file(path, "data-io");
  auto fail = [&](const std::string& what) -> void { throw FormatError("data-io", path.string() + ": " + what); };
  if (bytes.size() < 16) fail("truncated model header (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), kModelMagic, 4) != 0) fail("bad magic (not a model file)");
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != kModelVersion) {
    fail("model format version " + std::to_string(version) + " is not supported by this build (reads version " +
         std::to_string(kModelVersion) + "); retrain or convert the model with a matching release");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 8);
  if (bytes.size() - 16 < len) fail("truncated model metadata");
  json meta;
  try {
    meta = json::parse(bytes.substr(16, len));
  } catch (const json::exception& e) {
    fail(std::string("corrupt model metadata: ") + e.what());
  }

  TrainedModel model;
  std::map<std::string, Matrix> arrays;
  try {
    model.config = train_config_from_json(meta.at("config"));
    model.num_classes = meta.at("num_classes").get<int>();
    std::size_t offset = 16 + len;
    for (const auto& a : meta.at("arrays")) {
      const Index rows = a.at("rows").get<Index>();
      const Index cols = a.at("cols").get<Index>();
      const std::size_t need = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 8;
      if (bytes.size() - offset < need) fail("truncated array payload '" + a.at("name").get<std::string>() + "'");
      Matrix m(rows, cols);
      for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) {
          double v;
          std::memcpy(&v, bytes.data() + offset, 8);
          offset += 8;
          m(i, j) = v;
        }
      arrays[a.at("name").get<std::string>()] = std::move(m);
    }
    if (offset != bytes.size()) fail("trailing bytes after the last array");

    model.encoder_i.weights = arrays.at("weights_i");
    model.encoder_i.train_mean = arrays.at("mean_i").col(0);
    model.encoder_i.kernel = kernel_from_json(meta.at("kernel_i"));
    model.encoder_i.input_dim = meta.at("input_dim").get<Index>();
    model.class_text = arrays.at("class_text");
    if (meta.contains("kernel_t")) {
      Encoder et;
      et.weights = arrays.at("weights_t");
      et.train_mean = arrays.at("mean_t").col(0);
      et.kernel = kernel_from_json(meta.at("kernel_t"));
      et.input_dim = meta.at("text_input_dim").get<Index>();
      model.encoder_t = std::move(et);
      model.class_reps = arrays.at("class_reps");
    }
    for (const auto& rec : meta.at("history")) model.history.push_back(record_from_json(rec));
  } catch (const json::exception& e) {
    fail(std::string("incomplete model metadata: ") + e.what());
  } catch (const std::out_of_range& e) {
    fail(std::string("model is missing an array: ") + e.what());
  }
  if (model.encoder_i.weights.cols() != model.encoder_i.kernel.rff_dim) fail("weights do not match the kernel recipe");
  return model;
}

// --- JSON files ------------------------------------------------------------

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path, "data-io");
  out << j.dump(2) << '\n';
  if (!out) throw InputError("data-io", "failed writing " + path.string());
}

json read_json(const fs::path& path) {
  const std::string text = read_file(path, "data-io");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("data-io", path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace kdebias::io
