#include "rttlab/transfer.hpp"

#include <zlib.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>

#include <json.hpp>

#include "rttlab/error.hpp"

namespace rttlab {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

constexpr const char* kManifestName = "library.json";

std::string crc32_hex(std::string_view text) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size()));
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

ojson span_to_json(std::span<const double> values) {
  ojson arr = ojson::array();
  for (double v : values) arr.push_back(v);
  return arr;
}

template <typename Json>
void copy_array(const Json& arr, std::span<double> out, const std::string& what) {
  if (!arr.is_array() || arr.size() != out.size()) {
    fail(ErrorKind::kLoad, "shape mismatch: `" + what + "` must hold " + std::to_string(out.size()) + " values");
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!arr[k].is_number()) fail(ErrorKind::kLoad, "`" + what + "` contains a non-numeric entry");
    out[k] = arr[k].template get<double>();
  }
}

ojson model_body(const LstmModel& model) {
  const auto& arch = model.architecture();
  ojson doc;
  doc["format_version"] = kModelFormatVersion;
  doc["architecture"] = {{"num_layers", arch.num_layers},
                         {"hidden_units", arch.hidden_units},
                         {"dropout_rate", arch.dropout_rate},
                         {"probact", {{"elu_alpha", arch.probact.elu_alpha}, {"sigma", arch.probact.sigma}}},
                         {"gate_order", "ifoc"}};
  doc["standardizer"] = {{"mean", model.standardizer.mean}, {"std", model.standardizer.std}, {"std_kind", "population"}};
  const auto& m = model.metadata;
  doc["metadata"] = {{"context", m.context},
                     {"training_length", m.training_length},
                     {"train_smape", m.train_smape},
                     {"test_smape", m.test_smape},
                     {"median_ms", m.median_ms},
                     {"created_at", m.created_at},
                     {"source_context", m.source_context}};
  ojson layers = ojson::array();
  for (int l = 0; l < arch.num_layers; ++l) {
    const auto lw = model.weights.layer(l);
    layers.push_back({{"w_x", span_to_json(lw.w_x)}, {"w_h", span_to_json(lw.w_h)}, {"b", span_to_json(lw.b)}});
  }
  doc["weights"] = {{"layers", std::move(layers)},
                    {"dense_w", span_to_json(model.weights.dense_w())},
                    {"dense_b", model.weights.dense_b()}};
  return doc;
}

ojson parse_document(std::string_view document) {
  try {
    return ojson::parse(document.begin(), document.end());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kLoad, std::string("model document is not valid JSON (truncated?): ") + e.what());
  }
}

std::string slug(const std::string& text) {
  std::string out;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    out += std::isalnum(u) ? static_cast<char>(std::tolower(u)) : '-';
  }
  if (out.empty()) out = "model";
  return out.substr(0, 48);
}

}  // namespace

void LstmModel::validate() const {
  architecture().validate();
  standardizer.validate();
  require(weights.all_finite(), ErrorKind::kValidation, "model weights must be finite");
}

std::string save_model(const LstmModel& model) {
  model.validate();
  ojson doc = model_body(model);
  const std::string crc = crc32_hex(doc.dump());
  doc["crc32"] = crc;
  return doc.dump(1) + "\n";
}

std::string restamp_model_document(std::string_view document) {
  ojson doc = parse_document(document);
  doc.erase("crc32");
  const std::string crc = crc32_hex(doc.dump());
  doc["crc32"] = crc;
  return doc.dump(1) + "\n";
}

LstmModel load_model(std::string_view document) {
  ojson doc = parse_document(document);
  if (!doc.is_object() || !doc.contains("crc32") || !doc["crc32"].is_string()) {
    fail(ErrorKind::kLoad, "model document has no trailing crc32");
  }
  const std::string stored = doc["crc32"].get<std::string>();
  doc.erase("crc32");
  if (crc32_hex(doc.dump()) != stored) fail(ErrorKind::kLoad, "checksum mismatch; document is corrupt");

  try {
    if (doc.at("format_version").get<int>() != kModelFormatVersion) {
      fail(ErrorKind::kLoad, "unsupported format_version " + doc.at("format_version").dump());
    }
    const auto& a = doc.at("architecture");
    LstmArchitecture arch;
    arch.num_layers = a.at("num_layers").get<int>();
    arch.hidden_units = a.at("hidden_units").get<int>();
    arch.dropout_rate = a.at("dropout_rate").get<double>();
    arch.probact.elu_alpha = a.at("probact").at("elu_alpha").get<double>();
    arch.probact.sigma = a.at("probact").at("sigma").get<double>();
    try {
      arch.validate();
    } catch (const Error& e) {
      fail(ErrorKind::kLoad, std::string("invalid architecture: ") + e.what());
    }

    LstmModel model;
    model.weights = ModelWeights(arch);
    const auto& w = doc.at("weights");
    const auto& layers = w.at("layers");
    if (!layers.is_array() || layers.size() != static_cast<std::size_t>(arch.num_layers)) {
      fail(ErrorKind::kLoad, "shape mismatch: architecture declares " + std::to_string(arch.num_layers) +
                                 " layers but the document holds " + std::to_string(layers.size()));
    }
    for (int l = 0; l < arch.num_layers; ++l) {
      auto lw = model.weights.layer(l);
      const auto& lj = layers[static_cast<std::size_t>(l)];
      const std::string prefix = "layers[" + std::to_string(l) + "].";
      copy_array(lj.at("w_x"), lw.w_x, prefix + "w_x");
      copy_array(lj.at("w_h"), lw.w_h, prefix + "w_h");
      copy_array(lj.at("b"), lw.b, prefix + "b");
    }
    copy_array(w.at("dense_w"), model.weights.dense_w(), "dense_w");
    model.weights.dense_b() = w.at("dense_b").get<double>();

    model.standardizer.mean = doc.at("standardizer").at("mean").get<double>();
    model.standardizer.std = doc.at("standardizer").at("std").get<double>();
    const auto& m = doc.at("metadata");
    model.metadata.context = m.at("context").get<std::string>();
    model.metadata.training_length = m.at("training_length").get<std::size_t>();
    model.metadata.train_smape = m.at("train_smape").get<double>();
    model.metadata.test_smape = m.at("test_smape").get<double>();
    model.metadata.median_ms = m.at("median_ms").get<double>();
    model.metadata.created_at = m.at("created_at").get<std::string>();
    model.metadata.source_context = m.at("source_context").get<std::string>();
    try {
      model.validate();
    } catch (const Error& e) {
      fail(ErrorKind::kLoad, e.what());
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kLoad, std::string("malformed model document: ") + e.what());
  }
}

void save_model_file(const std::string& path, const LstmModel& model) { write_text_file(path, save_model(model)); }

LstmModel load_model_file(const std::string& path) {
  try {
    return load_model(read_text_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    fail(ErrorKind::kLoad, path + ": " + e.what());
  }
}

bool reproducible_mode() {
  const char* env = std::getenv("SOURCE_DATE_EPOCH");
  return env != nullptr && *env != '\0';
}

std::string creation_timestamp() {
  std::time_t t = std::time(nullptr);
  if (reproducible_mode()) t = static_cast<std::time_t>(std::strtoll(std::getenv("SOURCE_DATE_EPOCH"), nullptr, 10));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> make_fingerprint(std::span<const double> source_ms) {
  const auto parts = split(source_ms, SplitSpec{0.8});
  const auto test = standardize(parts.test);
  const std::size_t n = test.values.size();
  const std::size_t stride = (n + kFingerprintMaxPoints - 1) / kFingerprintMaxPoints;
  std::vector<double> fp;
  fp.reserve(n / stride + 1);
  for (std::size_t k = 0; k < n; k += stride) fp.push_back(test.values[k]);
  return fp;
}

void ModelLibrary::add(LibraryEntry entry) {
  require(!entry.fingerprint.empty(), ErrorKind::kArgument, "library entry needs a non-empty fingerprint");
  for (const auto& e : entries_) {
    if (e.model.metadata.context == entry.model.metadata.context) {
      fail(ErrorKind::kArgument, "library already has an entry with context `" + entry.model.metadata.context + "`");
    }
  }
  entries_.push_back(std::move(entry));
}

ModelLibrary ModelLibrary::load(const std::string& dir) {
  const fs::path manifest = fs::path(dir) / kManifestName;
  if (!fs::exists(manifest)) fail(ErrorKind::kIo, "no " + std::string(kManifestName) + " in `" + dir + "`");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(manifest.string()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kLoad, manifest.string() + ": " + e.what());
  }
  ModelLibrary lib;
  try {
    for (const auto& item : doc.at("entries")) {
      LibraryEntry entry;
      entry.model_file = item.at("model").get<std::string>();
      entry.fingerprint_file = item.at("fingerprint").get<std::string>();
      entry.model = load_model_file((fs::path(dir) / entry.model_file).string());
      entry.fingerprint = parse_series_csv(read_text_file((fs::path(dir) / entry.fingerprint_file).string()));
      lib.add(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kLoad, manifest.string() + ": " + e.what());
  }
  return lib;
}

void ModelLibrary::add_to_directory(const std::string& dir, const LstmModel& model,
                                    std::span<const double> fingerprint) {
  require(!fingerprint.empty(), ErrorKind::kArgument, "library entry needs a non-empty fingerprint");
  fs::create_directories(dir);
  const fs::path manifest = fs::path(dir) / kManifestName;
  nlohmann::ordered_json doc = {{"format_version", 1}, {"entries", nlohmann::ordered_json::array()}};
  if (fs::exists(manifest)) doc = nlohmann::ordered_json::parse(read_text_file(manifest.string()));

  for (const auto& item : doc.at("entries")) {
    if (item.at("context").get<std::string>() == model.metadata.context) {
      fail(ErrorKind::kArgument, "library already has an entry with context `" + model.metadata.context + "`");
    }
  }
  const std::size_t index = doc.at("entries").size();
  char prefix[16];
  std::snprintf(prefix, sizeof(prefix), "%03zu-", index);
  const std::string stem = prefix + slug(model.metadata.context);
  const std::string model_file = stem + ".lstm.json";
  const std::string fp_file = stem + ".fingerprint.csv";

  save_model_file((fs::path(dir) / model_file).string(), model);
  write_text_file((fs::path(dir) / fp_file).string(), serialize_series_csv(fingerprint));
  doc["entries"].push_back({{"context", model.metadata.context}, {"model", model_file}, {"fingerprint", fp_file}});
  write_text_file(manifest.string(), doc.dump(2) + "\n");
}

namespace {

TransferResult package(TrainResult trained, const StandardizedSeries& target, const RttTrace& target_train,
                       const RttTrace* target_test) {
  TransferResult out;
  out.report = std::move(trained.report);
  out.model.weights = std::move(trained.weights);
  out.model.standardizer = target.standardizer;
  auto& meta = out.model.metadata;
  meta.context = target_train.context;
  meta.training_length = target_train.size();
  meta.median_ms = median(target_train.samples);
  meta.train_smape = evaluate_one_step(out.model.weights, target.values, target.standardizer).smape;
  meta.created_at = creation_timestamp();
  if (target_test != nullptr) {
    const auto ev = evaluate_model(out.model, *target_test);
    out.report.test_mse = ev.mse;
    out.report.test_smape = ev.smape;
    meta.test_smape = ev.smape;
  }
  return out;
}

}  // namespace

TransferResult fine_tune(const LstmModel& source, const RttTrace& target_train, FreezeSpec freeze,
                         const TrainConfig& config, const RttTrace* target_test) {
  const int layers = source.architecture().num_layers;
  if (freeze.k_frozen < 0 || freeze.k_frozen >= layers) {
    fail(ErrorKind::kArgument, "k_frozen = " + std::to_string(freeze.k_frozen) + " must be in [0, " +
                                   std::to_string(layers) + ") for a " + std::to_string(layers) + "-layer source");
  }
  target_train.validate();
  const auto target = standardize(target_train.samples);
  TrainConfig cfg = config;
  cfg.k_frozen = freeze.k_frozen;
  auto result = package(train(target.values, source.weights, cfg), target, target_train, target_test);
  result.model.metadata.source_context = source.metadata.context;
  return result;
}

TransferResult train_specialized(const RttTrace& target_train, const LstmArchitecture& arch, const TrainConfig& config,
                                 const RttTrace* target_test) {
  target_train.validate();
  const auto target = standardize(target_train.samples);
  TrainConfig cfg = config;
  cfg.k_frozen = 0;
  return package(train_from_scratch(target.values, arch, cfg), target, target_train, target_test);
}

Evaluation evaluate_model(const LstmModel& model, const RttTrace& test) {
  test.validate();
  const auto standardized = standardize(test.samples);
  return evaluate_one_step(model.weights, standardized.values, standardized.standardizer);
}

}  // namespace rttlab
