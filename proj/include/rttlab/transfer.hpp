#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "rttlab/lstm.hpp"
#include "rttlab/train.hpp"
#include "rttlab/trace.hpp"

namespace rttlab {

inline constexpr int kModelFormatVersion = 1;
inline constexpr std::size_t kFingerprintMaxPoints = 6000;

struct ModelMetadata {
  std::string context;
  std::size_t training_length = 0;
  double train_smape = 0.0;
  double test_smape = 0.0;
  double median_ms = 0.0;  // median of the training data, the default generation seed
  std::string created_at;
  std::string source_context;  // set on fine-tuned models

  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

struct LstmModel {
  ModelWeights weights;
  Standardizer standardizer;
  ModelMetadata metadata;

  const LstmArchitecture& architecture() const { return weights.architecture(); }
  void validate() const;
};

/// `*.lstm.json` document. Weights are written as shortest round-trip decimals
/// in flat row-major order and the object ends with a CRC-32 of the canonical
/// serialization of everything before it.
std::string save_model(const LstmModel& model);
LstmModel load_model(std::string_view document);
void save_model_file(const std::string& path, const LstmModel& model);
LstmModel load_model_file(const std::string& path);

/// Recomputes the trailing checksum of a (possibly edited) model document.
std::string restamp_model_document(std::string_view document);

/// ISO-8601 UTC timestamp; honours SOURCE_DATE_EPOCH for reproducible output.
std::string creation_timestamp();
bool reproducible_mode();

/// Standardized test split (80:20) of a source trace, stride-downsampled to at
/// most kFingerprintMaxPoints points.
std::vector<double> make_fingerprint(std::span<const double> source_ms);

struct LibraryEntry {
  LstmModel model;
  std::vector<double> fingerprint;
  std::string model_file;
  std::string fingerprint_file;
};

/// Ordered collection of source models. Reads are safe from any number of
/// threads; add() must not race with anything.
class ModelLibrary {
 public:
  void add(LibraryEntry entry);
  const std::vector<LibraryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Reads `<dir>/library.json` and every file it lists.
  static ModelLibrary load(const std::string& dir);

  /// Writes the entry's model and fingerprint files into dir and appends it to
  /// `<dir>/library.json`, creating the directory and manifest if needed.
  static void add_to_directory(const std::string& dir, const LstmModel& model, std::span<const double> fingerprint);

 private:
  std::vector<LibraryEntry> entries_;
};

struct FreezeSpec {
  int k_frozen = 1;
};

struct TransferResult {
  LstmModel model;
  TrainReport report;
};

/// Continues training a copy of source on the target's own standardization with
/// layers [0, k_frozen) frozen. Fresh Adam state. If target_test is non-empty
/// the report carries its deterministic MSE/SMAPE.
TransferResult fine_tune(const LstmModel& source, const RttTrace& target_train, FreezeSpec freeze,
                         const TrainConfig& config, const RttTrace* target_test = nullptr);

/// Fresh initialization trained on target data only; the transfer baseline.
TransferResult train_specialized(const RttTrace& target_train, const LstmArchitecture& arch, const TrainConfig& config,
                                 const RttTrace* target_test = nullptr);

/// Test MSE/SMAPE of a model on a trace standardized with its own statistics.
Evaluation evaluate_model(const LstmModel& model, const RttTrace& test);

}  // namespace rttlab
