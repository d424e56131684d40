#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rttlab/lstm.hpp"
#include "rttlab/trace.hpp"

namespace rttlab {

struct AdamHyperParams {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  AdamHyperParams hyper;

  static AdamState for_weights(const ModelWeights& weights, AdamHyperParams hyper = {});
};

/// One bias-corrected Adam update. Frozen entries of `mask` (if non-empty) keep
/// their value and their moments. Throws kNumeric on a non-finite gradient,
/// leaving weights and state untouched.
void adam_step(ModelWeights& weights, std::span<const double> gradients, AdamState& state,
               const ParamMask& mask = {});

/// Scales grads in place so that the L2 norm over non-frozen entries is at most
/// max_norm. Returns the norm before clipping.
double clip_global_norm(std::span<double> grads, double max_norm, const ParamMask& mask = {});

struct TrainConfig {
  int batch_size = 16;
  int epochs = 700;
  std::uint64_t seed = 0;
  int k_frozen = 0;
  AdamHyperParams adam;
  double clip_norm = 5.0;
  /// Record deterministic one-step MSE on the training series after every epoch.
  bool track_epoch_loss = true;
};

struct TrainReport {
  std::vector<double> epoch_train_mse;
  double test_mse = 0.0;
  double test_smape = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  ModelWeights weights;
  TrainReport report;
};

/// Stateful truncated training over one standardized series.
///
/// The supervised pairs are cut into batch_size contiguous lanes (tail
/// dropped). Each optimizer step feeds one timestep of every lane; lane state
/// carries across steps and is zeroed at the start of every epoch. Returns the
/// final-epoch weights. Requires series.size() >= 2 * batch_size.
TrainResult train(std::span<const double> series, ModelWeights initial, const TrainConfig& config);

/// Convenience: init_weights(arch, derive_seed(config.seed, 0)) then train().
TrainResult train_from_scratch(std::span<const double> series, const LstmArchitecture& arch,
                               const TrainConfig& config);

struct Evaluation {
  double mse = 0.0;    // standardized units
  double smape = 0.0;  // percent, on destandardized values
  std::vector<double> predictions_ms;
  std::vector<double> targets_ms;
};

/// Deterministic one-step-ahead evaluation (no dropout, no noise) over a
/// standardized series, one lane from zero state.
Evaluation evaluate_one_step(const ModelWeights& weights, std::span<const double> standardized,
                             const Standardizer& standardizer);

struct HyperGrid {
  std::vector<int> layers{1, 2, 3, 4};
  std::vector<int> hidden_units{8, 16, 32, 64, 128, 256, 512};
  std::vector<int> batch_sizes{4, 8, 16, 32};
  std::vector<int> epochs{400, 500, 600, 700};
  double dropout_rate = 0.5;
  ProbActParams probact;

  std::size_t cardinality() const {
    return layers.size() * hidden_units.size() * batch_sizes.size() * epochs.size();
  }
};

struct GridRow {
  int layers = 0;
  int hidden_units = 0;
  int batch_size = 0;
  int epochs = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
  double test_smape = 0.0;
  double seconds = 0.0;
  std::optional<std::string> error;  // set if this point failed to train
};

struct GridResult {
  ModelWeights best_weights;
  LstmArchitecture best_architecture;
  TrainConfig best_config;
  std::size_t best_row = 0;
  std::vector<GridRow> rows;
};

/// Train and test series are standardized separately; test_standardizer maps
/// test predictions back to ms for SMAPE. Selection: minimum test MSE, then
/// fewer parameters, then lexicographic (L, N, B, epochs).
GridResult grid_search(std::span<const double> train_series, std::span<const double> test_series,
                       const Standardizer& test_standardizer, const HyperGrid& grid, const TrainConfig& base);

/// CSV: `L,N,B,epochs,train_mse,test_mse,test_smape,seconds` with a header line.
/// Failed points are omitted. When include_timing is false the seconds column is 0.
std::string grid_report_csv(const std::vector<GridRow>& rows, bool include_timing = true);

enum class ValidationMode { kFineTune, kScratch };

struct ValidationResult {
  std::vector<double> run_smape;
  double mean_smape = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Rolling-origin out-of-sample validation on a raw (ms) series. Origins are
/// equally spaced over the final 20%: run r trains on samples [0, P0 + r*W) and
/// tests on the next W samples, where P0 = floor(0.8 Z) and W = floor((Z-P0)/runs).
/// Each subset is standardized on its own. In kFineTune mode `start` supplies
/// the source weights and config.k_frozen is honoured; in kScratch mode only its
/// architecture is used. CI is mean +/- 1.96 * s / sqrt(runs).
ValidationResult out_of_sample_validate(const ModelWeights& start, std::span<const double> series_ms, int runs,
                                        ValidationMode mode, const TrainConfig& config);

}  // namespace rttlab
