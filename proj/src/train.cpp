#include "rttlab/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

#include "rttlab/error.hpp"
#include "rttlab/metrics.hpp"

namespace rttlab {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Deterministic one-step MSE over the lane layout used by train().
double lane_loss(const ModelWeights& weights, std::span<const double> series, int batch, std::size_t lane_len,
                 LstmState& state, ForwardTape& tape, Rng& rng) {
  state.reset();
  std::vector<double> inputs(static_cast<std::size_t>(batch));
  double sum = 0.0;
  for (std::size_t s = 0; s < lane_len; ++s) {
    for (int b = 0; b < batch; ++b) inputs[static_cast<std::size_t>(b)] = series[b * lane_len + s];
    forward(inputs, 1, state, weights, PassOptions::evaluation(), rng, tape);
    for (int b = 0; b < batch; ++b) {
      const double e = tape.predictions[static_cast<std::size_t>(b)] - series[b * lane_len + s + 1];
      sum += e * e;
    }
  }
  return sum / static_cast<double>(lane_len * static_cast<std::size_t>(batch));
}

constexpr std::size_t kMaxPrefixCacheValues = std::size_t{1} << 25;

// Output of the top frozen layer for every training step, layout [step][lane][unit].
// Frozen layers see the same inputs from a zero state every epoch and carry no
// dropout or noise, so one pass serves all epochs.
std::vector<double> frozen_prefix(const ModelWeights& weights, std::span<const double> series, std::size_t batch,
                                  std::size_t lane_len, int k_frozen) {
  const auto n = static_cast<std::size_t>(weights.architecture().hidden_units);
  std::vector<double> out(lane_len * batch * n);
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<std::vector<double>> h(static_cast<std::size_t>(k_frozen), std::vector<double>(n, 0.0));
    auto c = h;
    for (std::size_t s = 0; s < lane_len; ++s) {
      std::vector<double> x{series[b * lane_len + s]};
      for (int l = 0; l < k_frozen; ++l) {
        auto rec = lstm_cell_forward(x, h[static_cast<std::size_t>(l)], c[static_cast<std::size_t>(l)], weights.layer(l));
        c[static_cast<std::size_t>(l)] = std::move(rec.c);
        h[static_cast<std::size_t>(l)] = rec.h;
        x = std::move(rec.h);
      }
      std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>((s * batch + b) * n));
    }
  }
  return out;
}

}  // namespace

AdamState AdamState::for_weights(const ModelWeights& weights, AdamHyperParams hyper) {
  AdamState s;
  s.m.assign(weights.size(), 0.0);
  s.v.assign(weights.size(), 0.0);
  s.hyper = hyper;
  return s;
}

void adam_step(ModelWeights& weights, std::span<const double> gradients, AdamState& state, const ParamMask& mask) {
  auto theta = weights.values();
  if (gradients.size() != theta.size() || state.m.size() != theta.size() || state.v.size() != theta.size()) {
    fail(ErrorKind::kContractViolation, "adam_step: weights, gradients and state must have equal sizes");
  }
  require(mask.empty() || mask.size() == theta.size(), ErrorKind::kContractViolation, "adam_step: mask size");
  for (std::size_t k = 0; k < gradients.size(); ++k) {
    if (!mask.frozen(k) && !std::isfinite(gradients[k])) {
      fail(ErrorKind::kNumeric, "adam_step: non-finite gradient at parameter " + std::to_string(k));
    }
  }
  const auto& h = state.hyper;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(h.beta1, t);
  const double bias2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t k = 0; k < theta.size(); ++k) {
    if (mask.frozen(k)) continue;
    const double g = gradients[k];
    state.m[k] = h.beta1 * state.m[k] + (1.0 - h.beta1) * g;
    state.v[k] = h.beta2 * state.v[k] + (1.0 - h.beta2) * g * g;
    const double m_hat = state.m[k] / bias1;
    const double v_hat = state.v[k] / bias2;
    theta[k] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

double clip_global_norm(std::span<double> grads, double max_norm, const ParamMask& mask) {
  double ss = 0.0;
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!mask.frozen(k)) ss += grads[k] * grads[k];
  }
  const double norm = std::sqrt(ss);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (std::size_t k = 0; k < grads.size(); ++k) {
      if (!mask.frozen(k)) grads[k] *= scale;
    }
  }
  return norm;
}

TrainResult train(std::span<const double> series, ModelWeights initial, const TrainConfig& config) {
  const auto start = Clock::now();
  const auto& arch = initial.architecture();
  require(config.batch_size >= 1, ErrorKind::kArgument, "batch_size must be >= 1");
  require(config.epochs >= 0, ErrorKind::kArgument, "epochs must be >= 0");
  const auto batch = static_cast<std::size_t>(config.batch_size);
  if (series.size() < 2 * batch) {
    fail(ErrorKind::kArgument, "series of length " + std::to_string(series.size()) + " is too short for " +
                                   std::to_string(batch) + " lanes (need >= " + std::to_string(2 * batch) + ")");
  }
  ParamMask mask;
  if (config.k_frozen > 0) mask = ParamMask::freeze_layers(initial, config.k_frozen);

  TrainResult result{std::move(initial), {}};
  ModelWeights& weights = result.weights;
  const std::size_t lane_len = (series.size() - 1) / batch;

  Rng rng(derive_seed(config.seed, 1));
  Rng eval_rng(0);
  AdamState adam = AdamState::for_weights(weights, config.adam);
  LstmState state = LstmState::zeros(arch, config.batch_size);
  LstmState eval_state = state;
  ForwardTape tape, eval_tape;
  ModelWeights grads(arch);
  std::vector<double> inputs(batch), targets(batch);
  const PassOptions opts = PassOptions::training(arch);
  const auto n = static_cast<std::size_t>(arch.hidden_units);
  std::vector<double> prefix;
  if (config.k_frozen > 0 && config.epochs > 0 && lane_len * batch * n <= kMaxPrefixCacheValues) {
    prefix = frozen_prefix(weights, series, batch, lane_len, config.k_frozen);
  }

  result.report.epoch_train_mse.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    state.reset();
    for (std::size_t s = 0; s < lane_len; ++s) {
      for (std::size_t b = 0; b < batch; ++b) {
        inputs[b] = series[b * lane_len + s];
        targets[b] = series[b * lane_len + s + 1];
      }
      if (prefix.empty()) {
        forward(inputs, 1, state, weights, opts, rng, tape);
      } else {
        const std::span<const double> block(prefix.data() + s * batch * n, batch * n);
        forward_from(config.k_frozen, block, 1, state, weights, opts, rng, tape);
      }
      backward(tape, targets, weights, grads, config.k_frozen);
      mask.apply(grads.values());
      clip_global_norm(grads.values(), config.clip_norm, mask);
      adam_step(weights, grads.values(), adam, mask);
    }
    if (config.track_epoch_loss) {
      result.report.epoch_train_mse.push_back(
          lane_loss(weights, series, config.batch_size, lane_len, eval_state, eval_tape, eval_rng));
    }
  }
  result.report.seconds = seconds_since(start);
  return result;
}

TrainResult train_from_scratch(std::span<const double> series, const LstmArchitecture& arch,
                               const TrainConfig& config) {
  return train(series, init_weights(arch, derive_seed(config.seed, 0)), config);
}

Evaluation evaluate_one_step(const ModelWeights& weights, std::span<const double> standardized,
                             const Standardizer& standardizer) {
  require(standardized.size() >= 2, ErrorKind::kDegenerateInput, "evaluation needs at least 2 samples");
  LstmState state = LstmState::zeros(weights.architecture(), 1);
  ForwardTape tape;
  Rng rng(0);
  const std::size_t n = standardized.size() - 1;
  std::vector<double> preds(n);
  for (std::size_t s = 0; s < n; ++s) {
    forward(standardized.subspan(s, 1), 1, state, weights, PassOptions::evaluation(), rng, tape);
    preds[s] = tape.predictions[0];
  }
  const auto targets = standardized.subspan(1);
  Evaluation ev;
  ev.mse = mse_loss(preds, targets);
  ev.predictions_ms = destandardize(preds, standardizer);
  ev.targets_ms = destandardize(targets, standardizer);
  ev.smape = smape(ev.targets_ms, ev.predictions_ms);
  return ev;
}

GridResult grid_search(std::span<const double> train_series, std::span<const double> test_series,
                       const Standardizer& test_standardizer, const HyperGrid& grid, const TrainConfig& base) {
  require(grid.cardinality() > 0, ErrorKind::kArgument, "grid_search: empty grid");
  GridResult result;
  std::optional<std::tuple<double, std::size_t>> best_key;
  std::uint64_t point = 0;
  for (int layers : grid.layers) {
    for (int hidden : grid.hidden_units) {
      for (int batch : grid.batch_sizes) {
        for (int epochs : grid.epochs) {
          GridRow row;
          row.layers = layers;
          row.hidden_units = hidden;
          row.batch_size = batch;
          row.epochs = epochs;
          LstmArchitecture arch{layers, hidden, grid.dropout_rate, grid.probact};
          TrainConfig config = base;
          config.batch_size = batch;
          config.epochs = epochs;
          config.seed = derive_seed(base.seed, point++);
          try {
            auto trained = train_from_scratch(train_series, arch, config);
            const auto train_std = standardize(train_series).standardizer;
            row.train_mse = evaluate_one_step(trained.weights, train_series, train_std).mse;
            const auto test = evaluate_one_step(trained.weights, test_series, test_standardizer);
            row.test_mse = test.mse;
            row.test_smape = test.smape;
            row.seconds = trained.report.seconds;
            // Rows are visited in lexicographic (L, N, B, epochs) order, so a
            // strict comparison keeps the earliest row on a full tie.
            const std::tuple<double, std::size_t> key{row.test_mse, arch.parameter_count()};
            if (!best_key || key < *best_key) {
              best_key = key;
              result.best_weights = std::move(trained.weights);
              result.best_architecture = arch;
              result.best_config = config;
              result.best_row = result.rows.size();
            }
          } catch (const Error& e) {
            row.error = e.what();
          }
          result.rows.push_back(std::move(row));
        }
      }
    }
  }
  if (!best_key) fail(ErrorKind::kArgument, "grid_search: every grid point failed to train");
  return result;
}

std::string grid_report_csv(const std::vector<GridRow>& rows, bool include_timing) {
  std::ostringstream out;
  out << "L,N,B,epochs,train_mse,test_mse,test_smape,seconds\n";
  for (const auto& r : rows) {
    if (r.error) continue;
    out << r.layers << ',' << r.hidden_units << ',' << r.batch_size << ',' << r.epochs << ','
        << format_double(r.train_mse) << ',' << format_double(r.test_mse) << ',' << format_double(r.test_smape) << ','
        << format_double(include_timing ? r.seconds : 0.0) << '\n';
  }
  return out.str();
}

ValidationResult out_of_sample_validate(const ModelWeights& start, std::span<const double> series_ms, int runs,
                                        ValidationMode mode, const TrainConfig& config) {
  require(runs >= 1, ErrorKind::kArgument, "runs must be >= 1");
  const std::size_t z = series_ms.size();
  const auto p0 = static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(z)));
  const std::size_t window = (z - p0) / static_cast<std::size_t>(runs);
  if (window < 2 || p0 < 2 * static_cast<std::size_t>(config.batch_size)) {
    fail(ErrorKind::kArgument, "series of length " + std::to_string(z) + " is too short for " +
                                   std::to_string(runs) + " validation windows");
  }
  ValidationResult result;
  for (int r = 0; r < runs; ++r) {
    const std::size_t origin = p0 + static_cast<std::size_t>(r) * window;
    const auto train_part = standardize(series_ms.subspan(0, origin));
    const auto test_part = standardize(series_ms.subspan(origin, window));
    TrainConfig run_config = config;
    run_config.seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    ModelWeights initial = mode == ValidationMode::kFineTune
                               ? start
                               : init_weights(start.architecture(), derive_seed(run_config.seed, 0));
    if (mode == ValidationMode::kScratch) run_config.k_frozen = 0;
    run_config.track_epoch_loss = false;
    auto trained = train(train_part.values, std::move(initial), run_config);
    result.run_smape.push_back(evaluate_one_step(trained.weights, test_part.values, test_part.standardizer).smape);
  }
  double sum = 0.0;
  for (double s : result.run_smape) sum += s;
  result.mean_smape = sum / static_cast<double>(runs);
  double half_width = 0.0;
  if (runs > 1) {
    double ss = 0.0;
    for (double s : result.run_smape) ss += (s - result.mean_smape) * (s - result.mean_smape);
    half_width = 1.96 * std::sqrt(ss / static_cast<double>(runs - 1)) / std::sqrt(static_cast<double>(runs));
  }
  result.ci_low = result.mean_smape - half_width;
  result.ci_high = result.mean_smape + half_width;
  return result;
}

}  // namespace rttlab
