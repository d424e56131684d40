#include <algorithm>
#include <cmath>
#include <cstring>

#include <doctest.h>

#include "rttlab/error.hpp"
#include "rttlab/train.hpp"
#include "synthetic.hpp"

using namespace rttlab;

namespace {

ModelWeights filled(const LstmArchitecture& arch, double value) {
  ModelWeights w(arch);
  for (auto& v : w.values()) v = value;
  return w;
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TrainConfig quick_config(int epochs, std::uint64_t seed = 0) {
  TrainConfig c;
  c.epochs = epochs;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("adam: zero gradient leaves weights unchanged") {
  const LstmArchitecture arch{1, 2, 0.0, {}};
  ModelWeights w = init_weights(arch, 1);
  const ModelWeights before = w;
  AdamState s = AdamState::for_weights(w);
  adam_step(w, std::vector<double>(w.size(), 0.0), s, {});
  CHECK(bit_equal(w.values(), before.values()));
  CHECK(s.step == 1);
}

TEST_CASE("adam: first step by hand") {
  const LstmArchitecture arch{1, 2, 0.0, {}};
  ModelWeights w = filled(arch, 0.0);
  AdamState s = AdamState::for_weights(w);
  adam_step(w, std::vector<double>(w.size(), 2.0), s, {});
  // m = 0.2, v = 0.004, m_hat = 2, v_hat = 4
  const double expected = -1e-5 * 2.0 / (2.0 + 1e-7);
  CHECK(std::abs(expected - (-9.9999995e-6)) < 1e-12);
  for (std::size_t k = 0; k < w.size(); ++k) {
    CHECK(std::abs(s.m[k] - 0.2) < 1e-15);
    CHECK(std::abs(s.v[k] - 0.004) < 1e-15);
    CHECK(std::abs(w.values()[k] - expected) < 1e-12);
  }
}

TEST_CASE("adam: constant gradient displacement approaches the learning rate") {
  const LstmArchitecture arch{1, 2, 0.0, {}};
  ModelWeights w = filled(arch, 0.0);
  AdamState s = AdamState::for_weights(w);
  const std::vector<double> g(w.size(), 0.37);
  double prev = 0.0;
  for (int step = 1; step <= 50; ++step) {
    prev = w.values()[0];
    adam_step(w, g, s, {});
  }
  const double displacement = std::abs(w.values()[0] - prev);
  CHECK(std::abs(displacement - 1e-5) <= 0.01 * 1e-5);
}

TEST_CASE("adam: frozen parameters never move") {
  const LstmArchitecture arch{2, 4, 0.0, {}};
  ModelWeights w = init_weights(arch, 2);
  const ModelWeights before = w;
  const auto mask = ParamMask::freeze_layers(w, 1);
  AdamState s = AdamState::for_weights(w);
  const auto g = testing::uniform(w.size(), -1.0, 1.0, 3);
  for (int i = 0; i < 25; ++i) adam_step(w, g, s, mask);
  const auto frozen = w.layer_end(0);
  CHECK(bit_equal(w.values().subspan(0, frozen), before.values().subspan(0, frozen)));
  CHECK_FALSE(bit_equal(w.values(), before.values()));
}

TEST_CASE("adam: non-finite gradient is a numeric error") {
  const LstmArchitecture arch{1, 2, 0.0, {}};
  ModelWeights w = init_weights(arch, 1);
  AdamState s = AdamState::for_weights(w);
  std::vector<double> g(w.size(), 0.0);
  g[3] = std::nan("");
  try {
    adam_step(w, g, s, {});
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
  }
}

TEST_CASE("clip_global_norm") {
  std::vector<double> g{3.0, 4.0};
  CHECK(clip_global_norm(g, 5.0, {}) == 5.0);
  CHECK(g == std::vector<double>{3.0, 4.0});
  CHECK(clip_global_norm(g, 1.0, {}) == 5.0);
  CHECK(std::abs(g[0] - 0.6) < 1e-15);
  CHECK(std::abs(g[1] - 0.8) < 1e-15);
}

TEST_CASE("train: zero epochs returns the initial weights") {
  const LstmArchitecture arch{2, 8, 0.5, {}};
  const auto init = init_weights(arch, 3);
  const auto series = standardize(testing::ar1(200, 0.9, 40, 5, 1)).values;
  const auto r = train(series, init, quick_config(0));
  CHECK(bit_equal(r.weights.values(), init.values()));
  CHECK(r.report.epoch_train_mse.empty());
}

TEST_CASE("train: identical inputs replay bit-identically") {
  const LstmArchitecture arch{2, 8, 0.5, {}};
  const auto series = standardize(testing::ar1(300, 0.9, 40, 5, 1)).values;
  const auto a = train_from_scratch(series, arch, quick_config(3, 17));
  const auto b = train_from_scratch(series, arch, quick_config(3, 17));
  const auto c = train_from_scratch(series, arch, quick_config(3, 18));
  CHECK(bit_equal(a.weights.values(), b.weights.values()));
  CHECK(a.report.epoch_train_mse == b.report.epoch_train_mse);
  CHECK_FALSE(bit_equal(a.weights.values(), c.weights.values()));
}

// Plain stateful loop: full forward, full backward, then mask. No prefix caching.
ModelWeights reference_train(std::span<const double> series, ModelWeights w, const TrainConfig& cfg) {
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t lane_len = (series.size() - 1) / batch;
  const auto mask = ParamMask::freeze_layers(w, cfg.k_frozen);
  Rng rng(derive_seed(cfg.seed, 1));
  AdamState adam = AdamState::for_weights(w, cfg.adam);
  LstmState state = LstmState::zeros(w.architecture(), cfg.batch_size);
  ForwardTape tape;
  std::vector<double> inputs(batch), targets(batch);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    state.reset();
    for (std::size_t s = 0; s < lane_len; ++s) {
      for (std::size_t b = 0; b < batch; ++b) {
        inputs[b] = series[b * lane_len + s];
        targets[b] = series[b * lane_len + s + 1];
      }
      forward(inputs, 1, state, w, PassOptions::training(w.architecture()), rng, tape);
      auto grads = backward(tape, targets, w);
      mask.apply(grads.values());
      clip_global_norm(grads.values(), cfg.clip_norm, mask);
      adam_step(w, grads.values(), adam, mask);
    }
  }
  return w;
}

TEST_CASE("train: frozen-layer training matches the plain loop bit for bit") {
  const auto series = standardize(testing::ar1(400, 0.9, 40, 5, 2)).values;
  for (int layers : {2, 3}) {
    const auto init = init_weights({layers, 8, 0.5, {1.0, 1.0}}, 7);
    for (int k = 0; k < layers; ++k) {
      auto cfg = quick_config(3, 11);
      cfg.k_frozen = k;
      cfg.track_epoch_loss = false;
      cfg.adam.learning_rate = 1e-3;
      const auto trained = train(series, init, cfg);
      CHECK(bit_equal(trained.weights.values(), reference_train(series, init, cfg).values()));
    }
  }
}

TEST_CASE("train: series shorter than two samples per lane is rejected") {
  const LstmArchitecture arch{1, 8, 0.5, {}};
  const auto series = standardize(testing::ar1(31, 0.9, 40, 5, 1)).values;
  try {
    train_from_scratch(series, arch, quick_config(1));
    FAIL("expected an argument error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kArgument);
  }
  CHECK_NOTHROW(train_from_scratch(std::span(series).subspan(0, 32), arch, quick_config(1)));
}

TEST_CASE("train: sine converges with monotone epoch loss") {
  // Dropout and ProbAct noise both off, so the epoch loss curve is a clean
  // function of the optimizer trajectory.
  const auto series = standardize(testing::sine(2000, 50.0, 20.0, 50.0)).values;
  const LstmArchitecture arch{2, 8, 0.0, {1.0, 0.0}};
  const auto r = train_from_scratch(series, arch, quick_config(700, 0));
  const auto& mse = r.report.epoch_train_mse;
  REQUIRE(mse.size() == 700);
  CHECK(mse.back() < 0.05);
  int non_increasing = 0;
  for (std::size_t e = 51; e < mse.size(); ++e) non_increasing += mse[e] <= mse[e - 1] ? 1 : 0;
  CHECK(static_cast<double>(non_increasing) / static_cast<double>(mse.size() - 51) >= 0.95);
}

TEST_CASE("grid_search: single point is selected and rows match the grid") {
  const auto raw = testing::ar1(400, 0.9, 40, 5, 2);
  const auto parts = split(raw);
  const auto tr = standardize(parts.train);
  const auto te = standardize(parts.test);
  HyperGrid grid;
  grid.layers = {2};
  grid.hidden_units = {8};
  grid.batch_sizes = {16};
  grid.epochs = {2};
  const auto r = grid_search(tr.values, te.values, te.standardizer, grid, quick_config(0));
  CHECK(r.rows.size() == 1);
  CHECK(r.best_row == 0);
  CHECK(r.best_architecture.num_layers == 2);

  grid.layers = {1, 2};
  grid.batch_sizes = {8, 16};
  const auto r2 = grid_search(tr.values, te.values, te.standardizer, grid, quick_config(0));
  CHECK(r2.rows.size() == grid.cardinality());
  const auto csv = grid_report_csv(r2.rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("grid_search: picks the argmin on teacher data") {
  const LstmArchitecture teacher_arch{2, 8, 0.0, {1.0, 0.0}};
  auto teacher = init_weights(teacher_arch, 77);
  for (auto& v : teacher.values()) v *= 2.0;
  const auto noise = testing::white_noise(1500, 0.0, 0.3, 5);
  std::vector<double> raw(1500);
  LstmState state = LstmState::zeros(teacher_arch, 1);
  ForwardTape tape;
  Rng rng(0);
  double x = 0.0;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    forward(std::span(&x, 1), 1, state, teacher, PassOptions::evaluation(), rng, tape);
    x = tape.predictions[0] + noise[k];
    raw[k] = 50.0 + 10.0 * x;
  }
  const auto parts = split(raw);
  const auto tr = standardize(parts.train);
  const auto te = standardize(parts.test);
  HyperGrid grid;
  grid.layers = {1, 2};
  grid.hidden_units = {8};
  grid.batch_sizes = {16};
  grid.epochs = {20};
  auto base = quick_config(0, 4);
  base.adam.learning_rate = 1e-3;
  const auto r = grid_search(tr.values, te.values, te.standardizer, grid, base);
  REQUIRE(r.rows.size() == 2);
  const std::size_t argmin = r.rows[0].test_mse <= r.rows[1].test_mse ? 0 : 1;
  CHECK(r.best_row == argmin);
  CHECK(r.best_architecture.num_layers == r.rows[argmin].layers);
  CHECK(r.rows[0].test_mse != r.rows[1].test_mse);
}

TEST_CASE("grid_search: every point failing is an error") {
  const auto raw = testing::ar1(40, 0.9, 40, 5, 2);
  const auto parts = split(raw);
  const auto tr = standardize(parts.train);
  const auto te = standardize(parts.test);
  HyperGrid grid;
  grid.layers = {1};
  grid.hidden_units = {8};
  grid.batch_sizes = {32};
  grid.epochs = {1};
  CHECK_THROWS_AS(grid_search(tr.values, te.values, te.standardizer, grid, quick_config(0)), Error);
}

TEST_CASE("out_of_sample_validate") {
  const LstmArchitecture arch{2, 8, 0.5, {}};
  const auto start = init_weights(arch, 1);

  SUBCASE("identical windows with no training give a zero-width interval") {
    // Tile one period so both 100-sample test windows are bitwise equal.
    const auto period = testing::sine(50, 50.0, 20.0, 50.0);
    std::vector<double> series;
    for (int k = 0; k < 20; ++k) series.insert(series.end(), period.begin(), period.end());
    const auto v = out_of_sample_validate(start, series, 2, ValidationMode::kFineTune, quick_config(0));
    REQUIRE(v.run_smape.size() == 2);
    CHECK(v.run_smape[0] == v.run_smape[1]);
    CHECK(v.ci_low == v.mean_smape);
    CHECK(v.ci_high == v.mean_smape);
  }
  SUBCASE("mean is consistent with the per-run values") {
    const auto series = testing::ar1(1000, 0.9, 40, 5, 8);
    const auto v = out_of_sample_validate(start, series, 4, ValidationMode::kScratch, quick_config(1));
    REQUIRE(v.run_smape.size() == 4);
    double sum = 0.0;
    for (double s : v.run_smape) sum += s;
    CHECK(std::abs(sum / 4.0 - v.mean_smape) < 1e-12);
    CHECK(v.ci_low < v.mean_smape);
    CHECK(v.ci_high > v.mean_smape);
  }
  SUBCASE("one run is a single split") {
    const auto series = testing::ar1(500, 0.9, 40, 5, 9);
    const auto v = out_of_sample_validate(start, series, 1, ValidationMode::kFineTune, quick_config(0));
    const auto parts = split(series);
    const auto te = standardize(parts.test);
    CHECK(v.run_smape[0] == evaluate_one_step(start, te.values, te.standardizer).smape);
    CHECK(v.ci_low == v.ci_high);
  }
  SUBCASE("too short for the requested windows") {
    const auto series = testing::ar1(100, 0.9, 40, 5, 9);
    CHECK_THROWS_AS(out_of_sample_validate(start, series, 11, ValidationMode::kFineTune, quick_config(0)), Error);
  }
}
