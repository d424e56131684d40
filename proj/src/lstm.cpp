#include "rttlab/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rttlab/error.hpp"

namespace rttlab {

namespace {

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// One lane of one cell. a is 4N scratch.
void cell_step(const double* x, const double* h_prev, const double* c_prev, const ModelWeights::ConstLayerView& w,
               double* a, double* i, double* f, double* o, double* g, double* c, double* tanh_c, double* h) {
  const int n = w.hidden;
  const int d = w.input_dim;
  const double* wx = w.w_x.data();
  const double* wh = w.w_h.data();
  for (int r = 0; r < 4 * n; ++r) {
    double acc = w.b[static_cast<std::size_t>(r)];
    const double* wx_row = wx + static_cast<std::ptrdiff_t>(r) * d;
    for (int q = 0; q < d; ++q) acc += wx_row[q] * x[q];
    const double* wh_row = wh + static_cast<std::ptrdiff_t>(r) * n;
    for (int q = 0; q < n; ++q) acc += wh_row[q] * h_prev[q];
    a[r] = acc;
  }
  for (int j = 0; j < n; ++j) {
    i[j] = sigmoid(a[j]);
    f[j] = sigmoid(a[n + j]);
    o[j] = sigmoid(a[2 * n + j]);
    g[j] = std::tanh(a[3 * n + j]);
    c[j] = f[j] * c_prev[j] + i[j] * g[j];
    tanh_c[j] = std::tanh(c[j]);
    h[j] = o[j] * tanh_c[j];
  }
}

void resize_slots(std::vector<std::vector<double>>& slots, std::size_t count, std::size_t width) {
  slots.resize(count);
  for (auto& s : slots) s.resize(width);
}

}  // namespace

void LstmArchitecture::validate() const {
  require(num_layers >= 1 && num_layers <= 4, ErrorKind::kArgument, "num_layers must be in [1, 4]");
  require(hidden_units >= 1, ErrorKind::kArgument, "hidden_units must be >= 1");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorKind::kArgument, "dropout_rate must be in [0, 1)");
  require(probact.elu_alpha > 0.0 && std::isfinite(probact.elu_alpha), ErrorKind::kArgument,
          "ProbAct ELU alpha must be > 0");
  require(probact.sigma >= 0.0 && std::isfinite(probact.sigma), ErrorKind::kArgument, "ProbAct sigma must be >= 0");
}

std::size_t LstmArchitecture::layer_parameter_count(int layer) const {
  const auto n = static_cast<std::size_t>(hidden_units);
  const auto d = static_cast<std::size_t>(input_dim(layer));
  return 4 * n * d + 4 * n * n + 4 * n;
}

std::size_t LstmArchitecture::parameter_count() const {
  std::size_t total = 0;
  for (int l = 0; l < num_layers; ++l) total += layer_parameter_count(l);
  return total + static_cast<std::size_t>(hidden_units) + 1;
}

ModelWeights::ModelWeights(const LstmArchitecture& arch) : arch_(arch) {
  arch_.validate();
  offsets_.push_back(0);
  for (int l = 0; l < arch_.num_layers; ++l) offsets_.push_back(offsets_.back() + arch_.layer_parameter_count(l));
  values_.assign(arch_.parameter_count(), 0.0);
}

ModelWeights::LayerView ModelWeights::layer(int l) {
  const auto n = static_cast<std::size_t>(arch_.hidden_units);
  const auto d = static_cast<std::size_t>(arch_.input_dim(l));
  double* base = values_.data() + offsets_.at(static_cast<std::size_t>(l));
  return {{base, 4 * n * d}, {base + 4 * n * d, 4 * n * n}, {base + 4 * n * d + 4 * n * n, 4 * n},
          static_cast<int>(d), arch_.hidden_units};
}

ModelWeights::ConstLayerView ModelWeights::layer(int l) const {
  const auto n = static_cast<std::size_t>(arch_.hidden_units);
  const auto d = static_cast<std::size_t>(arch_.input_dim(l));
  const double* base = values_.data() + offsets_.at(static_cast<std::size_t>(l));
  return {{base, 4 * n * d}, {base + 4 * n * d, 4 * n * n}, {base + 4 * n * d + 4 * n * n, 4 * n},
          static_cast<int>(d), arch_.hidden_units};
}

std::span<double> ModelWeights::dense_w() {
  return {values_.data() + offsets_.back(), static_cast<std::size_t>(arch_.hidden_units)};
}

std::span<const double> ModelWeights::dense_w() const {
  return {values_.data() + offsets_.back(), static_cast<std::size_t>(arch_.hidden_units)};
}

void ModelWeights::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

bool ModelWeights::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ModelWeights init_weights(const LstmArchitecture& arch, std::uint64_t seed) {
  ModelWeights w(arch);
  Rng rng(seed);
  const int n = arch.hidden_units;
  auto fill_uniform = [&](std::span<double> block, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : block) v = dist(rng);
  };
  for (int l = 0; l < arch.num_layers; ++l) {
    auto layer = w.layer(l);
    fill_uniform(layer.w_x, layer.input_dim, 4 * n);
    fill_uniform(layer.w_h, n, 4 * n);
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
    std::fill(layer.b.begin() + kForgetGate * n, layer.b.begin() + (kForgetGate + 1) * n, 1.0);
  }
  fill_uniform(w.dense_w(), n, 1);
  w.dense_b() = 0.0;
  return w;
}

ParamMask ParamMask::freeze_layers(const ModelWeights& weights, int k_frozen) {
  const int layers = weights.architecture().num_layers;
  if (k_frozen < 0 || k_frozen >= layers) {
    fail(ErrorKind::kArgument, "k_frozen must be in [0, " + std::to_string(layers) + ")");
  }
  ParamMask mask(weights.size());
  const std::size_t end = k_frozen == 0 ? 0 : weights.layer_end(k_frozen - 1);
  for (std::size_t i = 0; i < end; ++i) mask.set_frozen(i);
  return mask;
}

std::size_t ParamMask::trainable_count() const {
  return static_cast<std::size_t>(std::count(frozen_.begin(), frozen_.end(), std::uint8_t{0}));
}

void ParamMask::apply(std::span<double> grads) const {
  if (frozen_.empty()) return;
  require(grads.size() == frozen_.size(), ErrorKind::kContractViolation, "mask/gradient size mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (frozen_[i]) grads[i] = 0.0;
  }
}

LstmState LstmState::zeros(const LstmArchitecture& arch, int batch) {
  require(batch >= 1, ErrorKind::kArgument, "batch must be >= 1");
  LstmState s;
  s.batch = batch;
  const auto width = static_cast<std::size_t>(batch) * static_cast<std::size_t>(arch.hidden_units);
  s.h.assign(static_cast<std::size_t>(arch.num_layers), std::vector<double>(width, 0.0));
  s.c = s.h;
  return s;
}

void LstmState::reset() {
  for (auto& v : h) std::fill(v.begin(), v.end(), 0.0);
  for (auto& v : c) std::fill(v.begin(), v.end(), 0.0);
}

GateRecord lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                             std::span<const double> c_prev, const ModelWeights::ConstLayerView& layer) {
  const auto n = static_cast<std::size_t>(layer.hidden);
  if (x.size() != static_cast<std::size_t>(layer.input_dim) || h_prev.size() != n || c_prev.size() != n) {
    fail(ErrorKind::kContractViolation, "lstm_cell_forward: input/state shape does not match layer");
  }
  GateRecord r{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n),
               std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  std::vector<double> a(4 * n), tanh_c(n);
  cell_step(x.data(), h_prev.data(), c_prev.data(), layer, a.data(), r.i.data(), r.f.data(), r.o.data(), r.g.data(),
            r.c.data(), tanh_c.data(), r.h.data());
  return r;
}

double elu(double z, double alpha) { return z > 0.0 ? z : alpha * std::expm1(z); }

double probact_elu(double z, const ProbActParams& params, Rng& rng) {
  const double base = elu(z, params.elu_alpha);
  if (params.sigma == 0.0) return base;
  std::normal_distribution<double> normal(0.0, 1.0);
  return base + params.sigma * normal(rng);
}

void forward_from(int first_layer, std::span<const double> inputs, int steps, LstmState& state,
                  const ModelWeights& weights, PassOptions options, Rng& rng, ForwardTape& tape,
                  std::span<const double> fixed_mask) {
  const auto& arch = weights.architecture();
  const int batch = state.batch;
  const int layers = arch.num_layers;
  const int n = arch.hidden_units;
  const auto bn = static_cast<std::size_t>(batch) * static_cast<std::size_t>(n);
  require(steps >= 1, ErrorKind::kContractViolation, "forward needs at least one timestep");
  require(first_layer >= 0 && first_layer < layers, ErrorKind::kContractViolation,
          "forward: first_layer must be in [0, L)");
  const int d_first = arch.input_dim(first_layer);
  require(inputs.size() == static_cast<std::size_t>(steps) * static_cast<std::size_t>(batch) * d_first,
          ErrorKind::kContractViolation, "forward: inputs must hold steps * batch * input_dim values");
  require(state.h.size() == static_cast<std::size_t>(layers) && state.h[0].size() == bn,
          ErrorKind::kContractViolation, "forward: state does not match architecture/batch");

  tape.steps = steps;
  tape.batch = batch;
  tape.layers = layers;
  tape.hidden = n;
  const auto slots = static_cast<std::size_t>(steps) * static_cast<std::size_t>(layers);
  tape.x.resize(slots);
  for (int t = 0; t < steps; ++t) {
    for (int l = 0; l < layers; ++l) {
      tape.x[tape.index(t, l)].resize(static_cast<std::size_t>(batch) * static_cast<std::size_t>(arch.input_dim(l)));
    }
  }
  for (auto* slot : {&tape.h_prev, &tape.c_prev, &tape.i, &tape.f, &tape.o, &tape.g, &tape.c, &tape.tanh_c, &tape.h}) {
    resize_slots(*slot, slots, bn);
  }
  const auto tb = static_cast<std::size_t>(steps) * static_cast<std::size_t>(batch);
  tape.head_pre.resize(tb);
  tape.noise.assign(tb, 0.0);
  tape.predictions.resize(tb);

  tape.dropout_mask.clear();
  if (options.mode == Mode::kTrain && arch.dropout_rate > 0.0) {
    if (!fixed_mask.empty()) {
      require(fixed_mask.size() == bn, ErrorKind::kContractViolation, "forward: fixed mask must be batch x hidden");
      tape.dropout_mask.assign(fixed_mask.begin(), fixed_mask.end());
    } else {
      const double keep = 1.0 - arch.dropout_rate;
      std::bernoulli_distribution bern(keep);
      tape.dropout_mask.resize(bn);
      for (double& m : tape.dropout_mask) m = bern(rng) ? 1.0 / keep : 0.0;
    }
  }

  std::vector<double> scratch(4 * static_cast<std::size_t>(n));
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto w_d = weights.dense_w();
  const double b_d = weights.dense_b();

  for (int t = 0; t < steps; ++t) {
    for (int l = first_layer; l < layers; ++l) {
      const std::size_t idx = tape.index(t, l);
      auto& x = tape.x[idx];
      const int d = arch.input_dim(l);
      if (l == first_layer) {
        const auto block = static_cast<std::size_t>(batch) * static_cast<std::size_t>(d);
        const auto from = inputs.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(t) * block);
        std::copy(from, from + static_cast<std::ptrdiff_t>(block), x.begin());
      } else {
        x = tape.h[tape.index(t, l - 1)];
      }
      tape.h_prev[idx] = state.h[static_cast<std::size_t>(l)];
      tape.c_prev[idx] = state.c[static_cast<std::size_t>(l)];
      const auto lw = weights.layer(l);
      for (int b = 0; b < batch; ++b) {
        const std::size_t off = static_cast<std::size_t>(b) * n;
        cell_step(x.data() + static_cast<std::size_t>(b) * d, tape.h_prev[idx].data() + off,
                  tape.c_prev[idx].data() + off, lw, scratch.data(), tape.i[idx].data() + off,
                  tape.f[idx].data() + off, tape.o[idx].data() + off, tape.g[idx].data() + off,
                  tape.c[idx].data() + off, tape.tanh_c[idx].data() + off, tape.h[idx].data() + off);
      }
      state.h[static_cast<std::size_t>(l)] = tape.h[idx];
      state.c[static_cast<std::size_t>(l)] = tape.c[idx];
    }
    const auto& top = tape.h[tape.index(t, layers - 1)];
    for (int b = 0; b < batch; ++b) {
      double z = b_d;
      const std::size_t off = static_cast<std::size_t>(b) * n;
      for (int j = 0; j < n; ++j) {
        const double m = tape.dropout_mask.empty() ? 1.0 : tape.dropout_mask[off + j];
        z += w_d[static_cast<std::size_t>(j)] * top[off + j] * m;
      }
      const std::size_t k = static_cast<std::size_t>(t) * batch + b;
      tape.head_pre[k] = z;
      double out = elu(z, arch.probact.elu_alpha);
      if (options.noise_sigma != 0.0) {
        tape.noise[k] = options.noise_sigma * normal(rng);
        out += tape.noise[k];
      }
      if (!std::isfinite(out)) {
        fail(ErrorKind::kNumeric, "non-finite output at timestep " + std::to_string(t) + ", lane " + std::to_string(b));
      }
      tape.predictions[k] = out;
    }
  }
}

void forward(std::span<const double> inputs, int steps, LstmState& state, const ModelWeights& weights,
             PassOptions options, Rng& rng, ForwardTape& tape, std::span<const double> fixed_mask) {
  forward_from(0, inputs, steps, state, weights, options, rng, tape, fixed_mask);
}

ForwardResult forward(std::span<const double> inputs, int steps, const LstmState& state, const ModelWeights& weights,
                      PassOptions options, Rng& rng) {
  ForwardResult result;
  result.state = state;
  forward(inputs, steps, result.state, weights, options, rng, result.tape);
  result.predictions = result.tape.predictions;
  return result;
}

double mse_loss(std::span<const double> predictions, std::span<const double> targets) {
  require(predictions.size() == targets.size(), ErrorKind::kContractViolation, "mse_loss: length mismatch");
  require(!predictions.empty(), ErrorKind::kContractViolation, "mse_loss: empty input");
  double sum = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double e = predictions[k] - targets[k];
    sum += e * e;
  }
  return sum / static_cast<double>(predictions.size());
}

void backward(const ForwardTape& tape, std::span<const double> targets, const ModelWeights& weights,
              ModelWeights& grads, int first_layer) {
  const auto& arch = weights.architecture();
  const int steps = tape.steps;
  const int batch = tape.batch;
  const int layers = tape.layers;
  const int n = tape.hidden;
  if (layers != arch.num_layers || n != arch.hidden_units || tape.predictions.empty()) {
    fail(ErrorKind::kContractViolation, "backward: tape was not produced by these weights");
  }
  require(targets.size() == tape.predictions.size(), ErrorKind::kContractViolation,
          "backward: targets must match the tape's predictions");
  require(first_layer >= 0 && first_layer < layers, ErrorKind::kContractViolation,
          "backward: first_layer must be in [0, L)");
  if (grads.size() != weights.size() || !(grads.architecture() == arch)) {
    grads = ModelWeights(arch);
  } else {
    grads.set_zero();
  }

  const auto bn = static_cast<std::size_t>(batch) * static_cast<std::size_t>(n);
  const auto n4 = 4 * static_cast<std::size_t>(n);
  std::vector<std::vector<double>> dh_next(static_cast<std::size_t>(layers), std::vector<double>(bn, 0.0));
  std::vector<std::vector<double>> dc_next = dh_next;
  std::vector<double> dh(bn), dx(bn), da(static_cast<std::size_t>(batch) * n4);

  const double scale = 2.0 / static_cast<double>(tape.predictions.size());
  const double alpha = arch.probact.elu_alpha;
  const auto w_d = weights.dense_w();
  auto g_wd = grads.dense_w();

  for (int t = steps - 1; t >= 0; --t) {
    const auto& top = tape.h[tape.index(t, layers - 1)];
    for (int b = 0; b < batch; ++b) {
      const std::size_t k = static_cast<std::size_t>(t) * batch + b;
      const double dpred = scale * (tape.predictions[k] - targets[k]);
      const double z = tape.head_pre[k];
      const double dz = dpred * (z > 0.0 ? 1.0 : alpha * std::exp(z));
      grads.dense_b() += dz;
      const std::size_t off = static_cast<std::size_t>(b) * n;
      for (int j = 0; j < n; ++j) {
        const double m = tape.dropout_mask.empty() ? 1.0 : tape.dropout_mask[off + j];
        g_wd[static_cast<std::size_t>(j)] += dz * top[off + j] * m;
        dh[off + j] = dz * w_d[static_cast<std::size_t>(j)] * m;
      }
    }

    for (int l = layers - 1; l >= first_layer; --l) {
      const std::size_t idx = tape.index(t, l);
      const auto& i = tape.i[idx];
      const auto& f = tape.f[idx];
      const auto& o = tape.o[idx];
      const auto& g = tape.g[idx];
      const auto& tc = tape.tanh_c[idx];
      const auto& cp = tape.c_prev[idx];
      auto& dcn = dc_next[static_cast<std::size_t>(l)];
      auto& dhn = dh_next[static_cast<std::size_t>(l)];
      for (int b = 0; b < batch; ++b) {
        const std::size_t off = static_cast<std::size_t>(b) * n;
        double* a = da.data() + static_cast<std::size_t>(b) * n4;
        for (int j = 0; j < n; ++j) {
          const std::size_t u = off + j;
          const double dh_total = dh[u] + dhn[u];
          const double d_o = dh_total * tc[u];
          const double dc = dcn[u] + dh_total * o[u] * (1.0 - tc[u] * tc[u]);
          a[j] = dc * g[u] * i[u] * (1.0 - i[u]);
          a[n + j] = dc * cp[u] * f[u] * (1.0 - f[u]);
          a[2 * n + j] = d_o * o[u] * (1.0 - o[u]);
          a[3 * n + j] = dc * i[u] * (1.0 - g[u] * g[u]);
          dcn[u] = dc * f[u];
        }
      }

      const auto lw = weights.layer(l);
      auto lg = grads.layer(l);
      const int d = lw.input_dim;
      const auto& x = tape.x[idx];
      const auto& hp = tape.h_prev[idx];
      std::fill(dhn.begin(), dhn.end(), 0.0);
      const bool need_dx = l > first_layer;
      if (need_dx) std::fill(dx.begin(), dx.end(), 0.0);
      for (int b = 0; b < batch; ++b) {
        const double* a = da.data() + static_cast<std::size_t>(b) * n4;
        const double* xb = x.data() + static_cast<std::size_t>(b) * d;
        const double* hb = hp.data() + static_cast<std::size_t>(b) * n;
        double* dhb = dhn.data() + static_cast<std::size_t>(b) * n;
        double* dxb = dx.data() + static_cast<std::size_t>(b) * n;
        for (std::size_t r = 0; r < n4; ++r) {
          const double ar = a[r];
          lg.b[r] += ar;
          double* gwx = lg.w_x.data() + r * static_cast<std::size_t>(d);
          const double* wx = lw.w_x.data() + r * static_cast<std::size_t>(d);
          for (int q = 0; q < d; ++q) {
            gwx[q] += ar * xb[q];
            if (need_dx) dxb[q] += wx[q] * ar;
          }
          double* gwh = lg.w_h.data() + r * static_cast<std::size_t>(n);
          const double* wh = lw.w_h.data() + r * static_cast<std::size_t>(n);
          for (int q = 0; q < n; ++q) {
            gwh[q] += ar * hb[q];
            dhb[q] += wh[q] * ar;
          }
        }
      }
      if (need_dx) dh.swap(dx);
    }
  }
}

ModelWeights backward(const ForwardTape& tape, std::span<const double> targets, const ModelWeights& weights) {
  ModelWeights grads(weights.architecture());
  backward(tape, targets, weights, grads, 0);
  return grads;
}

}  // namespace rttlab
