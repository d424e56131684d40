#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rttlab/random.hpp"

namespace rttlab {

struct ProbActParams {
  double elu_alpha = 1.0;
  double sigma = 1.0;

  friend bool operator==(const ProbActParams&, const ProbActParams&) = default;
};

/// Stacked LSTM -> dropout -> dense(N -> 1) with a ProbAct-ELU output.
struct LstmArchitecture {
  int num_layers = 2;
  int hidden_units = 8;
  double dropout_rate = 0.5;
  ProbActParams probact;

  void validate() const;
  int input_dim(int layer) const { return layer == 0 ? 1 : hidden_units; }
  std::size_t layer_parameter_count(int layer) const;
  std::size_t parameter_count() const;

  friend bool operator==(const LstmArchitecture&, const LstmArchitecture&) = default;
};

// Row blocks inside the fused 4N gate matrices.
enum Gate : int { kInputGate = 0, kForgetGate = 1, kOutputGate = 2, kCellCandidate = 3 };

/// All trainable parameters in one flat buffer so that optimizers, masks and
/// gradients share a single indexing scheme.
///
/// Layout, per layer l (input dim d = 1 for l = 0, else N):
///   w_x : 4N x d  row-major, rows grouped by gate (i, f, o, c)
///   w_h : 4N x N  row-major, same grouping
///   b   : 4N
/// followed by the dense head w_d (N) and b_d (1).
/// Layer blocks are stored in order, so layers [0, k) occupy a prefix.
class ModelWeights {
 public:
  ModelWeights() = default;
  explicit ModelWeights(const LstmArchitecture& arch);

  template <typename T>
  struct BasicLayerView {
    std::span<T> w_x;
    std::span<T> w_h;
    std::span<T> b;
    int input_dim;
    int hidden;
  };
  using LayerView = BasicLayerView<double>;
  using ConstLayerView = BasicLayerView<const double>;

  const LstmArchitecture& architecture() const { return arch_; }
  LayerView layer(int l);
  ConstLayerView layer(int l) const;
  std::span<double> dense_w();
  std::span<const double> dense_w() const;
  double& dense_b() { return values_.back(); }
  double dense_b() const { return values_.back(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  /// First flat index after layer l's block.
  std::size_t layer_end(int l) const { return offsets_[static_cast<std::size_t>(l) + 1]; }
  std::size_t layer_begin(int l) const { return offsets_[static_cast<std::size_t>(l)]; }

  void set_zero();
  bool all_finite() const;

  friend bool operator==(const ModelWeights& a, const ModelWeights& b) {
    return a.arch_ == b.arch_ && a.values_ == b.values_;
  }

 private:
  LstmArchitecture arch_;
  std::vector<std::size_t> offsets_;  // num_layers + 1 entries
  std::vector<double> values_;
};

/// Uniform Glorot-style init; forget-gate biases 1, other biases 0.
ModelWeights init_weights(const LstmArchitecture& arch, std::uint64_t seed);

/// Per-parameter trainability. A set entry means the parameter is frozen.
class ParamMask {
 public:
  ParamMask() = default;
  explicit ParamMask(std::size_t size) : frozen_(size, 0) {}

  /// Freezes the first k LSTM layers (the dense head is never frozen).
  static ParamMask freeze_layers(const ModelWeights& weights, int k_frozen);

  bool frozen(std::size_t i) const { return !frozen_.empty() && frozen_[i] != 0; }
  void set_frozen(std::size_t i, bool f = true) { frozen_[i] = f ? 1 : 0; }
  std::size_t size() const { return frozen_.size(); }
  std::size_t trainable_count() const;
  bool empty() const { return frozen_.empty(); }

  /// Zeroes every frozen entry of grads.
  void apply(std::span<double> grads) const;

 private:
  std::vector<std::uint8_t> frozen_;
};

/// h and c per layer, lane-major (lane * N + unit).
struct LstmState {
  int batch = 0;
  std::vector<std::vector<double>> h;
  std::vector<std::vector<double>> c;

  static LstmState zeros(const LstmArchitecture& arch, int batch);
  void reset();
};

struct GateRecord {
  std::vector<double> i, f, o, g;  // post-activation
  std::vector<double> c, h;
};

/// One cell step for a single lane. Throws kContractViolation on shape mismatch.
GateRecord lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                             std::span<const double> c_prev, const ModelWeights::ConstLayerView& layer);

enum class Mode { kTrain, kInfer };

/// Controls the stochastic parts of a pass. Dropout is only active in kTrain.
struct PassOptions {
  Mode mode = Mode::kInfer;
  double noise_sigma = 0.0;

  static PassOptions training(const LstmArchitecture& arch) { return {Mode::kTrain, arch.probact.sigma}; }
  static PassOptions evaluation() { return {Mode::kInfer, 0.0}; }
  static PassOptions generation(double sigma) { return {Mode::kInfer, sigma}; }
};

double elu(double z, double alpha);

/// ELU(z) + sigma * eps with eps ~ N(0, 1). No draw is taken when sigma == 0.
double probact_elu(double z, const ProbActParams& params, Rng& rng);

/// Activations recorded by forward() for backpropagation. Buffers are reused
/// across calls, so keep one tape per training job.
struct ForwardTape {
  int steps = 0;
  int batch = 0;
  int layers = 0;
  int hidden = 0;
  // Indexed [t * layers + l], each lane-major B x dim.
  std::vector<std::vector<double>> x, h_prev, c_prev, i, f, o, g, c, tanh_c, h;
  std::vector<double> dropout_mask;  // B x N, already scaled by 1/(1-p); empty if none
  std::vector<double> head_pre;      // T x B, dense output before activation
  std::vector<double> noise;         // T x B, sigma * eps added by ProbAct
  std::vector<double> predictions;   // T x B

  std::size_t index(int t, int l) const { return static_cast<std::size_t>(t) * layers + l; }
};

/// Runs `steps` timesteps of a B-lane batch. inputs is time-major (t * B + lane).
/// state is read and updated in place. In kTrain mode a dropout mask is drawn
/// once per call unless fixed_mask is given (B x N, pre-scaled).
/// Throws kNumeric naming the timestep if an output is non-finite.
void forward(std::span<const double> inputs, int steps, LstmState& state, const ModelWeights& weights,
             PassOptions options, Rng& rng, ForwardTape& tape, std::span<const double> fixed_mask = {});

/// forward() starting at layer first_layer. inputs holds that layer's input,
/// time-major (t * B + lane) * input_dim. Lower layers are not run; their state
/// and tape slots are left untouched, so pair this with backward(..., first_layer).
void forward_from(int first_layer, std::span<const double> inputs, int steps, LstmState& state,
                  const ModelWeights& weights, PassOptions options, Rng& rng, ForwardTape& tape,
                  std::span<const double> fixed_mask = {});

struct ForwardResult {
  std::vector<double> predictions;
  LstmState state;
  ForwardTape tape;
};

ForwardResult forward(std::span<const double> inputs, int steps, const LstmState& state,
                      const ModelWeights& weights, PassOptions options, Rng& rng);

double mse_loss(std::span<const double> predictions, std::span<const double> targets);

/// Exact d(MSE)/d(theta) by backpropagation through time over the whole tape.
/// Noise is treated as an additive constant; dropout uses the recorded mask.
/// grads is resized/overwritten. Layers below first_layer are skipped and keep
/// zero gradients; the result for the remaining parameters is unchanged.
void backward(const ForwardTape& tape, std::span<const double> targets, const ModelWeights& weights,
              ModelWeights& grads, int first_layer = 0);

ModelWeights backward(const ForwardTape& tape, std::span<const double> targets, const ModelWeights& weights);

}  // namespace rttlab
