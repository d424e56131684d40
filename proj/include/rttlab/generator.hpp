#pragma once

#include <cstdint>
#include <optional>

#include "rttlab/trace.hpp"
#include "rttlab/transfer.hpp"

namespace rttlab {

inline constexpr int kGenerationBurnIn = 10;
inline constexpr double kMinGeneratedRttMs = 0.1;

struct GenerationSpec {
  int length = 2500;
  /// Seed RTT in ms; defaults to the model's training-data median.
  std::optional<double> seed_value;
  std::uint64_t rng_seed = 0;
  /// ProbAct noise override; defaults to the model architecture's sigma.
  std::optional<double> sigma;
};

/// Autoregressive synthesis: the standardized seed is fed for kGenerationBurnIn
/// warm-up steps, then each prediction (dropout off, ProbAct noise on) becomes
/// the next input. Outputs are destandardized and clamped to >= 0.1 ms.
/// Throws kGenerationDiverged naming the step if an output is non-finite.
RttTrace generate(const LstmModel& model, const GenerationSpec& spec);

}  // namespace rttlab
