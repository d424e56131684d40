#include "rttlab/generator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rttlab/error.hpp"

namespace rttlab {

RttTrace generate(const LstmModel& model, const GenerationSpec& spec) {
  require(spec.length >= 1, ErrorKind::kArgument, "generation length must be >= 1");
  model.validate();
  const double seed_ms = spec.seed_value.value_or(model.metadata.median_ms);
  if (!(seed_ms > 0.0) || !std::isfinite(seed_ms)) {
    fail(ErrorKind::kArgument, "generation seed value must be a positive RTT (got " + format_double(seed_ms) + ")");
  }
  const double sigma = spec.sigma.value_or(model.architecture().probact.sigma);
  require(sigma >= 0.0 && std::isfinite(sigma), ErrorKind::kArgument, "sigma override must be >= 0");

  Rng rng(spec.rng_seed);
  LstmState state = LstmState::zeros(model.architecture(), 1);
  ForwardTape tape;
  const PassOptions opts = PassOptions::generation(sigma);
  double input = model.standardizer.apply(seed_ms);

  auto step = [&](int k) {
    try {
      forward(std::span<const double>(&input, 1), 1, state, model.weights, opts, rng, tape);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNumeric) throw;
      fail(ErrorKind::kGenerationDiverged, "non-finite output at step " + std::to_string(k));
    }
    return tape.predictions[0];
  };

  for (int k = 0; k < kGenerationBurnIn; ++k) step(-kGenerationBurnIn + k);

  RttTrace out;
  out.interval_ms = kDefaultIntervalMs;
  out.context = "synthetic:" + model.metadata.context;
  out.samples.reserve(static_cast<std::size_t>(spec.length));
  for (int k = 0; k < spec.length; ++k) {
    const double z = step(k);
    const double ms = model.standardizer.invert(z);
    if (!std::isfinite(ms)) fail(ErrorKind::kGenerationDiverged, "non-finite output at step " + std::to_string(k));
    out.samples.push_back(std::max(ms, kMinGeneratedRttMs));
    input = z;
  }
  return out;
}

}  // namespace rttlab
