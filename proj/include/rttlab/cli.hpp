#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace rttlab::cli {

/// Target-sample size below which finetune warns (it still proceeds).
inline constexpr std::size_t kRecommendedTargetSamples = 6000;

/// Defaults shared by every subcommand; `--config <file>` loads the same keys
/// from JSON and explicit flags override them.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int batch_size = 16;
  int epochs = 700;
  int k_frozen = 1;
  double learning_rate = 1e-5;
  std::vector<int> layers{1, 2, 3, 4};
  std::vector<int> hidden_units{8, 16, 32, 64, 128, 256, 512};
  std::vector<int> batch_sizes{16};
  std::vector<int> epoch_options{700};
  int generation_length = 2500;
  double update_interval_ms = 500.0;
  double reconfig_cost_ms = 4.0;
  double uplink_fraction = 0.5;
  int pings = 600;
  double ping_interval_ms = 500.0;
  int runs = 1;
};

PipelineConfig load_config(const std::string& path);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace rttlab::cli
