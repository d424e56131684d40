#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rttlab/trace.hpp"

namespace rttlab {

struct DelayProfile {
  RttTrace trace;
  double update_interval_ms = 500.0;
  double reconfig_cost_ms = 4.0;
  double uplink_fraction = 0.5;

  void validate() const;
};

struct PingSchedule {
  std::vector<double> send_times_ms;

  /// count pings every interval_ms starting at offset_ms.
  static PingSchedule periodic(std::size_t count = 600, double interval_ms = 500.0, double offset_ms = 0.0);
  void validate() const;
};

/// Schedule aligned with a profile's windows: one ping per window, sent just
/// after the reconfiguration hold.
PingSchedule matching_schedule(const DelayProfile& profile, std::size_t count);

/// One-way delay active on a path direction at time t (ms): window
/// k = floor(t / interval) uses trace[min(k, last)] * fraction, except that the
/// first reconfig_cost_ms of window k >= 1 still apply window k-1's value.
double active_delay(const DelayProfile& profile, double t_ms, double fraction);

/// Replays profile over a virtual clock. Each ping takes the uplink delay active
/// when it enters the uplink and the downlink delay active when it enters the
/// downlink; measured RTT = arrival - send.
std::vector<double> run_emulation(const DelayProfile& profile, const PingSchedule& schedule);

inline constexpr std::array<double, 4> kReportPercentiles{25.0, 50.0, 75.0, 90.0};

struct PercentileRow {
  double percentile = 0.0;
  double input_value = 0.0;
  double measured_value = 0.0;  // over all runs pooled
  double abs_delta = 0.0;
  double nrmse = 0.0;
};

struct EmulationReport {
  std::vector<PercentileRow> rows;
  std::size_t run_count = 0;
  std::size_t measured_count = 0;  // per run
};

EmulationReport evaluate_accuracy(std::span<const double> input_trace, const std::vector<std::vector<double>>& runs);

std::string emulation_report_json(const EmulationReport& report);

/// Runs `runs` replays. Run 0 uses `schedule` as given; run r >= 1 shifts every
/// send time by a phase drawn uniformly from [0, update_interval) with a
/// generator seeded from (seed, r).
std::vector<std::vector<double>> run_emulations(const DelayProfile& profile, const PingSchedule& schedule, int runs,
                                                std::uint64_t seed);

}  // namespace rttlab
