#include "rttlab/netem.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "rttlab/error.hpp"
#include "rttlab/metrics.hpp"
#include "rttlab/random.hpp"

namespace rttlab {

void DelayProfile::validate() const {
  trace.validate();
  require(update_interval_ms > 0.0 && std::isfinite(update_interval_ms), ErrorKind::kArgument,
          "update_interval_ms must be > 0");
  require(reconfig_cost_ms >= 0.0 && reconfig_cost_ms < update_interval_ms, ErrorKind::kArgument,
          "reconfig_cost_ms must be in [0, update_interval_ms)");
  require(uplink_fraction > 0.0 && uplink_fraction < 1.0, ErrorKind::kArgument, "uplink_fraction must be in (0, 1)");
}

PingSchedule PingSchedule::periodic(std::size_t count, double interval_ms, double offset_ms) {
  require(interval_ms > 0.0, ErrorKind::kArgument, "ping interval must be > 0");
  PingSchedule s;
  s.send_times_ms.reserve(count);
  for (std::size_t k = 0; k < count; ++k) s.send_times_ms.push_back(offset_ms + static_cast<double>(k) * interval_ms);
  return s;
}

void PingSchedule::validate() const {
  for (std::size_t k = 1; k < send_times_ms.size(); ++k) {
    require(send_times_ms[k] > send_times_ms[k - 1], ErrorKind::kArgument, "ping send times must be strictly increasing");
  }
  for (double t : send_times_ms) require(t >= 0.0 && std::isfinite(t), ErrorKind::kArgument, "send times must be >= 0");
}

PingSchedule matching_schedule(const DelayProfile& profile, std::size_t count) {
  return PingSchedule::periodic(count, profile.update_interval_ms, profile.reconfig_cost_ms);
}

double active_delay(const DelayProfile& profile, double t_ms, double fraction) {
  const auto& v = profile.trace.samples;
  auto window = static_cast<std::size_t>(std::floor(t_ms / profile.update_interval_ms));
  const double into = t_ms - static_cast<double>(window) * profile.update_interval_ms;
  if (window >= 1 && into < profile.reconfig_cost_ms) --window;
  return v[std::min(window, v.size() - 1)] * fraction;
}

std::vector<double> run_emulation(const DelayProfile& profile, const PingSchedule& schedule) {
  profile.validate();
  schedule.validate();
  std::vector<double> measured;
  measured.reserve(schedule.send_times_ms.size());
  for (double send : schedule.send_times_ms) {
    const double up = active_delay(profile, send, profile.uplink_fraction);
    const double turnaround = send + up;
    const double down = active_delay(profile, turnaround, 1.0 - profile.uplink_fraction);
    // arrival - send, summed directly so no rounding from the absolute clock leaks in
    measured.push_back(up + down);
  }
  return measured;
}

std::vector<std::vector<double>> run_emulations(const DelayProfile& profile, const PingSchedule& schedule, int runs,
                                                std::uint64_t seed) {
  require(runs >= 1, ErrorKind::kArgument, "runs must be >= 1");
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(runs));
  out.push_back(run_emulation(profile, schedule));
  for (int r = 1; r < runs; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    std::uniform_real_distribution<double> phase_dist(0.0, profile.update_interval_ms);
    const double phase = phase_dist(rng);
    PingSchedule shifted = schedule;
    for (double& t : shifted.send_times_ms) t += phase;
    out.push_back(run_emulation(profile, shifted));
  }
  return out;
}

EmulationReport evaluate_accuracy(std::span<const double> input_trace, const std::vector<std::vector<double>>& runs) {
  require(!runs.empty(), ErrorKind::kArgument, "evaluate_accuracy: needs at least one run");
  require(input_trace.size() >= 2, ErrorKind::kDegenerateInput, "evaluate_accuracy: input trace too short");
  if (population_std(input_trace) == 0.0) {
    fail(ErrorKind::kDegenerateInput, "evaluate_accuracy: input trace is constant");
  }
  std::vector<double> pooled;
  for (const auto& run : runs) {
    require(!run.empty(), ErrorKind::kArgument, "evaluate_accuracy: empty run");
    pooled.insert(pooled.end(), run.begin(), run.end());
  }
  EmulationReport report;
  report.run_count = runs.size();
  report.measured_count = runs.front().size();
  for (double p : kReportPercentiles) {
    PercentileRow row;
    row.percentile = p;
    row.input_value = percentile(input_trace, p);
    row.measured_value = percentile(pooled, p);
    row.abs_delta = std::abs(row.measured_value - row.input_value);
    row.nrmse = nrmse_percentile(input_trace, runs, p);
    report.rows.push_back(row);
  }
  return report;
}

std::string emulation_report_json(const EmulationReport& report) {
  nlohmann::ordered_json doc;
  doc["run_count"] = report.run_count;
  doc["measured_per_run"] = report.measured_count;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"percentile", r.percentile},
                    {"input_ms", r.input_value},
                    {"emulated_ms", r.measured_value},
                    {"delta_ms", r.abs_delta},
                    {"nrmse", r.nrmse}});
  }
  doc["percentiles"] = std::move(rows);
  return doc.dump(2) + "\n";
}

}  // namespace rttlab
