#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rttlab {

inline constexpr double kDefaultIntervalMs = 500.0;

/// Ordered RTT samples in milliseconds taken at a fixed sampling period.
struct RttTrace {
  std::vector<double> samples;
  double interval_ms = kDefaultIntervalMs;
  std::string context;

  std::size_t size() const { return samples.size(); }

  /// Throws kValidation unless every sample is finite and > 0, the trace is
  /// non-empty and interval_ms > 0.
  void validate() const;
};

/// Parses trace-csv: one `timestamp_ms,rtt_ms` record per line, no header.
/// Timestamps must be non-decreasing; the interval is the modal delta
/// (smallest delta wins a tie, 500 ms for a single sample).
RttTrace parse_trace(std::string_view document);

/// Emits trace-csv with timestamps k * interval_ms, shortest round-trip decimals.
std::string serialize_trace(const RttTrace& trace);

/// Same CSV layout as trace-csv but accepts any finite value. Used for
/// standardized fingerprints, which are not RTTs.
std::vector<double> parse_series_csv(std::string_view document);
std::string serialize_series_csv(std::span<const double> values, double interval_ms = kDefaultIntervalMs);

RttTrace read_trace_file(const std::string& path);
void write_trace_file(const std::string& path, const RttTrace& trace);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view contents);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

struct Standardizer {
  double mean = 0.0;
  double std = 1.0;  // population standard deviation

  double apply(double x) const { return (x - mean) / std; }
  double invert(double z) const { return z * std + mean; }
  void validate() const;
};

struct StandardizedSeries {
  std::vector<double> values;
  Standardizer standardizer;
};

/// Zero-mean, unit population-std transform. Requires >= 2 samples and a
/// non-constant series (kDegenerateInput otherwise).
StandardizedSeries standardize(std::span<const double> series);
std::vector<double> apply_standardizer(std::span<const double> series, const Standardizer& s);
std::vector<double> destandardize(std::span<const double> series, const Standardizer& s);

struct SplitSpec {
  double train_fraction = 0.8;
};

struct TrainTestSplit {
  std::vector<double> train;
  std::vector<double> test;
};

/// train = first floor(fraction * Z) samples, test = the remainder.
TrainTestSplit split(std::span<const double> series, SplitSpec spec = {});

struct SupervisedPair {
  double input;
  double target;
};

using SupervisedSeries = std::vector<SupervisedPair>;

/// (x_i, x_{i+1}) pairs; Z - 1 of them.
SupervisedSeries to_supervised(std::span<const double> series);

double population_mean(std::span<const double> series);
double population_std(std::span<const double> series);
double median(std::span<const double> series);

}  // namespace rttlab
