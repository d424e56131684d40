#include "rttlab/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "rttlab/error.hpp"

namespace rttlab {

namespace {

struct CsvRecord {
  double timestamp;
  double value;
};

bool parse_number(std::string_view text, double& out) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<CsvRecord> parse_records(std::string_view document) {
  std::vector<CsvRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < document.size()) {
    std::size_t end = document.find('\n', pos);
    const bool last = end == std::string_view::npos;
    if (last) end = document.size();
    std::string_view line = document.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      // Only a trailing newline may produce an empty final line.
      if (last || pos >= document.size()) continue;
      fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": empty line");
    }
    const std::size_t comma = line.find(',');
    CsvRecord record{};
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos ||
        !parse_number(line.substr(0, comma), record.timestamp) ||
        !parse_number(line.substr(comma + 1), record.value)) {
      fail(ErrorKind::kParse,
           "line " + std::to_string(line_no) + ": expected `timestamp_ms,rtt_ms`, got `" + std::string(line) + "`");
    }
    if (!std::isfinite(record.timestamp)) {
      fail(ErrorKind::kValidation, "line " + std::to_string(line_no) + ": non-finite timestamp");
    }
    if (!records.empty() && record.timestamp < records.back().timestamp) {
      fail(ErrorKind::kValidation, "line " + std::to_string(line_no) + ": timestamps must be non-decreasing");
    }
    records.push_back(record);
  }
  if (records.empty()) fail(ErrorKind::kEmptyInput, "document contains no records");
  return records;
}

double modal_interval(const std::vector<CsvRecord>& records) {
  if (records.size() < 2) return kDefaultIntervalMs;
  std::map<double, std::size_t> counts;
  for (std::size_t i = 1; i < records.size(); ++i) ++counts[records[i].timestamp - records[i - 1].timestamp];
  double best = counts.begin()->first;
  std::size_t best_count = 0;
  for (const auto& [delta, count] : counts) {
    if (count > best_count) {
      best = delta;
      best_count = count;
    }
  }
  return best;
}

}  // namespace

void RttTrace::validate() const {
  require(!samples.empty(), ErrorKind::kValidation, "trace has no samples");
  require(std::isfinite(interval_ms) && interval_ms > 0.0, ErrorKind::kValidation, "interval_ms must be > 0");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i]) || samples[i] <= 0.0) {
      fail(ErrorKind::kValidation,
           "sample " + std::to_string(i) + " is not a positive finite RTT (" + format_double(samples[i]) + ")");
    }
  }
}

RttTrace parse_trace(std::string_view document) {
  const auto records = parse_records(document);
  RttTrace trace;
  trace.samples.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double rtt = records[i].value;
    if (!std::isfinite(rtt) || rtt <= 0.0) {
      fail(ErrorKind::kValidation,
           "line " + std::to_string(i + 1) + ": RTT must be positive and finite, got " + format_double(rtt));
    }
    trace.samples.push_back(rtt);
  }
  trace.interval_ms = modal_interval(records);
  if (!(trace.interval_ms > 0.0)) {
    fail(ErrorKind::kValidation, "modal timestamp delta must be > 0");
  }
  return trace;
}

std::string serialize_series_csv(std::span<const double> values, double interval_ms) {
  std::string out;
  out.reserve(values.size() * 20);
  for (std::size_t k = 0; k < values.size(); ++k) {
    out += format_double(static_cast<double>(k) * interval_ms);
    out += ',';
    out += format_double(values[k]);
    out += '\n';
  }
  return out;
}

std::string serialize_trace(const RttTrace& trace) {
  trace.validate();
  return serialize_series_csv(trace.samples, trace.interval_ms);
}

std::vector<double> parse_series_csv(std::string_view document) {
  const auto records = parse_records(document);
  std::vector<double> values;
  values.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!std::isfinite(records[i].value)) {
      fail(ErrorKind::kValidation, "line " + std::to_string(i + 1) + ": non-finite value");
    }
    values.push_back(records[i].value);
  }
  return values;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open `" + path + "` for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open `" + path + "` for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorKind::kIo, "failed writing `" + path + "`");
}

RttTrace read_trace_file(const std::string& path) {
  RttTrace trace = parse_trace(read_text_file(path));
  trace.context = path;
  return trace;
}

void write_trace_file(const std::string& path, const RttTrace& trace) { write_text_file(path, serialize_trace(trace)); }

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

void Standardizer::validate() const {
  require(std::isfinite(mean), ErrorKind::kValidation, "standardizer mean must be finite");
  require(std::isfinite(std) && std > 0.0, ErrorKind::kValidation, "standardizer std must be > 0");
}

double population_mean(std::span<const double> series) {
  require(!series.empty(), ErrorKind::kEmptyInput, "mean of empty series");
  double sum = 0.0;
  for (double x : series) sum += x;
  return sum / static_cast<double>(series.size());
}

double population_std(std::span<const double> series) {
  const double mean = population_mean(series);
  double ss = 0.0;
  for (double x : series) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(series.size()));
}

double median(std::span<const double> series) {
  require(!series.empty(), ErrorKind::kEmptyInput, "median of empty series");
  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

StandardizedSeries standardize(std::span<const double> series) {
  require(series.size() >= 2, ErrorKind::kDegenerateInput, "standardization needs at least 2 samples");
  Standardizer s{population_mean(series), population_std(series)};
  if (!(s.std > 0.0) || !std::isfinite(s.std)) {
    fail(ErrorKind::kDegenerateInput, "series is constant (std = 0); cannot standardize");
  }
  return {apply_standardizer(series, s), s};
}

std::vector<double> apply_standardizer(std::span<const double> series, const Standardizer& s) {
  s.validate();
  std::vector<double> out(series.size());
  std::transform(series.begin(), series.end(), out.begin(), [&](double x) { return s.apply(x); });
  return out;
}

std::vector<double> destandardize(std::span<const double> series, const Standardizer& s) {
  s.validate();
  std::vector<double> out(series.size());
  std::transform(series.begin(), series.end(), out.begin(), [&](double z) { return s.invert(z); });
  return out;
}

TrainTestSplit split(std::span<const double> series, SplitSpec spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    fail(ErrorKind::kArgument, "train_fraction must lie in (0, 1)");
  }
  require(series.size() >= 2, ErrorKind::kArgument, "split needs at least 2 samples");
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(series.size())));
  return {{series.begin(), series.begin() + static_cast<std::ptrdiff_t>(n_train)},
          {series.begin() + static_cast<std::ptrdiff_t>(n_train), series.end()}};
}

SupervisedSeries to_supervised(std::span<const double> series) {
  require(series.size() >= 2, ErrorKind::kDegenerateInput, "supervised shifting needs at least 2 samples");
  SupervisedSeries pairs;
  pairs.reserve(series.size() - 1);
  for (std::size_t i = 0; i + 1 < series.size(); ++i) pairs.push_back({series[i], series[i + 1]});
  return pairs;
}

}  // namespace rttlab
