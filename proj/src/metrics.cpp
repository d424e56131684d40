#include "rttlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rttlab/error.hpp"
#include "rttlab/trace.hpp"

namespace rttlab {

double smape(std::span<const double> actual, std::span<const double> predicted) {
  require(actual.size() == predicted.size(), ErrorKind::kContractViolation, "smape: length mismatch");
  require(!actual.empty(), ErrorKind::kContractViolation, "smape: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double denom = std::abs(actual[i]) + std::abs(predicted[i]);
    if (denom == 0.0) fail(ErrorKind::kDegenerateInput, "smape: |y| + |y'| = 0 at index " + std::to_string(i));
    sum += std::abs(predicted[i] - actual[i]) / denom;
  }
  return 100.0 * sum / static_cast<double>(actual.size());
}

double smape_improvement(double smape_specialized, double smape_finetuned) {
  require(smape_specialized != 0.0, ErrorKind::kArgument, "smape_improvement: specialized SMAPE is zero");
  return (smape_specialized - smape_finetuned) / smape_specialized * 100.0;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::kContractViolation, "pearson: length mismatch");
  require(x.size() >= 2, ErrorKind::kContractViolation, "pearson: needs at least 2 points");
  const double mx = population_mean(x);
  const double my = population_mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorKind::kDegenerateInput, "pearson: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double percentile(std::span<const double> series, double p) {
  require(!series.empty(), ErrorKind::kEmptyInput, "percentile of empty series");
  require(p >= 0.0 && p <= 100.0, ErrorKind::kArgument, "percentile p must lie in [0, 100]");
  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

double nrmse_percentile(std::span<const double> real_trace, const std::vector<std::vector<double>>& runs, double p) {
  require(!runs.empty(), ErrorKind::kArgument, "nrmse_percentile: needs at least one run");
  const double sd = population_std(real_trace);
  if (sd == 0.0) fail(ErrorKind::kDegenerateInput, "nrmse_percentile: real trace is constant");
  const double reference = percentile(real_trace, p);
  double ss = 0.0;
  for (const auto& run : runs) {
    const double e = percentile(run, p) - reference;
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(runs.size())) / sd;
}

}  // namespace rttlab
