#pragma once

#include <span>
#include <vector>

namespace rttlab {

/// Scaled SMAPE in percent: (100/N) * sum |y' - y| / (|y| + |y'|).
/// A pair with |y| + |y'| == 0 is a kDegenerateInput error naming its index.
double smape(std::span<const double> actual, std::span<const double> predicted);

/// (specialized - finetuned) / specialized * 100. Positive means transfer helped.
double smape_improvement(double smape_specialized, double smape_finetuned);

/// Sample Pearson correlation coefficient.
double pearson(std::span<const double> x, std::span<const double> y);

/// Nearest-rank percentile: sorted[ceil(p/100 * n)] (1-based), p = 0 gives the minimum.
double percentile(std::span<const double> series, double p);

/// RMSE across runs of (percentile_p(run) - percentile_p(real)), divided by the
/// population std of the real trace.
double nrmse_percentile(std::span<const double> real_trace, const std::vector<std::vector<double>>& runs, double p);

}  // namespace rttlab
