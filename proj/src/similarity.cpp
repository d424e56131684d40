#include "rttlab/similarity.hpp"

#include <cmath>
#include <limits>

#include "rttlab/error.hpp"

namespace rttlab {

DtwResult dtw(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), ErrorKind::kArgument, "dtw: both series must be non-empty");
  const std::size_t m = b.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, kInf), cur(m + 1, kInf);
  std::vector<std::size_t> prev_len(m + 1, 0), cur_len(m + 1, 0);
  prev[0] = 0.0;  // virtual origin

  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = kInf;
    const double ai = a[i - 1];
    for (std::size_t j = 1; j <= m; ++j) {
      // Diagonal first so equal-cost ties take the shorter path.
      double best = prev[j - 1];
      std::size_t len = prev_len[j - 1];
      if (prev[j] < best) {
        best = prev[j];
        len = prev_len[j];
      }
      if (cur[j - 1] < best) {
        best = cur[j - 1];
        len = cur_len[j - 1];
      }
      cur[j] = best + std::abs(ai - b[j - 1]);
      cur_len[j] = len + 1;
    }
    std::swap(prev, cur);
    std::swap(prev_len, cur_len);
  }
  DtwResult r;
  r.cost = prev[m];
  r.path_length = prev_len[m];
  r.normalized = r.cost / static_cast<double>(a.size() + b.size());
  return r;
}

Selection select_source(const ModelLibrary& library, const RttTrace& target_sample) {
  require(!library.empty(), ErrorKind::kArgument, "select_source: library is empty");
  target_sample.validate();
  const auto target = standardize(target_sample.samples);
  Selection sel;
  sel.distances.reserve(library.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < library.size(); ++k) {
    const double d = dtw(target.values, library.entries()[k].fingerprint).normalized;
    sel.distances.push_back(d);
    if (d < best) {
      best = d;
      sel.index = k;
    }
  }
  sel.normalized_dtw = best;
  return sel;
}

}  // namespace rttlab
