#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rttlab/trace.hpp"
#include "rttlab/transfer.hpp"

namespace rttlab {

struct DtwResult {
  double cost = 0.0;
  std::size_t path_length = 0;
  double normalized = 0.0;  // cost / (len(a) + len(b))
};

/// Full-grid dynamic time warping with local cost |a_i - b_j| and moves
/// (i-1, j), (i, j-1), (i-1, j-1). O(len(b)) memory.
DtwResult dtw(std::span<const double> a, std::span<const double> b);

struct Selection {
  std::size_t index = 0;
  double normalized_dtw = 0.0;
  std::vector<double> distances;  // one per library entry, library order
};

/// Standardizes target_sample and returns the entry whose fingerprint has the
/// smallest normalized DTW; the earliest entry wins ties.
Selection select_source(const ModelLibrary& library, const RttTrace& target_sample);

}  // namespace rttlab
