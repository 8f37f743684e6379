#pragma once

// Supercritical clusters: maximal runs of adjacent nodes with |X| above a
// threshold, logged per path and save time, and their size histogram. Purely
// descriptive; no scaling law is fitted.

#include <vector>

#include "svilab/solver.hpp"

namespace svilab {

struct ClusterEvent {
  std::size_t path = 0;
  std::size_t save = 0;
  double t = 0.0;
  /// First node index and number of nodes in the run.
  std::size_t first = 0;
  std::size_t size = 0;
  /// ∫(|X| − threshold)⁺ over the run.
  double excess = 0.0;
};

/// Events ordered by path, then save time, then position. Failed paths
/// contribute their snapshots up to the failure.
std::vector<ClusterEvent> detect_clusters(const PathEnsemble& ens, double threshold = 1.0);

struct HistogramBin {
  std::size_t size = 0;
  std::size_t count = 0;
  /// Events of size ≤ this bin's size.
  std::size_t cumulative = 0;
};

/// One bin per distinct size, ascending.
std::vector<HistogramBin> size_histogram(const std::vector<ClusterEvent>& events);

}  // namespace svilab
