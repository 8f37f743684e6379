#include "svilab/soc.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "svilab/error.hpp"

namespace svilab {

std::vector<ClusterEvent> detect_clusters(const PathEnsemble& ens, double threshold) {
  if (!(threshold > 0.0)) throw ParamError("detect_clusters: threshold must be positive");
  std::vector<ClusterEvent> out;
  const std::size_t n = ens.nodes();
  const double h = ens.config.grid.spacing();
  for (std::size_t p = 0; p < ens.paths.size(); ++p) {
    const std::size_t saves = ens.paths[p].snapshots.size() / std::max<std::size_t>(n, 1);
    for (std::size_t k = 0; k < saves; ++k) {
      const auto x = ens.snapshot(p, k);
      std::size_t i = 0;
      while (i < n) {
        if (!(std::fabs(x[i]) > threshold)) {
          ++i;
          continue;
        }
        ClusterEvent e{p, k, ens.save_times[k], i, 0, 0.0};
        for (; i < n && std::fabs(x[i]) > threshold; ++i) {
          ++e.size;
          e.excess += h * (std::fabs(x[i]) - threshold);
        }
        out.push_back(e);
      }
    }
  }
  return out;
}

std::vector<HistogramBin> size_histogram(const std::vector<ClusterEvent>& events) {
  std::map<std::size_t, std::size_t> counts;
  for (const ClusterEvent& e : events) ++counts[e.size];
  std::vector<HistogramBin> bins;
  std::size_t cum = 0;
  for (const auto& [size, count] : counts) {
    cum += count;
    bins.push_back({size, count, cum});
  }
  return bins;
}

}  // namespace svilab
