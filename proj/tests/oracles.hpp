// Independent test oracles. Nothing here may call into the implementation
// paths it checks.
#ifndef MRX_TESTS_ORACLES_HPP_
#define MRX_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include "mrx/core.hpp"

namespace oracles {

// Dijkstra over the 8-neighborhood with unit / sqrt(2) edge weights.
// Diagonal moves require both orthogonal neighbors traversable (no corner
// cutting), matching the kinematics of the simulator.
inline std::vector<double> dijkstra8(int width, int height,
                                     const std::function<bool(mrx::Cell)>& open,
                                     const std::vector<mrx::Cell>& sources) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(width) * height, inf);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  for (const auto& s : sources) {
    dist[s.y * width + s.x] = 0.0;
    heap.push({0.0, s.y * width + s.x});
  }
  const double kSqrt2 = std::sqrt(2.0);
  while (!heap.empty()) {
    auto [d, i] = heap.top();
    heap.pop();
    if (d > dist[i]) continue;
    const mrx::Cell c{i % width, i / width};
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const mrx::Cell n{c.x + dx, c.y + dy};
        if (n.x < 0 || n.x >= width || n.y < 0 || n.y >= height || !open(n)) continue;
        if (dx != 0 && dy != 0 &&
            (!open({c.x + dx, c.y}) || !open({c.x, c.y + dy}))) {
          continue;
        }
        const double nd = d + (dx != 0 && dy != 0 ? kSqrt2 : 1.0);
        if (nd < dist[n.y * width + n.x]) {
          dist[n.y * width + n.x] = nd;
          heap.push({nd, n.y * width + n.x});
        }
      }
    }
  }
  return dist;
}

// Minimum-cost assignment of n rows to n columns by exhaustive permutation
// enumeration (n <= ~8).
inline std::vector<int> hungarian_brute(const std::vector<double>& cost, int n) {
  std::vector<int> perm(n), best(n);
  std::iota(perm.begin(), perm.end(), 0);
  best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0;
    for (int i = 0; i < n; ++i) c += cost[i * n + perm[i]];
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Central finite differences of a scalar function of a parameter vector.
inline double central_diff(const std::function<double()>& eval, double& slot,
                           double h = 1e-5) {
  const double saved = slot;
  slot = saved + h;
  const double up = eval();
  slot = saved - h;
  const double down = eval();
  slot = saved;
  return (up - down) / (2.0 * h);
}

// Relative error convention used by every gradient check.
inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1.0, std::abs(analytic) + std::abs(numeric));
}

}  // namespace oracles

#endif  // MRX_TESTS_ORACLES_HPP_
