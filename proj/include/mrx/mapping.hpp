#ifndef MRX_MAPPING_HPP_
#define MRX_MAPPING_HPP_

#include <algorithm>
#include <set>
#include <vector>

#include "mrx/core.hpp"
#include "mrx/worldsim.hpp"

namespace mrx {

// ---------------------------------------------------------------------------
// Shared global occupancy map. Knowledge is monotone: a cell never returns
// to Unknown, and conflicting evidence resolves obstacle-wins.
// ---------------------------------------------------------------------------

enum class OccCell : std::uint8_t { Unknown, Free, Obstacle };

class OccupancyGrid {
 public:
  OccupancyGrid(int width, int height)
      : width_(width), height_(height),
        cells_(static_cast<std::size_t>(width) * height, OccCell::Unknown) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int explored_count() const { return explored_count_; }

  bool in_bounds(Cell c) const {
    return c.x >= 0 && c.x < width_ && c.y >= 0 && c.y < height_;
  }
  OccCell at(Cell c) const { return cells_[c.y * width_ + c.x]; }
  bool is_free(Cell c) const { return in_bounds(c) && at(c) == OccCell::Free; }

  void observe(Cell c, OccCell v) {
    OccCell& cur = cells_[c.y * width_ + c.x];
    if (cur == OccCell::Unknown) {
      cur = v;
      ++explored_count_;
    } else if (cur == OccCell::Free && v == OccCell::Obstacle) {
      cur = v;  // obstacle wins
    }
  }

 private:
  int width_;
  int height_;
  int explored_count_ = 0;
  std::vector<OccCell> cells_;
};

// Writes one scan into the grid: the free prefix of every ray becomes Free,
// hit cells become Obstacle. Idempotent.
inline void integrate_scan(OccupancyGrid& grid, const DepthScan& scan) {
  for (const Ray& ray : scan.rays) {
    for (const Cell& c : ray.cells) {
      if (ray.hit_cell && c == *ray.hit_cell) {
        grid.observe(c, OccCell::Obstacle);
      } else {
        grid.observe(c, OccCell::Free);
      }
    }
  }
}

// Frontier predicate: a Free cell with at least one Unknown 4-neighbor.
inline bool is_frontier(const OccupancyGrid& grid, Cell c) {
  if (grid.at(c) != OccCell::Free) return false;
  const Cell nb[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
  for (const Cell& n : nb) {
    if (grid.in_bounds(n) && grid.at(n) == OccCell::Unknown) return true;
  }
  return false;
}

// Row-major list of all frontier cells.
inline std::vector<Cell> detect_frontiers(const OccupancyGrid& grid) {
  std::vector<Cell> out;
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      if (is_frontier(grid, {x, y})) out.push_back({x, y});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adjacent-neighbor clustering of frontier points. Greedy region growing:
// seed a cluster with the first unclaimed point (row-major), absorb any
// point within r_clus of any member, repeat to closure. The center is the
// member with minimum average distance to the rest of its cluster.
// ---------------------------------------------------------------------------

struct FrontierClusters {
  std::vector<std::vector<Cell>> clusters;
  std::vector<Cell> centers;
  std::vector<int> counts;

  int size() const { return static_cast<int>(clusters.size()); }
  bool empty() const { return clusters.empty(); }
  int total_points() const {
    int n = 0;
    for (int c : counts) n += c;
    return n;
  }
};

inline FrontierClusters cluster_frontiers(std::vector<Cell> points,
                                          double r_clus = 8.0) {
  if (r_clus <= 0.0) throw ArgumentError("cluster_frontiers: r_clus must be > 0");
  std::sort(points.begin(), points.end(),
            [](Cell a, Cell b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });

  FrontierClusters out;
  std::vector<bool> claimed(points.size(), false);
  for (std::size_t seed = 0; seed < points.size(); ++seed) {
    if (claimed[seed]) continue;
    std::vector<Cell> cluster;
    std::vector<std::size_t> frontier_idx{seed};
    claimed[seed] = true;
    cluster.push_back(points[seed]);
    while (!frontier_idx.empty()) {
      const Cell p = points[frontier_idx.back()];
      frontier_idx.pop_back();
      for (std::size_t j = 0; j < points.size(); ++j) {
        if (!claimed[j] && cell_dist(p, points[j]) <= r_clus) {
          claimed[j] = true;
          cluster.push_back(points[j]);
          frontier_idx.push_back(j);
        }
      }
    }
    std::sort(cluster.begin(), cluster.end(),
              [](Cell a, Cell b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });

    Cell center = cluster.front();
    double best = std::numeric_limits<double>::infinity();
    for (const Cell& cand : cluster) {
      double sum = 0.0;
      for (const Cell& other : cluster) sum += cell_dist(cand, other);
      const double avg = cluster.size() > 1 ? sum / (cluster.size() - 1) : 0.0;
      if (avg < best - 1e-12) {
        best = avg;
        center = cand;
      }
    }
    out.clusters.push_back(std::move(cluster));
    out.centers.push_back(center);
    out.counts.push_back(static_cast<int>(out.clusters.back().size()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// 5-channel binary stacks. Channel order: obstacle, free, robot, frontier,
// trajectory. The privilege stack replaces the obstacle/free channels with
// ground truth; the remaining channels are copied from the observation.
// ---------------------------------------------------------------------------

constexpr int kStackChannels = 5;

struct ChannelStack {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // [channel][y][x]

  ChannelStack() = default;
  ChannelStack(int w, int h)
      : width(w), height(h),
        data(static_cast<std::size_t>(kStackChannels) * w * h, 0.0) {}

  double& at(int ch, Cell c) {
    return data[(static_cast<std::size_t>(ch) * height + c.y) * width + c.x];
  }
  double at(int ch, Cell c) const {
    return data[(static_cast<std::size_t>(ch) * height + c.y) * width + c.x];
  }
};

using ObservationStack = ChannelStack;
using PrivilegeStack = ChannelStack;

struct StackPair {
  ObservationStack obs;
  PrivilegeStack priv;
};

inline StackPair build_stacks(const OccupancyGrid& grid,
                              const GroundTruthMap& truth,
                              const std::vector<RobotState>& robots,
                              const std::vector<Cell>& frontiers,
                              const std::vector<std::vector<Cell>>& trails) {
  if (grid.width() != truth.width() || grid.height() != truth.height()) {
    throw ShapeError("build_stacks: grid and truth dimensions differ");
  }
  StackPair s{ChannelStack(grid.width(), grid.height()),
              ChannelStack(grid.width(), grid.height())};
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      const Cell c{x, y};
      if (grid.at(c) == OccCell::Obstacle) s.obs.at(0, c) = 1.0;
      if (grid.at(c) == OccCell::Free) s.obs.at(1, c) = 1.0;
      if (truth.at(c) == TruthCell::Obstacle) s.priv.at(0, c) = 1.0;
      if (truth.at(c) == TruthCell::Free) s.priv.at(1, c) = 1.0;
    }
  }
  for (const RobotState& r : robots) s.obs.at(2, r.cell()) = 1.0;
  for (const Cell& f : frontiers) s.obs.at(3, f) = 1.0;
  for (const auto& trail : trails) {
    for (const Cell& c : trail) s.obs.at(4, c) = 1.0;
  }
  // Privilege shares everything except the map channels.
  const std::size_t plane = static_cast<std::size_t>(grid.width()) * grid.height();
  std::copy(s.obs.data.begin() + 2 * plane, s.obs.data.end(),
            s.priv.data.begin() + 2 * plane);
  return s;
}

}  // namespace mrx

#endif  // MRX_MAPPING_HPP_
