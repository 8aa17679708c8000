#ifndef MRX_TOPOGRAPH_HPP_
#define MRX_TOPOGRAPH_HPP_

#include <deque>
#include <vector>

#include "mrx/autodiff.hpp"
#include "mrx/core.hpp"
#include "mrx/geodesy.hpp"
#include "mrx/layers.hpp"
#include "mrx/mapping.hpp"
#include "mrx/worldsim.hpp"

namespace mrx {

// ---------------------------------------------------------------------------
// Topological scene graphs: self graphs over robots and frontier clusters,
// history graphs over past poses and goals, and the cross graphs that tie
// them together with geodesic edge distances.
// ---------------------------------------------------------------------------

// Unreachable pairs get this sentinel once distances are normalized by the
// map diagonal; reachable values stay in [0, ~1.4].
constexpr double kUnreachableDistance = 2.0;

struct TopoNode {
  double cla[2];  // one-hot: robot | frontier
  double geo[3];  // normalized (x, y, s); s = heading or cluster count
  double px, py;  // raw map coordinates, for feature-map interpolation
  std::vector<double> rep;  // recorded representation (history nodes only)
};

inline TopoNode robot_node(const RobotState& r, int width, int height) {
  return TopoNode{{1.0, 0.0},
                  {r.x / width, r.y / height, r.heading / kTwoPi},
                  r.x,
                  r.y,
                  {}};
}

inline TopoNode frontier_node(Cell center, int count, int total_points,
                              int width, int height) {
  const double frac = total_points > 0 ? double(count) / total_points : 0.0;
  return TopoNode{{0.0, 1.0},
                  {(center.x + 0.5) / width, (center.y + 0.5) / height, frac},
                  center.x + 0.5,
                  center.y + 0.5,
                  {}};
}

// FIFO history of recorded nodes, capacity H. Representation vectors carry
// the feature-map values from the timestep of recording.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(int capacity) : capacity_(capacity) {}

  void push(TopoNode node) {
    nodes_.push_back(std::move(node));
    while (static_cast<int>(nodes_.size()) > capacity_) nodes_.pop_front();
  }

  const std::deque<TopoNode>& nodes() const { return nodes_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  bool empty() const { return nodes_.empty(); }

 private:
  int capacity_;
  std::deque<TopoNode> nodes_;
};

struct TopoGraphSet {
  std::vector<TopoNode> robots;     // V_r
  std::vector<TopoNode> frontiers;  // V_f, one node per cluster
  std::vector<TopoNode> robot_history;  // V_r^h
  std::vector<TopoNode> goal_history;   // V_g^h

  // Cross-graph edge distances, row-major [|A| x |B|], normalized by the
  // map diagonal with the unreachable sentinel substituted.
  std::vector<double> d_robot_history;     // robots x robot_history
  std::vector<double> d_frontier_history;  // frontiers x goal_history
  std::vector<double> d_robot_frontier;    // robots x frontiers (E_rf)

  std::vector<Cell> cluster_centers;
  std::vector<double> raw_robot_frontier;  // unnormalized FMM values (kInf ok)

  int n_robots() const { return static_cast<int>(robots.size()); }
  int n_frontiers() const { return static_cast<int>(frontiers.size()); }
};

// Bilinear interpolation weights of a map-coordinate point into the /8
// feature grid. Out-of-bounds points clamp to the border.
inline Tape::BilerpPoint bilerp_point(double px, double py, int feat_w, int feat_h) {
  const double fx = std::clamp(px / 8.0 - 0.5, 0.0, feat_w - 1.0);
  const double fy = std::clamp(py / 8.0 - 0.5, 0.0, feat_h - 1.0);
  const int x0 = std::min(static_cast<int>(std::floor(fx)), feat_w - 2 >= 0 ? feat_w - 2 : 0);
  const int y0 = std::min(static_cast<int>(std::floor(fy)), feat_h - 2 >= 0 ? feat_h - 2 : 0);
  const int x1 = std::min(x0 + 1, feat_w - 1);
  const int y1 = std::min(y0 + 1, feat_h - 1);
  const double tx = std::clamp(fx - x0, 0.0, 1.0);
  const double ty = std::clamp(fy - y0, 0.0, 1.0);
  Tape::BilerpPoint p;
  p.idx[0] = y0 * feat_w + x0;
  p.idx[1] = y0 * feat_w + x1;
  p.idx[2] = y1 * feat_w + x0;
  p.idx[3] = y1 * feat_w + x1;
  p.w[0] = (1 - tx) * (1 - ty);
  p.w[1] = tx * (1 - ty);
  p.w[2] = (1 - tx) * ty;
  p.w[3] = tx * ty;
  return p;
}

// Interpolates a [C, H, W] feature map at a continuous map point.
inline VarId bilerp(Tape& t, VarId feat, double px, double py) {
  return t.bilerp_gather(
      feat, {bilerp_point(px, py, t.val(feat).dim(2), t.val(feat).dim(1))});
}

namespace detail {

inline double normalize_distance(double raw, double diagonal) {
  return raw == kInf ? kUnreachableDistance : raw / diagonal;
}

}  // namespace detail

// Assembles the seven-graph scene. Self and cross graphs are complete (self
// graphs with self-loops); cross edges carry FMM distances over known free
// space.
inline TopoGraphSet build_graph_set(const std::vector<RobotState>& robots,
                                    const FrontierClusters& clusters,
                                    const OccupancyGrid& grid,
                                    const HistoryBuffer& robot_history,
                                    const HistoryBuffer& goal_history) {
  TopoGraphSet g;
  const int w = grid.width(), h = grid.height();
  const double diagonal = std::sqrt(double(w) * w + double(h) * h);
  const int total_points = clusters.total_points();

  for (const RobotState& r : robots) g.robots.push_back(robot_node(r, w, h));
  for (int i = 0; i < clusters.size(); ++i) {
    g.frontiers.push_back(
        frontier_node(clusters.centers[i], clusters.counts[i], total_points, w, h));
    g.cluster_centers.push_back(clusters.centers[i]);
  }
  g.robot_history.assign(robot_history.nodes().begin(), robot_history.nodes().end());
  g.goal_history.assign(goal_history.nodes().begin(), goal_history.nodes().end());

  // One distance field per robot covers both cross graphs rooted at robots.
  const int n_r = g.n_robots(), n_f = g.n_frontiers();
  g.d_robot_frontier.resize(static_cast<std::size_t>(n_r) * n_f);
  g.raw_robot_frontier.resize(static_cast<std::size_t>(n_r) * n_f);
  g.d_robot_history.resize(static_cast<std::size_t>(n_r) * g.robot_history.size());
  for (int i = 0; i < n_r; ++i) {
    const auto field = fmm_field(grid, {robots[i].cell()});
    for (int j = 0; j < n_f; ++j) {
      const double raw = field.at(clusters.centers[j]);
      g.raw_robot_frontier[i * n_f + j] = raw;
      g.d_robot_frontier[i * n_f + j] = detail::normalize_distance(raw, diagonal);
    }
    for (std::size_t j = 0; j < g.robot_history.size(); ++j) {
      const TopoNode& hn = g.robot_history[j];
      const Cell hc{static_cast<int>(hn.px), static_cast<int>(hn.py)};
      const double raw = grid.is_free(hc) ? field.at(hc) : kInf;
      g.d_robot_history[i * g.robot_history.size() + j] =
          detail::normalize_distance(raw, diagonal);
    }
  }

  // Frontier-to-historical-goal distances, one field per frontier cluster.
  g.d_frontier_history.resize(static_cast<std::size_t>(n_f) * g.goal_history.size());
  if (!g.goal_history.empty()) {
    for (int i = 0; i < n_f; ++i) {
      const auto field = fmm_field(grid, {clusters.centers[i]});
      for (std::size_t j = 0; j < g.goal_history.size(); ++j) {
        const TopoNode& hn = g.goal_history[j];
        const Cell hc{static_cast<int>(hn.px), static_cast<int>(hn.py)};
        const double raw = grid.is_free(hc) ? field.at(hc) : kInf;
        g.d_frontier_history[i * g.goal_history.size() + j] =
            detail::normalize_distance(raw, diagonal);
      }
    }
  }
  return g;
}

// Dense all-ones adjacency with self-loops for a complete self graph.
inline std::vector<double> complete_adjacency(int n) {
  return std::vector<double>(static_cast<std::size_t>(n) * n, 1.0);
}

}  // namespace mrx

#endif  // MRX_TOPOGRAPH_HPP_
