#ifndef MRX_GEODESY_HPP_
#define MRX_GEODESY_HPP_

#include <functional>
#include <limits>
#include <queue>
#include <vector>

#include "mrx/core.hpp"
#include "mrx/mapping.hpp"
#include "mrx/worldsim.hpp"

namespace mrx {

constexpr double kInf = std::numeric_limits<double>::infinity();

// First-order fast-marching solution of |grad T| = 1 on traversable cells.
struct DistanceField {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // kInf on non-traversable / unreachable cells

  double at(Cell c) const { return values[c.y * width + c.x]; }
  bool reachable(Cell c) const { return at(c) < kInf; }
};

using Traversable = std::function<bool(Cell)>;

// Unknown cells are non-traversable for planning: goals are frontier cells,
// so paths stay inside known free space.
inline Traversable known_free(const OccupancyGrid& grid) {
  return [&grid](Cell c) { return grid.is_free(c); };
}

inline DistanceField fmm_field(int width, int height,
                               const std::vector<Cell>& sources,
                               const Traversable& traversable) {
  if (sources.empty()) throw ArgumentError("fmm_field: empty source set");

  DistanceField field{width, height,
                      std::vector<double>(static_cast<std::size_t>(width) * height, kInf)};
  enum : std::uint8_t { Far, Narrow, Frozen };
  std::vector<std::uint8_t> state(field.values.size(), Far);

  using Entry = std::pair<double, int>;  // (value, linear index); index breaks ties
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;

  auto idx = [width](Cell c) { return c.y * width + c.x; };
  for (const Cell& s : sources) {
    if (!traversable(s)) throw ArgumentError("fmm_field: source not traversable");
    field.values[idx(s)] = 0.0;
    state[idx(s)] = Narrow;
    heap.push({0.0, idx(s)});
  }

  // Upwind update on the triangulated 8-stencil: the arrival time is
  // minimized over straight segments into each of the eight triangles
  // around the cell, which is exact for straight-line propagation in open
  // space and never exceeds the 8-neighbor Dijkstra relaxation. Diagonal
  // neighbors participate only when both flanking orthogonal cells are
  // traversable, matching the robot's no-corner-cut kinematics.
  auto frozen_val = [&](Cell c) {
    if (c.x < 0 || c.x >= width || c.y < 0 || c.y >= height) return kInf;
    return state[idx(c)] == Frozen ? field.values[idx(c)] : kInf;
  };
  const double kSqrt2 = std::sqrt(2.0);
  auto solve = [&](Cell c) {
    double best = kInf;
    for (int sy = -1; sy <= 1; sy += 2) {
      for (int sx = -1; sx <= 1; sx += 2) {
        const Cell ax{c.x + sx, c.y};
        const Cell ay{c.x, c.y + sy};
        const Cell di{c.x + sx, c.y + sy};
        const double ta_x = frozen_val(ax);
        const double ta_y = frozen_val(ay);
        best = std::min({best, ta_x + 1.0, ta_y + 1.0});
        const bool diag_ok = traversable(ax) && traversable(ay);
        if (!diag_ok) continue;
        const double td = frozen_val(di);
        if (td == kInf) continue;
        best = std::min(best, td + kSqrt2);
        // Interior solutions on the two triangles of this quadrant.
        for (const double ta : {ta_x, ta_y}) {
          if (ta == kInf) continue;
          const double dt = td - ta;
          if (dt <= 0.0 && -dt < 1.0 / kSqrt2) {
            const double t = -dt / std::sqrt(1.0 - dt * dt);
            if (t <= 1.0) {
              best = std::min(best, ta + t * dt + std::sqrt(1.0 + t * t));
            }
          }
        }
      }
    }
    return best;
  };

  while (!heap.empty()) {
    const auto [val, i] = heap.top();
    heap.pop();
    if (state[i] == Frozen || val > field.values[i]) continue;
    state[i] = Frozen;
    const Cell c{i % width, i / width};
    const Cell nb[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
    for (const Cell& n : nb) {
      if (n.x < 0 || n.x >= width || n.y < 0 || n.y >= height) continue;
      const int j = idx(n);
      if (state[j] == Frozen || !traversable(n)) continue;
      const double cand = solve(n);
      if (cand < field.values[j]) {
        field.values[j] = cand;
        state[j] = Narrow;
        heap.push({cand, j});
      }
    }
  }
  return field;
}

inline DistanceField fmm_field(const OccupancyGrid& grid,
                               const std::vector<Cell>& sources) {
  return fmm_field(grid.width(), grid.height(), sources, known_free(grid));
}

inline double geodesic_distance(const OccupancyGrid& grid, Cell a, Cell b) {
  return fmm_field(grid, {a}).at(b);
}

// Steepest-descent walk over the 8-neighborhood from start down to a source.
// Diagonal steps need both orthogonal neighbors finite so the path never
// cuts an obstacle corner.
inline std::vector<Cell> extract_path(const DistanceField& field, Cell start) {
  if (!field.reachable(start)) {
    throw ArgumentError("extract_path: start is unreachable");
  }
  std::vector<Cell> path{start};
  Cell cur = start;
  while (field.at(cur) > 0.0) {
    Cell best = cur;
    double best_val = field.at(cur);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const Cell n{cur.x + dx, cur.y + dy};
        if (n.x < 0 || n.x >= field.width || n.y < 0 || n.y >= field.height) continue;
        if (!field.reachable(n)) continue;
        if (dx != 0 && dy != 0 &&
            (!field.reachable({cur.x + dx, cur.y}) ||
             !field.reachable({cur.x, cur.y + dy}))) {
          continue;
        }
        if (field.at(n) < best_val - 1e-12) {
          best_val = field.at(n);
          best = n;
        }
      }
    }
    if (best == cur) break;  // flat spot; should not happen on FMM output
    path.push_back(best);
    cur = best;
  }
  return path;
}

// Face-then-forward heuristic: move forward when the waypoint is within half
// a rotation step of the heading, otherwise rotate the shorter way (ties
// break left).
inline Action waypoint_action(const RobotState& state, Cell waypoint) {
  if (state.cell() == waypoint) return Action::Stay;
  const double bearing =
      std::atan2(waypoint.y + 0.5 - state.y, waypoint.x + 0.5 - state.x);
  const double diff = wrap_signed(bearing - state.heading);
  if (std::abs(diff) <= kRotStep / 2.0 + 1e-9) return Action::Forward;
  return diff > 0.0 ? Action::RotateLeft : Action::RotateRight;
}

}  // namespace mrx

#endif  // MRX_GEODESY_HPP_
