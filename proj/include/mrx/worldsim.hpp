#ifndef MRX_WORLDSIM_HPP_
#define MRX_WORLDSIM_HPP_

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mrx/core.hpp"

namespace mrx {

// ---------------------------------------------------------------------------
// Ground-truth world: a closed, bounded grid of free and obstacle cells.
// Immutable after load; safe to share between episodes.
// ---------------------------------------------------------------------------

enum class TruthCell : std::uint8_t { Free, Obstacle };

class GroundTruthMap {
 public:
  GroundTruthMap(int width, int height, std::vector<TruthCell> cells,
                 double cell_size = 0.1)
      : width_(width),
        height_(height),
        cell_size_(cell_size),
        cells_(std::move(cells)) {
    compute_free_component();
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double cell_size() const { return cell_size_; }

  bool in_bounds(Cell c) const {
    return c.x >= 0 && c.x < width_ && c.y >= 0 && c.y < height_;
  }
  TruthCell at(Cell c) const { return cells_[c.y * width_ + c.x]; }
  bool is_free(Cell c) const { return in_bounds(c) && at(c) == TruthCell::Free; }

  // Largest 4-connected free region; spawn and metrics are restricted to it.
  const std::vector<Cell>& free_component() const { return free_component_; }
  bool in_free_component(Cell c) const {
    return in_bounds(c) && component_mask_[c.y * width_ + c.x];
  }

  double diagonal() const {
    return std::sqrt(double(width_) * width_ + double(height_) * height_);
  }

 private:
  void compute_free_component() {
    std::vector<int> label(cells_.size(), -1);
    int best_label = -1;
    std::size_t best_size = 0;
    int next = 0;
    std::vector<Cell> stack;
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        const Cell seed{x, y};
        if (at(seed) != TruthCell::Free || label[y * width_ + x] >= 0) continue;
        std::size_t size = 0;
        stack.push_back(seed);
        label[y * width_ + x] = next;
        while (!stack.empty()) {
          const Cell c = stack.back();
          stack.pop_back();
          ++size;
          const Cell nb[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
          for (const Cell& n : nb) {
            if (is_free(n) && label[n.y * width_ + n.x] < 0) {
              label[n.y * width_ + n.x] = next;
              stack.push_back(n);
            }
          }
        }
        if (size > best_size) {
          best_size = size;
          best_label = next;
        }
        ++next;
      }
    }
    component_mask_.assign(cells_.size(), 0);
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        if (label[y * width_ + x] == best_label) {
          component_mask_[y * width_ + x] = 1;
          free_component_.push_back({x, y});
        }
      }
    }
  }

  int width_;
  int height_;
  double cell_size_;
  std::vector<TruthCell> cells_;
  std::vector<std::uint8_t> component_mask_;
  std::vector<Cell> free_component_;
};

// ---------------------------------------------------------------------------
// Map text format: '#' obstacle, '.' free, 'S' free + preferred spawn cell.
// The loader pads a '#' border when the file's border is not fully closed.
// ---------------------------------------------------------------------------

struct LoadedWorld {
  GroundTruthMap map;
  std::vector<Cell> spawn_cells;  // cells marked 'S', in row-major order
};

inline LoadedWorld load_world(const std::string& text, double cell_size = 0.1) {
  std::vector<std::string> rows;
  std::string row;
  for (char ch : text) {
    if (ch == '\n') {
      if (!row.empty()) rows.push_back(row);
      row.clear();
    } else if (ch != '\r') {
      row.push_back(ch);
    }
  }
  if (!row.empty()) rows.push_back(row);
  if (rows.empty()) throw FormatError("map text is empty");

  const std::size_t w = rows[0].size();
  for (std::size_t y = 0; y < rows.size(); ++y) {
    if (rows[y].size() != w) {
      throw FormatError("map row " + std::to_string(y + 1) + " has length " +
                        std::to_string(rows[y].size()) + ", expected " +
                        std::to_string(w));
    }
    for (std::size_t x = 0; x < w; ++x) {
      const char c = rows[y][x];
      if (c != '#' && c != '.' && c != 'S') {
        throw FormatError("unknown map character '" + std::string(1, c) +
                          "' at line " + std::to_string(y + 1) + ", column " +
                          std::to_string(x + 1));
      }
    }
  }

  bool closed = true;
  for (std::size_t x = 0; x < w && closed; ++x) {
    closed = rows.front()[x] == '#' && rows.back()[x] == '#';
  }
  for (const std::string& r : rows) {
    if (!closed) break;
    closed = r.front() == '#' && r.back() == '#';
  }
  const int pad = closed ? 0 : 1;

  const int width = static_cast<int>(w) + 2 * pad;
  const int height = static_cast<int>(rows.size()) + 2 * pad;
  std::vector<TruthCell> cells(static_cast<std::size_t>(width) * height,
                               TruthCell::Obstacle);
  std::vector<Cell> spawns;
  int free_count = 0;
  for (std::size_t y = 0; y < rows.size(); ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const char c = rows[y][x];
      if (c == '#') continue;
      const Cell cc{static_cast<int>(x) + pad, static_cast<int>(y) + pad};
      cells[cc.y * width + cc.x] = TruthCell::Free;
      ++free_count;
      if (c == 'S') spawns.push_back(cc);
    }
  }
  if (free_count == 0) throw FormatError("map has zero free cells");
  return LoadedWorld{GroundTruthMap(width, height, std::move(cells), cell_size),
                     std::move(spawns)};
}

// ---------------------------------------------------------------------------
// Robots
// ---------------------------------------------------------------------------

constexpr int kHeadingCount = 12;  // 30 degree rotation step
constexpr double kRotStep = kTwoPi / kHeadingCount;

enum class Action : std::uint8_t { Forward, RotateLeft, RotateRight, Stay };

struct RobotState {
  double x = 0.0;  // cell units, cell centers at integer + 0.5
  double y = 0.0;
  double heading = 0.0;  // radians, exact multiple of kRotStep
  int id = 0;

  Cell cell() const {
    return Cell{static_cast<int>(std::floor(x)), static_cast<int>(std::floor(y))};
  }
};

struct SensorConfig {
  double max_range = 30.0;  // cells; 3 m at 0.1 m/cell
  double fov = kTwoPi;      // omnidirectional by default
  int ray_count = 72;
};

struct Ray {
  double direction = 0.0;
  std::optional<double> hit_range;  // cells, distance between cell centers
  std::optional<Cell> hit_cell;
  std::vector<Cell> cells;  // supercover traversal order; free prefix + hit
};

struct DepthScan {
  std::vector<Ray> rays;
};

inline RobotState make_robot(Cell c, double heading, int id) {
  return RobotState{c.x + 0.5, c.y + 0.5, wrap_angle(heading), id};
}

// Spawns n_r robots on distinct free-component cells, each within
// spawn_radius of the first. Seeded and deterministic.
inline std::vector<RobotState> spawn_robots(const GroundTruthMap& world,
                                            int n_r, std::uint64_t seed,
                                            const std::vector<Cell>& preferred = {},
                                            double spawn_radius = 6.0) {
  if (n_r < 1) throw ArgumentError("spawn_robots: n_r must be >= 1");
  const auto& comp = world.free_component();
  if (static_cast<int>(comp.size()) < n_r) {
    throw ArgumentError("spawn_robots: free component smaller than robot count");
  }
  Rng rng(seed);
  Cell anchor;
  if (!preferred.empty()) {
    anchor = preferred[rng.next_below(preferred.size())];
    if (!world.in_free_component(anchor)) anchor = comp[rng.next_below(comp.size())];
  } else {
    anchor = comp[rng.next_below(comp.size())];
  }
  std::vector<Cell> nearby;
  for (const Cell& c : comp) {
    if (cell_dist(c, anchor) <= spawn_radius) nearby.push_back(c);
  }
  if (static_cast<int>(nearby.size()) < n_r) {
    throw ArgumentError("spawn_robots: fewer than " + std::to_string(n_r) +
                        " free cells within spawn radius");
  }
  std::vector<RobotState> robots;
  std::vector<Cell> taken;
  robots.push_back(make_robot(anchor, kRotStep * rng.next_below(kHeadingCount), 0));
  taken.push_back(anchor);
  for (int i = 1; i < n_r; ++i) {
    Cell c;
    do {
      c = nearby[rng.next_below(nearby.size())];
    } while (std::find(taken.begin(), taken.end(), c) != taken.end());
    taken.push_back(c);
    robots.push_back(make_robot(c, kRotStep * rng.next_below(kHeadingCount), i));
  }
  return robots;
}

// ---------------------------------------------------------------------------
// Supercover ray traversal: visits every cell the segment touches, so a
// diagonal gap between two obstacle corners blocks the ray.
// ---------------------------------------------------------------------------

// Cells touched by a ray from (ox, oy) in direction (dx, dy), in traversal
// order, stopping when the cell-center distance from the start cell exceeds
// max_range or the grid boundary is reached.
inline std::vector<Cell> supercover_ray(double ox, double oy, double dir,
                                        double max_range, int width,
                                        int height) {
  constexpr double kEps = 1e-12;
  const double dx = std::cos(dir);
  const double dy = std::sin(dir);
  int cx = static_cast<int>(std::floor(ox));
  int cy = static_cast<int>(std::floor(oy));
  const Cell start{cx, cy};

  std::vector<Cell> out;
  out.push_back(start);

  const int sx = dx > kEps ? 1 : (dx < -kEps ? -1 : 0);
  const int sy = dy > kEps ? 1 : (dy < -kEps ? -1 : 0);
  if (sx == 0 && sy == 0) return out;

  // Parametric distance to the next vertical/horizontal grid line.
  auto boundary_t = [](double o, double d, int c, int s) {
    if (s == 0) return std::numeric_limits<double>::infinity();
    const double edge = s > 0 ? c + 1.0 : static_cast<double>(c);
    return (edge - o) / d;
  };
  double t_max_x = boundary_t(ox, dx, cx, sx);
  double t_max_y = boundary_t(oy, dy, cy, sy);
  const double t_delta_x = sx != 0 ? std::abs(1.0 / dx) : 0.0;
  const double t_delta_y = sy != 0 ? std::abs(1.0 / dy) : 0.0;

  auto push = [&](int x, int y) -> bool {
    if (x < 0 || x >= width || y < 0 || y >= height) return false;
    if (cell_dist(start, Cell{x, y}) > max_range + kEps) return false;
    out.push_back({x, y});
    return true;
  };

  while (true) {
    if (std::abs(t_max_x - t_max_y) < kEps && sx != 0 && sy != 0) {
      // Exact corner crossing: visit both flanking cells, then the diagonal.
      const bool a = push(cx + sx, cy);
      const bool b = push(cx, cy + sy);
      if (!a || !b) return out;
      cx += sx;
      cy += sy;
      t_max_x += t_delta_x;
      t_max_y += t_delta_y;
      if (!push(cx, cy)) return out;
    } else if (t_max_x < t_max_y) {
      cx += sx;
      t_max_x += t_delta_x;
      if (!push(cx, cy)) return out;
    } else {
      cy += sy;
      t_max_y += t_delta_y;
      if (!push(cx, cy)) return out;
    }
  }
}

// Traces all rays for one robot. Pure: identical inputs give identical scans.
inline DepthScan sense(const GroundTruthMap& world, const RobotState& state,
                       const SensorConfig& cfg) {
  if (cfg.max_range < 1.0) throw ArgumentError("sense: max_range must be >= 1");
  if (cfg.ray_count < 1) throw ArgumentError("sense: ray_count must be >= 1");
  DepthScan scan;
  scan.rays.reserve(cfg.ray_count);
  const Cell origin = state.cell();
  for (int i = 0; i < cfg.ray_count; ++i) {
    double dir;
    if (cfg.fov >= kTwoPi - 1e-9) {
      dir = wrap_angle(kTwoPi * i / cfg.ray_count);
    } else {
      dir = wrap_angle(state.heading - cfg.fov / 2.0 +
                       cfg.fov * (i + 0.5) / cfg.ray_count);
    }
    Ray ray;
    ray.direction = dir;
    auto cells =
        supercover_ray(state.x, state.y, dir, cfg.max_range, world.width(), world.height());
    for (const Cell& c : cells) {
      ray.cells.push_back(c);
      if (world.at(c) == TruthCell::Obstacle) {
        ray.hit_cell = c;
        ray.hit_range = cell_dist(origin, c);
        break;
      }
    }
    scan.rays.push_back(std::move(ray));
  }
  return scan;
}

// Heading quantized to 12 directions maps onto the 8 grid move directions.
inline Cell heading_delta(double heading) {
  const int octant =
      static_cast<int>(std::lround(wrap_angle(heading) / (kPi / 4.0))) % 8;
  static constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  static constexpr int kDy[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  return Cell{kDx[octant], kDy[octant]};
}

// One kinematic step. Forward moves a whole cell when the destination is
// free (diagonal moves additionally need both orthogonal neighbors free, so
// robots cannot cut corners); blocked moves are no-ops.
inline RobotState step(const GroundTruthMap& world, const RobotState& state,
                       Action action) {
  RobotState next = state;
  switch (action) {
    case Action::Forward: {
      const Cell d = heading_delta(state.heading);
      const Cell from = state.cell();
      const Cell to{from.x + d.x, from.y + d.y};
      bool ok = world.is_free(to);
      if (ok && d.x != 0 && d.y != 0) {
        ok = world.is_free({from.x + d.x, from.y}) &&
             world.is_free({from.x, from.y + d.y});
      }
      if (ok) {
        next.x += d.x;
        next.y += d.y;
      }
      break;
    }
    case Action::RotateLeft:
      next.heading = wrap_angle(state.heading + kRotStep);
      break;
    case Action::RotateRight:
      next.heading = wrap_angle(state.heading - kRotStep);
      break;
    case Action::Stay:
      break;
  }
  return next;
}

}  // namespace mrx

#endif  // MRX_WORLDSIM_HPP_
