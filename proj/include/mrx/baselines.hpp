#ifndef MRX_BASELINES_HPP_
#define MRX_BASELINES_HPP_

#include <algorithm>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mrx/core.hpp"
#include "mrx/geodesy.hpp"
#include "mrx/mapping.hpp"
#include "mrx/worldsim.hpp"

namespace mrx {

// ---------------------------------------------------------------------------
// Classical goal-assignment planners over the shared frontier clustering.
// A planner maps the current scene to one goal cell per robot; a robot sent
// to its own cell idles for the cycle.
// ---------------------------------------------------------------------------

struct PlannerScene {
  const OccupancyGrid& grid;
  std::vector<RobotState> robots;
  FrontierClusters clusters;
  std::vector<Cell> frontier_points;
  double sensor_range = 30.0;
  std::vector<DistanceField> robot_fields;  // FMM from each robot's cell
};

inline PlannerScene make_planner_scene(const OccupancyGrid& grid,
                                       const std::vector<RobotState>& robots,
                                       const FrontierClusters& clusters,
                                       const std::vector<Cell>& frontier_points,
                                       double sensor_range) {
  PlannerScene s{grid, robots, clusters, frontier_points, sensor_range, {}};
  for (const RobotState& r : robots) {
    s.robot_fields.push_back(fmm_field(grid, {r.cell()}));
  }
  return s;
}

using Planner =
    std::function<std::vector<Cell>(const PlannerScene&, std::uint64_t seed)>;

// Exact minimum-cost assignment (potentials / augmenting shortest paths).
// Rectangular inputs are padded square; `cost` is row-major [rows x cols].
// Returns the assigned column per row, -1 for rows left on padding.
inline std::vector<int> hungarian(const std::vector<double>& cost, int rows,
                                  int cols) {
  const int n = std::max(rows, cols);
  const double big = 1e9;
  auto at = [&](int i, int j) {
    return i < rows && j < cols ? std::min(cost[i * cols + j], big) : big;
  };
  std::vector<double> u(n + 1), v(n + 1);
  std::vector<int> p(n + 1), way(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = std::numeric_limits<double>::infinity();
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> match(rows, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] >= 1 && p[j] <= rows && j <= cols && at(p[j] - 1, j - 1) < big) {
      match[p[j] - 1] = j - 1;
    }
  }
  return match;
}

namespace detail {

inline double field_or_inf(const DistanceField& f, Cell c) {
  return f.reachable(c) ? f.at(c) : kInf;
}

}  // namespace detail

// Information-gain planner: each robot independently takes the cluster
// center with the most Unknown cells inside the sensing disk around it;
// ties break toward the FMM-nearer center, then the lower cluster index.
inline std::vector<Cell> utility_planner(const PlannerScene& s, std::uint64_t) {
  const int n_f = s.clusters.size();
  std::vector<int> gains(n_f, 0);
  for (int j = 0; j < n_f; ++j) {
    const Cell c = s.clusters.centers[j];
    const int r = static_cast<int>(std::ceil(s.sensor_range));
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const Cell q{c.x + dx, c.y + dy};
        if (!s.grid.in_bounds(q)) continue;
        if (cell_dist(c, q) > s.sensor_range) continue;
        if (s.grid.at(q) == OccCell::Unknown) ++gains[j];
      }
    }
  }
  std::vector<Cell> goals;
  for (std::size_t i = 0; i < s.robots.size(); ++i) {
    int best = -1;
    for (int j = 0; j < n_f; ++j) {
      if (detail::field_or_inf(s.robot_fields[i], s.clusters.centers[j]) == kInf) {
        continue;
      }
      if (best == -1) {
        best = j;
        continue;
      }
      const double dj = s.robot_fields[i].at(s.clusters.centers[j]);
      const double db = s.robot_fields[i].at(s.clusters.centers[best]);
      if (gains[j] > gains[best] ||
          (gains[j] == gains[best] && dj < db - 1e-9)) {
        best = j;
      }
    }
    goals.push_back(best >= 0 ? s.clusters.centers[best] : s.robots[i].cell());
  }
  return goals;
}

// Voronoi partition of cluster centers by FMM-nearest robot; each robot
// takes its nearest owned center, falling back to the globally nearest
// center no other robot has taken.
inline std::vector<Cell> voronoi_planner(const PlannerScene& s, std::uint64_t) {
  const int n_r = static_cast<int>(s.robots.size());
  const int n_f = s.clusters.size();
  std::vector<int> owner(n_f, -1);
  for (int j = 0; j < n_f; ++j) {
    double best = kInf;
    for (int i = 0; i < n_r; ++i) {
      const double d = detail::field_or_inf(s.robot_fields[i], s.clusters.centers[j]);
      if (d < best - 1e-9) {
        best = d;
        owner[j] = i;
      }
    }
  }
  std::vector<Cell> goals(n_r);
  std::vector<bool> taken(n_f, false);
  for (int i = 0; i < n_r; ++i) {
    int pick = -1;
    for (int j = 0; j < n_f; ++j) {
      if (owner[j] != i) continue;
      if (pick == -1 || s.robot_fields[i].at(s.clusters.centers[j]) <
                            s.robot_fields[i].at(s.clusters.centers[pick])) {
        pick = j;
      }
    }
    if (pick == -1) {
      for (int j = 0; j < n_f; ++j) {
        if (taken[j]) continue;
        const double d = detail::field_or_inf(s.robot_fields[i], s.clusters.centers[j]);
        if (d == kInf) continue;
        if (pick == -1 || d < s.robot_fields[i].at(s.clusters.centers[pick])) {
          pick = j;
        }
      }
    }
    if (pick >= 0) {
      taken[pick] = true;
      goals[i] = s.clusters.centers[pick];
    } else {
      goals[i] = s.robots[i].cell();
    }
  }
  return goals;
}

// Seeded k-means over raw frontier points, k = min(n_r, points); robots are
// matched to the k groups by minimum-total-FMM cost, leftovers take their
// nearest representative. A group's representative is the frontier point
// nearest its centroid.
inline std::vector<Cell> coscan_planner(const PlannerScene& s, std::uint64_t seed) {
  const int n_r = static_cast<int>(s.robots.size());
  const auto& pts = s.frontier_points;
  const int k = std::min<int>(n_r, static_cast<int>(pts.size()));
  if (k == 0) {
    std::vector<Cell> idle;
    for (const RobotState& r : s.robots) idle.push_back(r.cell());
    return idle;
  }

  Rng rng(seed);
  std::vector<double> cx(k), cy(k);
  for (int j = 0; j < k; ++j) {
    const Cell p = pts[rng.next_below(pts.size())];
    cx[j] = p.x;
    cy[j] = p.y;
  }
  std::vector<int> assign(pts.size(), 0);
  for (int iter = 0; iter < 20; ++iter) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double best = kInf;
      for (int j = 0; j < k; ++j) {
        const double dx = pts[i].x - cx[j], dy = pts[i].y - cy[j];
        const double d = dx * dx + dy * dy;
        if (d < best) {
          best = d;
          assign[i] = j;
        }
      }
    }
    for (int j = 0; j < k; ++j) {
      double sx = 0, sy = 0;
      int cnt = 0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (assign[i] == j) {
          sx += pts[i].x;
          sy += pts[i].y;
          ++cnt;
        }
      }
      if (cnt > 0) {
        cx[j] = sx / cnt;
        cy[j] = sy / cnt;
      } else {
        const Cell p = pts[rng.next_below(pts.size())];
        cx[j] = p.x;
        cy[j] = p.y;
      }
    }
  }

  std::vector<Cell> reps(k);
  for (int j = 0; j < k; ++j) {
    double best = kInf;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double dx = pts[i].x - cx[j], dy = pts[i].y - cy[j];
      const double d = dx * dx + dy * dy;
      if (d < best) {
        best = d;
        reps[j] = pts[i];
      }
    }
  }

  std::vector<double> cost(static_cast<std::size_t>(n_r) * k);
  for (int i = 0; i < n_r; ++i) {
    for (int j = 0; j < k; ++j) {
      cost[i * k + j] = detail::field_or_inf(s.robot_fields[i], reps[j]);
    }
  }
  const std::vector<int> match = hungarian(cost, n_r, k);
  std::vector<Cell> goals(n_r);
  for (int i = 0; i < n_r; ++i) {
    int j = match[i];
    if (j < 0) {
      // More robots than groups: take the reachable nearest representative.
      double best = kInf;
      for (int cand = 0; cand < k; ++cand) {
        const double d = detail::field_or_inf(s.robot_fields[i], reps[cand]);
        if (d < best) {
          best = d;
          j = cand;
        }
      }
    }
    goals[i] = j >= 0 ? reps[j] : s.robots[i].cell();
  }
  return goals;
}

// Greedy cheapest-insertion multi-tour routing: every cluster center joins
// exactly one robot's open tour at the globally cheapest insertion point.
inline std::vector<std::vector<int>> mtsp_tours(const PlannerScene& s) {
  const int n_r = static_cast<int>(s.robots.size());
  const int n_f = s.clusters.size();

  // Pairwise distances among centers, one FMM solve per center.
  std::vector<std::vector<double>> center_d(n_f, std::vector<double>(n_f, kInf));
  for (int a = 0; a < n_f; ++a) {
    const auto field = fmm_field(s.grid, {s.clusters.centers[a]});
    for (int b = 0; b < n_f; ++b) {
      center_d[a][b] = detail::field_or_inf(field, s.clusters.centers[b]);
    }
  }
  auto robot_to_center = [&](int i, int j) {
    return detail::field_or_inf(s.robot_fields[i], s.clusters.centers[j]);
  };

  std::vector<std::vector<int>> tours(n_r);  // center indices, in visit order
  std::vector<bool> placed(n_f, false);
  for (int round = 0; round < n_f; ++round) {
    double best_cost = kInf;
    int best_c = -1, best_tour = -1, best_pos = -1;
    for (int c = 0; c < n_f; ++c) {
      if (placed[c]) continue;
      for (int i = 0; i < n_r; ++i) {
        const auto& tour = tours[i];
        for (int pos = 0; pos <= static_cast<int>(tour.size()); ++pos) {
          const double prev = pos == 0 ? robot_to_center(i, c)
                                       : center_d[tour[pos - 1]][c];
          double delta = prev;
          if (pos < static_cast<int>(tour.size())) {
            const double old = pos == 0 ? robot_to_center(i, tour[0])
                                        : center_d[tour[pos - 1]][tour[pos]];
            delta += center_d[c][tour[pos]] - old;
          }
          if (delta < best_cost - 1e-12) {
            best_cost = delta;
            best_c = c;
            best_tour = i;
            best_pos = pos;
          }
        }
      }
    }
    if (best_c < 0) break;  // remaining centers unreachable from every tour
    tours[best_tour].insert(tours[best_tour].begin() + best_pos, best_c);
    placed[best_c] = true;
  }
  return tours;
}

// Each robot's goal is the first stop of its tour; robots with empty tours
// idle in place.
inline std::vector<Cell> mtsp_planner(const PlannerScene& s, std::uint64_t) {
  const auto tours = mtsp_tours(s);
  std::vector<Cell> goals(s.robots.size());
  for (std::size_t i = 0; i < s.robots.size(); ++i) {
    goals[i] = tours[i].empty() ? s.robots[i].cell()
                                : s.clusters.centers[tours[i][0]];
  }
  return goals;
}

// Yamauchi-style: every robot independently heads to its FMM-nearest
// reachable cluster center; goals may coincide.
inline std::vector<Cell> nearest_frontier_planner(const PlannerScene& s,
                                                  std::uint64_t) {
  std::vector<Cell> goals;
  for (std::size_t i = 0; i < s.robots.size(); ++i) {
    int pick = -1;
    double best = kInf;
    for (int j = 0; j < s.clusters.size(); ++j) {
      const double d = detail::field_or_inf(s.robot_fields[i], s.clusters.centers[j]);
      if (d < best - 1e-12) {
        best = d;
        pick = j;
      }
    }
    goals.push_back(pick >= 0 ? s.clusters.centers[pick] : s.robots[i].cell());
  }
  return goals;
}

inline Planner planner_by_name(const std::string& name) {
  if (name == "utility") return utility_planner;
  if (name == "voronoi") return voronoi_planner;
  if (name == "coscan") return coscan_planner;
  if (name == "mtsp") return mtsp_planner;
  if (name == "nearest") return nearest_frontier_planner;
  throw ArgumentError("unknown planner: " + name);
}

}  // namespace mrx

#endif  // MRX_BASELINES_HPP_
