#include "mrx/mapping.hpp"

#include <set>

#include "doctest.h"
#include "mrx/worldsim.hpp"

using namespace mrx;

namespace {

DepthScan single_ray(std::vector<Cell> cells, bool hit) {
  Ray r;
  r.cells = std::move(cells);
  if (hit) {
    r.hit_cell = r.cells.back();
    r.hit_range = cell_dist(r.cells.front(), r.cells.back());
  }
  DepthScan s;
  s.rays.push_back(std::move(r));
  return s;
}

}  // namespace

TEST_CASE("integrate_scan: hit ray marks free prefix and one obstacle") {
  OccupancyGrid g(8, 8);
  auto scan = single_ray({{1, 1}, {2, 1}, {3, 1}, {4, 1}}, true);
  integrate_scan(g, scan);
  CHECK(g.at({1, 1}) == OccCell::Free);
  CHECK(g.at({2, 1}) == OccCell::Free);
  CHECK(g.at({3, 1}) == OccCell::Free);
  CHECK(g.at({4, 1}) == OccCell::Obstacle);
  CHECK(g.explored_count() == 4);
}

TEST_CASE("integrate_scan: idempotent") {
  OccupancyGrid g(8, 8);
  auto scan = single_ray({{1, 1}, {2, 1}, {3, 1}}, true);
  integrate_scan(g, scan);
  const int count = g.explored_count();
  integrate_scan(g, scan);
  CHECK(g.explored_count() == count);
  CHECK(g.at({3, 1}) == OccCell::Obstacle);
}

TEST_CASE("integrate_scan: no-hit ray of range 5 marks 6 free cells") {
  OccupancyGrid g(8, 8);
  auto scan = single_ray({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}}, false);
  integrate_scan(g, scan);
  CHECK(g.explored_count() == 6);
  for (int x = 0; x <= 5; ++x) CHECK(g.at({x, 0}) == OccCell::Free);
}

TEST_CASE("integrate_scan: obstacle wins on conflict") {
  OccupancyGrid g(4, 4);
  integrate_scan(g, single_ray({{1, 1}}, true));
  integrate_scan(g, single_ray({{1, 1}}, false));
  CHECK(g.at({1, 1}) == OccCell::Obstacle);
}

TEST_CASE("detect_frontiers: trivial grids") {
  OccupancyGrid full(3, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) full.observe({x, y}, OccCell::Free);
  }
  CHECK(detect_frontiers(full).empty());

  OccupancyGrid lone(3, 3);
  lone.observe({1, 1}, OccCell::Free);
  auto f = detect_frontiers(lone);
  REQUIRE(f.size() == 1);
  CHECK(f[0] == Cell{1, 1});
}

TEST_CASE("detect_frontiers: equals brute-force predicate on a sensed disk") {
  OccupancyGrid g(24, 24);
  const Cell center{12, 12};
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 24; ++x) {
      if (cell_dist(center, {x, y}) <= 5.0) g.observe({x, y}, OccCell::Free);
    }
  }
  auto fast = detect_frontiers(g);
  std::vector<Cell> brute;
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 24; ++x) {
      const Cell c{x, y};
      if (g.at(c) != OccCell::Free) continue;
      bool frontier = false;
      const Cell nb[4] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
      for (const Cell& n : nb) {
        if (g.in_bounds(n) && g.at(n) == OccCell::Unknown) frontier = true;
      }
      if (frontier) brute.push_back(c);
    }
  }
  CHECK(fast == brute);
  CHECK_FALSE(fast.empty());
}

TEST_CASE("cluster_frontiers: singles and separation") {
  auto one = cluster_frontiers({{3, 3}}, 2.0);
  REQUIRE(one.size() == 1);
  CHECK(one.centers[0] == Cell{3, 3});
  CHECK(one.counts[0] == 1);

  // Two points at distance r_clus + 1 form two singleton clusters.
  auto two = cluster_frontiers({{0, 0}, {3, 0}}, 2.0);
  CHECK(two.size() == 2);

  CHECK(cluster_frontiers({}, 2.0).empty());
  CHECK_THROWS_AS(cluster_frontiers({{0, 0}}, 0.0), ArgumentError);
}

TEST_CASE("cluster_frontiers: collinear chain picks the middle center") {
  // Spacing r_clus - 1 keeps the chain connected.
  std::vector<Cell> pts{{0, 0}, {2, 0}, {4, 0}, {6, 0}, {8, 0}};
  auto c = cluster_frontiers(pts, 3.0);
  REQUIRE(c.size() == 1);
  CHECK(c.counts[0] == 5);
  // Enumerate average distances over all five candidates.
  Cell best{-1, -1};
  double best_avg = 1e18;
  for (const Cell& cand : pts) {
    double sum = 0;
    for (const Cell& o : pts) sum += cell_dist(cand, o);
    const double avg = sum / 4.0;
    if (avg < best_avg) {
      best_avg = avg;
      best = cand;
    }
  }
  CHECK(best == Cell{4, 0});
  CHECK(c.centers[0] == best);
}

TEST_CASE("cluster_frontiers: invariants on random point sets") {
  Rng rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    std::set<std::pair<int, int>> uniq;
    const int n = 1 + (int)rng.next_below(60);
    while ((int)uniq.size() < n) {
      uniq.insert({(int)rng.next_below(40), (int)rng.next_below(40)});
    }
    std::vector<Cell> pts;
    for (auto [x, y] : uniq) pts.push_back({x, y});
    const double r_clus = 2.0 + rng.next_real() * 6.0;
    auto out = cluster_frontiers(pts, r_clus);

    // Partition.
    std::set<std::pair<int, int>> covered;
    int total = 0;
    for (const auto& cl : out.clusters) {
      for (const Cell& p : cl) covered.insert({p.x, p.y});
      total += (int)cl.size();
    }
    CHECK(total == n);
    CHECK(covered == uniq);

    for (int i = 0; i < out.size(); ++i) {
      const auto& cl = out.clusters[i];
      // Center belongs to the cluster and minimizes average distance.
      CHECK(std::find(cl.begin(), cl.end(), out.centers[i]) != cl.end());
      double center_sum = 0;
      for (const Cell& o : cl) center_sum += cell_dist(out.centers[i], o);
      for (const Cell& cand : cl) {
        double sum = 0;
        for (const Cell& o : cl) sum += cell_dist(cand, o);
        CHECK(center_sum <= sum + 1e-9);
      }
      // r_clus-adjacency connectivity, by BFS enumeration.
      std::set<int> seen{0};
      std::vector<int> stack{0};
      while (!stack.empty()) {
        int a = stack.back();
        stack.pop_back();
        for (int b = 0; b < (int)cl.size(); ++b) {
          if (!seen.count(b) && cell_dist(cl[a], cl[b]) <= r_clus) {
            seen.insert(b);
            stack.push_back(b);
          }
        }
      }
      CHECK(seen.size() == cl.size());
    }
  }
}

TEST_CASE("build_stacks: channels reflect inputs; privilege shares non-map channels") {
  auto w = load_world(
      "######\n"
      "#....#\n"
      "#....#\n"
      "#....#\n"
      "######\n");
  OccupancyGrid g(w.map.width(), w.map.height());
  auto robots = spawn_robots(w.map, 2, 5);
  SensorConfig cfg;
  for (const auto& r : robots) {
    auto scan = sense(w.map, r, cfg);
    integrate_scan(g, scan);
  }
  auto frontiers = detect_frontiers(g);
  std::vector<std::vector<Cell>> trails{{robots[0].cell()}, {robots[1].cell()}};
  auto stacks = build_stacks(g, w.map, robots, frontiers, trails);

  // Robot channel has exactly n_r set cells.
  double robot_sum = 0;
  const std::size_t plane = (std::size_t)g.width() * g.height();
  for (std::size_t i = 2 * plane; i < 3 * plane; ++i) robot_sum += stacks.obs.data[i];
  CHECK(robot_sum == 2.0);

  // Observation obstacle/free channels disjoint.
  for (std::size_t i = 0; i < plane; ++i) {
    CHECK(stacks.obs.data[i] * stacks.obs.data[plane + i] == 0.0);
  }

  // Every set frontier cell satisfies the frontier predicate.
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      if (stacks.obs.at(3, {x, y}) > 0) CHECK(is_frontier(g, {x, y}));
    }
  }

  // Privilege map channels equal ground truth; other channels copied.
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      const Cell c{x, y};
      CHECK(stacks.priv.at(0, c) == (w.map.at(c) == TruthCell::Obstacle ? 1.0 : 0.0));
      CHECK(stacks.priv.at(1, c) == (w.map.at(c) == TruthCell::Free ? 1.0 : 0.0));
      for (int ch = 2; ch < 5; ++ch) CHECK(stacks.priv.at(ch, c) == stacks.obs.at(ch, c));
    }
  }
}

TEST_CASE("build_stacks: zero robots on empty grid; dimension mismatch throws") {
  auto w = load_world("####\n#..#\n####\n");
  OccupancyGrid g(w.map.width(), w.map.height());
  auto stacks = build_stacks(g, w.map, {}, {}, {});
  const std::size_t plane = (std::size_t)g.width() * g.height();
  for (std::size_t i = 2 * plane; i < stacks.obs.data.size(); ++i) {
    CHECK(stacks.obs.data[i] == 0.0);
  }
  for (std::size_t i = 0; i < 2 * plane; ++i) CHECK(stacks.obs.data[i] == 0.0);

  OccupancyGrid wrong(3, 3);
  CHECK_THROWS_AS(build_stacks(wrong, w.map, {}, {}, {}), ShapeError);
}

TEST_CASE("soundness + monotonicity over a random episode") {
  auto w = load_world(
      "##########\n"
      "#....#...#\n"
      "#.##.#.#.#\n"
      "#........#\n"
      "#.#.####.#\n"
      "#........#\n"
      "##########\n");
  OccupancyGrid g(w.map.width(), w.map.height());
  auto robots = spawn_robots(w.map, 1, 3);
  RobotState s = robots[0];
  SensorConfig cfg;
  Rng rng(17);
  int prev = 0;
  for (int i = 0; i < 150; ++i) {
    integrate_scan(g, sense(w.map, s, cfg));
    CHECK(g.explored_count() >= prev);
    prev = g.explored_count();
    s = step(w.map, s, static_cast<Action>(rng.next_below(4)));
  }
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      const Cell c{x, y};
      if (g.at(c) == OccCell::Free) CHECK(w.map.at(c) == TruthCell::Free);
      if (g.at(c) == OccCell::Obstacle) CHECK(w.map.at(c) == TruthCell::Obstacle);
    }
  }
}
