#include "mrx/topograph.hpp"

#include "doctest.h"
#include "mrx/geodesy.hpp"
#include "mrx/mapping.hpp"
#include "mrx/worldsim.hpp"
#include "oracles.hpp"

using namespace mrx;

namespace {

OccupancyGrid open_grid(int w, int h) {
  OccupancyGrid g(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) g.observe({x, y}, OccCell::Free);
  }
  return g;
}

Tensor random_feat(int c, int h, int w, Rng& rng) {
  Tensor t({c, h, w});
  for (double& v : t.data) v = rng.next_normal();
  return t;
}

std::vector<double> sample(const Tensor& feat, double px, double py) {
  Tape t;
  const VarId f = t.input(feat);
  const VarId v = bilerp(t, f, px, py);
  return t.val(v).data;
}

}  // namespace

TEST_CASE("bilerp: feature-cell centers reproduce the cell exactly") {
  Rng rng(3);
  const Tensor feat = random_feat(4, 4, 4, rng);
  // Feature cell (1, 2) has its center at map coords ((1+0.5)*8, (2+0.5)*8).
  const auto v = sample(feat, 12.0, 20.0);
  for (int c = 0; c < 4; ++c) {
    CHECK(v[c] == doctest::Approx(feat.data[c * 16 + 2 * 4 + 1]).epsilon(1e-12));
  }
}

TEST_CASE("bilerp: midpoint of four cells is their mean") {
  Rng rng(4);
  const Tensor feat = random_feat(3, 4, 4, rng);
  // Midpoint between feature cells (0,0),(1,0),(0,1),(1,1) in map coords.
  const auto v = sample(feat, 8.0, 8.0);
  for (int c = 0; c < 3; ++c) {
    const double mean = (feat.data[c * 16 + 0] + feat.data[c * 16 + 1] +
                         feat.data[c * 16 + 4] + feat.data[c * 16 + 5]) / 4.0;
    CHECK(v[c] == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("bilerp: linear in the feature map") {
  Rng rng(5);
  const Tensor f = random_feat(5, 4, 4, rng);
  const Tensor g = random_feat(5, 4, 4, rng);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = rng.next_normal(), b = rng.next_normal();
    const double px = rng.next_real() * 32.0, py = rng.next_real() * 32.0;
    Tensor combo({5, 4, 4});
    for (std::size_t i = 0; i < combo.data.size(); ++i) {
      combo.data[i] = a * f.data[i] + b * g.data[i];
    }
    const auto vc = sample(combo, px, py);
    const auto vf = sample(f, px, py);
    const auto vg = sample(g, px, py);
    for (int c = 0; c < 5; ++c) {
      CHECK(vc[c] == doctest::Approx(a * vf[c] + b * vg[c]).epsilon(1e-9));
    }
  }
}

TEST_CASE("bilerp: out-of-bounds points clamp to the border") {
  Rng rng(6);
  const Tensor feat = random_feat(2, 4, 4, rng);
  const auto low = sample(feat, -5.0, -5.0);
  for (int c = 0; c < 2; ++c) {
    CHECK(low[c] == doctest::Approx(feat.data[c * 16]).epsilon(1e-12));
  }
  const auto high = sample(feat, 100.0, 100.0);
  for (int c = 0; c < 2; ++c) {
    CHECK(high[c] == doctest::Approx(feat.data[c * 16 + 15]).epsilon(1e-12));
  }
}

TEST_CASE("node features: category bits and geometric scalars") {
  const RobotState r = make_robot({10, 20}, kRotStep * 2, 0);
  const TopoNode rn = robot_node(r, 32, 32);
  CHECK(rn.cla[0] == 1.0);
  CHECK(rn.cla[1] == 0.0);
  CHECK(rn.geo[0] == doctest::Approx(10.5 / 32.0));
  CHECK(rn.geo[1] == doctest::Approx(20.5 / 32.0));
  CHECK(rn.geo[2] == doctest::Approx(kRotStep * 2 / kTwoPi));

  const TopoNode fn = frontier_node({8, 4}, 3, 12, 32, 32);
  CHECK(fn.cla[0] == 0.0);
  CHECK(fn.cla[1] == 1.0);
  CHECK(fn.geo[2] == doctest::Approx(0.25));
}

TEST_CASE("history buffer: FIFO eviction preserves order") {
  HistoryBuffer h(3);
  for (int i = 0; i < 5; ++i) {
    TopoNode n{};
    n.px = i;
    h.push(n);
  }
  REQUIRE(h.size() == 3);
  CHECK(h.nodes()[0].px == 2.0);
  CHECK(h.nodes()[1].px == 3.0);
  CHECK(h.nodes()[2].px == 4.0);
}

TEST_CASE("build_graph_set: no history, complete robot-frontier edges") {
  OccupancyGrid g = open_grid(32, 32);
  std::vector<RobotState> robots{make_robot({5, 5}, 0.0, 0),
                                 make_robot({8, 5}, 0.0, 1)};
  FrontierClusters clusters =
      cluster_frontiers({{20, 20}, {21, 20}, {4, 28}, {28, 4}});
  REQUIRE(clusters.size() == 3);

  HistoryBuffer none(8);
  const TopoGraphSet ts = build_graph_set(robots, clusters, g, none, none);
  CHECK(ts.n_robots() == 2);
  CHECK(ts.n_frontiers() == 3);
  CHECK(ts.robot_history.empty());
  CHECK(ts.goal_history.empty());
  CHECK(ts.d_robot_history.empty());
  CHECK(ts.d_frontier_history.empty());
  CHECK(ts.d_robot_frontier.size() == 6);

  const double diag = std::sqrt(2.0) * 32.0;
  for (std::size_t i = 0; i < ts.d_robot_frontier.size(); ++i) {
    CHECK(ts.d_robot_frontier[i] >= 0.0);
    CHECK(ts.d_robot_frontier[i] <= kUnreachableDistance);
    CHECK(ts.d_robot_frontier[i] ==
          doctest::Approx(ts.raw_robot_frontier[i] / diag).epsilon(1e-12));
  }
}

TEST_CASE("build_graph_set: unreachable pairs get the sentinel") {
  OccupancyGrid g = open_grid(16, 16);
  for (int y = 0; y < 16; ++y) g.observe({8, y}, OccCell::Obstacle);
  std::vector<RobotState> robots{make_robot({2, 2}, 0.0, 0)};
  FrontierClusters clusters = cluster_frontiers({{12, 12}});
  HistoryBuffer none(8);
  const TopoGraphSet ts = build_graph_set(robots, clusters, g, none, none);
  CHECK(ts.d_robot_frontier[0] == kUnreachableDistance);
  CHECK(ts.raw_robot_frontier[0] == kInf);
}

TEST_CASE("build_graph_set: history distances computed against current scene") {
  OccupancyGrid g = open_grid(24, 24);
  std::vector<RobotState> robots{make_robot({4, 4}, 0.0, 0)};
  FrontierClusters clusters = cluster_frontiers({{20, 4}});

  HistoryBuffer rh(8), gh(8);
  TopoNode past{};
  past.cla[0] = 1.0;
  past.px = 10.5;
  past.py = 4.5;
  rh.push(past);
  TopoNode goal{};
  goal.cla[1] = 1.0;
  goal.px = 4.5;
  goal.py = 20.5;
  gh.push(goal);

  const TopoGraphSet ts = build_graph_set(robots, clusters, g, rh, gh);
  REQUIRE(ts.d_robot_history.size() == 1);
  REQUIRE(ts.d_frontier_history.size() == 1);

  const double diag = std::sqrt(2.0) * 24.0;
  const double d_rh = geodesic_distance(g, {4, 4}, {10, 4}) / diag;
  CHECK(ts.d_robot_history[0] == doctest::Approx(d_rh).epsilon(1e-9));
  const double d_fg = geodesic_distance(g, {20, 4}, {4, 20}) / diag;
  CHECK(ts.d_frontier_history[0] == doctest::Approx(d_fg).epsilon(1e-9));
}

TEST_CASE("cross distances are symmetric within solver tolerance") {
  Rng rng(9);
  OccupancyGrid g = open_grid(24, 24);
  for (int i = 0; i < 60; ++i) {
    g.observe({(int)rng.next_below(24), (int)rng.next_below(24)}, OccCell::Obstacle);
  }
  for (int trial = 0; trial < 20; ++trial) {
    Cell a{(int)rng.next_below(24), (int)rng.next_below(24)};
    Cell b{(int)rng.next_below(24), (int)rng.next_below(24)};
    if (!g.is_free(a) || !g.is_free(b)) continue;
    const double ab = geodesic_distance(g, a, b);
    const double ba = geodesic_distance(g, b, a);
    if (ab == kInf) {
      CHECK(ba == kInf);
    } else {
      CHECK(ab == doctest::Approx(ba).epsilon(0.05));
    }
  }
}
