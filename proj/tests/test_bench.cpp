#include "mrx/bench.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <tuple>
#include <fstream>
#include <queue>
#include <sstream>
#include <string>

#include "doctest.h"
#include "oracles.hpp"

using namespace mrx;

namespace {

std::string boxed_world(int w, int h) {
  std::string text;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      text += (x == 0 || y == 0 || x == w - 1 || y == h - 1) ? '#' : '.';
    }
    text += '\n';
  }
  return text;
}

std::string temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "mrx_bench_test";
  std::filesystem::create_directories(dir);
  return dir.string();
}

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.n_robots = 2;
  cfg.max_steps = 800;
  cfg.sensor_range = 8.0;
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("parse_config reads keys, lists, and comments") {
  std::stringstream in(
      "# suite setup\n"
      "corpus=maps\n"
      "planner=utility,voronoi\n"
      "robots=3\n"
      "seeds=1,2,5\n"
      "max_steps=1234\n"
      "sensor_range=12.5\n"
      "out=results  \n");
  const RunConfig cfg = parse_config(in);
  CHECK(cfg.corpus_dir == "maps");
  CHECK(cfg.planners == std::vector<std::string>{"utility", "voronoi"});
  CHECK(cfg.n_robots == 3);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 5});
  CHECK(cfg.max_steps == 1234);
  CHECK(cfg.sensor_range == doctest::Approx(12.5));
  CHECK(cfg.out_dir == "results");

  std::stringstream bad_key("warp_speed=9\n");
  CHECK_THROWS_AS(parse_config(bad_key), FormatError);
  std::stringstream bad_line("robots 3\n");
  CHECK_THROWS_AS(parse_config(bad_line), FormatError);
}

TEST_CASE("run_episode completes a small room and reports sane metrics") {
  const LoadedWorld lw = load_world(boxed_world(24, 24));
  const RunConfig cfg = tiny_config();
  EpisodeTrace trace;
  const EpisodeMetrics m =
      run_episode(cfg, lw, "nearest", 5, nullptr, nullptr, &trace);

  CHECK(m.completed);
  CHECK(m.exploration_rate >= 0.99);
  CHECK(m.steps_to_completion > 0);
  CHECK(m.steps_to_completion <= cfg.max_steps);
  CHECK(m.path_lengths.size() == 2);
  CHECK(m.overlap_ratio >= 0.0);
  CHECK(m.overlap_ratio <= 1.0);
  for (std::size_t i = 1; i < m.rate_curve.size(); ++i) {
    CHECK(m.rate_curve[i] >= m.rate_curve[i - 1]);
  }

  // Trail arc length recomputed from the trace matches the metric.
  REQUIRE(trace.trails.size() == 2);
  for (int i = 0; i < 2; ++i) {
    double len = 0.0;
    for (std::size_t k = 1; k < trace.trails[i].size(); ++k) {
      len += cell_dist(trace.trails[i][k - 1], trace.trails[i][k]);
    }
    CHECK(m.path_lengths[i] == doctest::Approx(len));
  }
}

TEST_CASE("run_episode: explored free area matches the reachable area") {
  const LoadedWorld lw = load_world(boxed_world(20, 20));
  RunConfig cfg = tiny_config();
  EpisodeTrace trace;
  const EpisodeMetrics m =
      run_episode(cfg, lw, "utility", 9, nullptr, nullptr, &trace);
  REQUIRE(m.completed);

  // Flood-fill oracle over the ground truth free component.
  int free_total = static_cast<int>(lw.map.free_component().size());
  int seen = 0;
  for (const Cell& c : lw.map.free_component()) {
    if (trace.final_grid[c.y * trace.width + c.x] != OccCell::Unknown) ++seen;
  }
  CHECK(double(seen) / free_total >= 0.99);
  CHECK(double(seen) / free_total == doctest::Approx(m.exploration_rate));
}

TEST_CASE("run_episode with a zero step cap does nothing but initial sensing") {
  const LoadedWorld lw = load_world(boxed_world(20, 20));
  RunConfig cfg = tiny_config();
  cfg.max_steps = 0;
  const EpisodeMetrics m = run_episode(cfg, lw, "nearest", 1);
  CHECK(!m.completed);
  CHECK(m.steps_to_completion == 0);
  CHECK(m.rate_curve.empty());
  CHECK(m.exploration_rate > 0.0);
  CHECK(m.exploration_rate < 1.0);
}

TEST_CASE("run_episode rejects unknown planners and missing policy params") {
  const LoadedWorld lw = load_world(boxed_world(20, 20));
  RunConfig cfg = tiny_config();
  CHECK_THROWS_AS(run_episode(cfg, lw, "wavefront", 1), ArgumentError);
  CHECK_THROWS_AS(run_episode(cfg, lw, "policy", 1), ArgumentError);
}

TEST_CASE("run_episode drives the untrained policy through a small map") {
  const LoadedWorld lw = load_world(boxed_world(24, 24));
  RunConfig cfg = tiny_config();
  cfg.max_steps = 900;
  NetConfig net;
  net.map_width = net.map_height = 24;
  const ParameterSet params = init_parameters(net, 77);
  const EpisodeMetrics m = run_episode(cfg, lw, "policy", 3, &params, &net);
  CHECK(m.completed);
  CHECK(m.exploration_rate >= 0.99);
}

TEST_CASE("run_suite produces one row per map x planner x seed, sorted") {
  const std::string dir = temp_dir() + "/corpus_a";
  std::filesystem::create_directories(dir);
  std::ofstream(dir + "/b_room.txt") << boxed_world(20, 20);
  std::ofstream(dir + "/a_room.txt") << boxed_world(22, 18);

  RunConfig cfg = tiny_config();
  cfg.corpus_dir = dir;
  cfg.planners = {"voronoi", "nearest"};
  cfg.seeds = {4, 2};
  const SuiteResult res = run_suite(cfg);

  REQUIRE(res.rows.size() == 2 * 2 * 2);
  for (std::size_t i = 1; i < res.rows.size(); ++i) {
    const auto& a = res.rows[i - 1];
    const auto& b = res.rows[i];
    const auto ka = std::make_tuple(a.map_name, a.planner, a.seed);
    const auto kb = std::make_tuple(b.map_name, b.planner, b.seed);
    CHECK(ka < kb);
  }
  CHECK(res.rows.front().map_name == "a_room.txt");

  // Aggregate means recomputed from the rows appear verbatim in the CSV.
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> agg;
  for (const SuiteRow& r : res.rows) {
    auto& [sum, n] = agg[{r.size_class, r.planner}];
    sum += r.metrics.steps_to_completion;
    ++n;
  }
  CHECK(agg.size() == 4);  // two size classes x two planners
  for (const auto& [key, acc] : agg) {
    char expect[160];
    std::snprintf(expect, sizeof(expect), "aggregate,%s,%s,%d,%.6f,",
                  key.first.c_str(), key.second.c_str(), acc.second,
                  acc.first / acc.second);
    CHECK(res.csv.find(expect) != std::string::npos);
  }
}

TEST_CASE("run_suite CSV is byte-identical across reruns") {
  const std::string dir = temp_dir() + "/corpus_b";
  std::filesystem::create_directories(dir);
  std::ofstream(dir + "/room.txt") << boxed_world(20, 20);

  RunConfig cfg = tiny_config();
  cfg.corpus_dir = dir;
  cfg.planners = {"utility", "mtsp"};
  cfg.seeds = {11, 12};
  const SuiteResult a = run_suite(cfg);
  const SuiteResult b = run_suite(cfg);
  CHECK(a.csv == b.csv);
  CHECK(!a.csv.empty());
}

TEST_CASE("run_suite rejects empty corpora and empty seed lists") {
  const std::string dir = temp_dir() + "/corpus_empty";
  std::filesystem::create_directories(dir);
  RunConfig cfg = tiny_config();
  cfg.corpus_dir = dir;
  CHECK_THROWS_AS(run_suite(cfg), ArgumentError);

  RunConfig no_seeds = tiny_config();
  no_seeds.map_paths = {"unused"};
  no_seeds.seeds.clear();
  CHECK_THROWS_AS(run_suite(no_seeds), ArgumentError);
}

TEST_CASE("render writes a P6 image with the exact header and payload size") {
  EpisodeTrace trace;
  trace.width = 16;
  trace.height = 16;
  trace.final_grid.assign(16 * 16, OccCell::Unknown);
  const std::string path = temp_dir() + "/blank.ppm";
  render(trace, path);

  const std::string data = read_file(path);
  const std::string header = "P6\n16 16\n255\n";
  REQUIRE(data.size() == header.size() + 16 * 16 * 3);
  CHECK(data.compare(0, header.size(), header) == 0);
  // Fully unknown trace: every payload byte is the gray value.
  for (std::size_t i = header.size(); i < data.size(); ++i) {
    CHECK(static_cast<unsigned char>(data[i]) == 128);
  }
}

TEST_CASE("render palette: obstacles, free space, trails, and goals") {
  EpisodeTrace trace;
  trace.width = 8;
  trace.height = 4;
  trace.final_grid.assign(8 * 4, OccCell::Unknown);
  trace.final_grid[0] = OccCell::Obstacle;          // (0, 0)
  trace.final_grid[1] = OccCell::Free;              // (1, 0)
  trace.trails = {{{2, 0}, {3, 0}}, {{2, 1}}};
  trace.last_goals = {{7, 3}};
  const std::string path = temp_dir() + "/palette.ppm";
  render(trace, path);

  const std::string data = read_file(path);
  const std::size_t off = std::string("P6\n8 4\n255\n").size();
  auto px = [&](int x, int y) {
    const std::size_t i = off + (static_cast<std::size_t>(y) * 8 + x) * 3;
    return std::array<unsigned char, 3>{static_cast<unsigned char>(data[i]),
                                        static_cast<unsigned char>(data[i + 1]),
                                        static_cast<unsigned char>(data[i + 2])};
  };
  CHECK(px(0, 0) == std::array<unsigned char, 3>{0, 200, 0});
  CHECK(px(1, 0) == std::array<unsigned char, 3>{173, 216, 230});
  CHECK(px(4, 0) == std::array<unsigned char, 3>{128, 128, 128});
  // Two robots get distinct trail colors; the goal marker is red.
  CHECK(px(2, 0) == px(3, 0));
  CHECK(px(2, 0) != px(2, 1));
  CHECK(px(7, 3) == std::array<unsigned char, 3>{255, 0, 0});

  EpisodeTrace empty;
  CHECK_THROWS_AS(render(empty, path), ArgumentError);
}
