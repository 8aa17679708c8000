#ifndef MRX_BENCH_HPP_
#define MRX_BENCH_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mrx/baselines.hpp"
#include "mrx/core.hpp"
#include "mrx/geodesy.hpp"
#include "mrx/mapping.hpp"
#include "mrx/policy.hpp"
#include "mrx/training.hpp"
#include "mrx/worldsim.hpp"

namespace mrx {

// ---------------------------------------------------------------------------
// Episode runner, benchmark suite, and rendering.
// ---------------------------------------------------------------------------

struct RunConfig {
  std::vector<std::string> map_paths;
  std::string corpus_dir;
  std::vector<std::string> planners{"nearest"};
  int n_robots = 2;
  std::vector<std::uint64_t> seeds{0};
  int max_steps = 5000;
  int horizon = 15;
  double sensor_range = 30.0;
  int ray_count = 72;
  double r_clus = 8.0;
  double complete_rate = 0.99;
  std::string out_dir = ".";
  std::string checkpoint;  // parameters for the "policy" planner
};

struct EpisodeMetrics {
  int steps_to_completion = 0;  // env steps, or the cap if not completed
  bool completed = false;
  double exploration_rate = 0.0;
  std::vector<double> rate_curve;  // per planning cycle
  std::vector<double> path_lengths;  // per robot, in cells
  double overlap_ratio = 0.0;  // visited by >= 2 robots / visited at all
  int recovery_cycles = 0;  // cycles replanned after a zero-progress cycle
};

struct EpisodeTrace {
  int width = 0;
  int height = 0;
  std::vector<OccCell> final_grid;
  std::vector<std::vector<Cell>> trails;
  std::vector<Cell> last_goals;
};

// Plain-text key=value configuration; '#' starts a comment. Unknown keys
// raise so typos surface instead of silently using defaults.
inline void apply_config_line(RunConfig& cfg, const std::string& key,
                              const std::string& value) {
  auto split_list = [](const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(item);
    }
    return out;
  };
  if (key == "map") {
    cfg.map_paths = split_list(value);
  } else if (key == "corpus") {
    cfg.corpus_dir = value;
  } else if (key == "planner") {
    cfg.planners = split_list(value);
  } else if (key == "robots") {
    cfg.n_robots = std::stoi(value);
  } else if (key == "seeds") {
    cfg.seeds.clear();
    for (const std::string& s : split_list(value)) {
      cfg.seeds.push_back(std::stoull(s));
    }
  } else if (key == "max_steps") {
    cfg.max_steps = std::stoi(value);
  } else if (key == "horizon") {
    cfg.horizon = std::stoi(value);
  } else if (key == "sensor_range") {
    cfg.sensor_range = std::stod(value);
  } else if (key == "ray_count") {
    cfg.ray_count = std::stoi(value);
  } else if (key == "r_clus") {
    cfg.r_clus = std::stod(value);
  } else if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "checkpoint") {
    cfg.checkpoint = value;
  } else {
    throw FormatError("unknown config key: " + key);
  }
}

inline RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(line_no) +
                        ": expected key=value");
    }
    apply_config_line(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  return parse_config(in);
}

// Corpus = every .txt under the directory, sorted by filename.
inline std::vector<std::string> corpus_maps(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".txt") paths.push_back(e.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw ArgumentError("empty corpus: " + dir);
  return paths;
}

// ---------------------------------------------------------------------------
// Episode runner. Baseline planners and the learned policy share the same
// perception -> goal -> path -> act loop and the same step counter.
// ---------------------------------------------------------------------------

inline EpisodeMetrics run_episode(const RunConfig& cfg, const LoadedWorld& lw,
                                  const std::string& planner_name,
                                  std::uint64_t seed,
                                  const ParameterSet* params = nullptr,
                                  const NetConfig* net = nullptr,
                                  EpisodeTrace* trace = nullptr,
                                  SelectMode mode = SelectMode::Argmax) {
  const GroundTruthMap& world = lw.map;
  const bool learned = planner_name == "policy";
  Planner planner;
  if (learned) {
    if (params == nullptr || net == nullptr) {
      throw ArgumentError("run_episode: policy planner needs parameters");
    }
  } else {
    planner = planner_by_name(planner_name);
  }

  SensorConfig sensor;
  sensor.max_range = cfg.sensor_range;
  sensor.ray_count = cfg.ray_count;

  auto robots = spawn_robots(world, cfg.n_robots, seed, lw.spawn_cells);
  OccupancyGrid grid(world.width(), world.height());
  std::vector<std::vector<Cell>> trails(robots.size());
  for (std::size_t i = 0; i < robots.size(); ++i) {
    integrate_scan(grid, sense(world, robots[i], sensor));
    trails[i].push_back(robots[i].cell());
  }

  HistoryBuffer robot_hist(net ? net->history_capacity : 8);
  HistoryBuffer goal_hist(net ? net->history_capacity : 8);
  Rng sample_rng(seed ^ 0x5bd1e9955bd1e995ull);

  EpisodeMetrics m;
  std::vector<Cell> goals;
  int env_steps = 0;
  int last_explored = grid.explored_count();
  bool stalled = false;
  while (env_steps < cfg.max_steps) {
    const auto frontiers = detect_frontiers(grid);
    const double rate = detail::exploration_rate(grid, world);
    if (frontiers.empty() || rate >= cfg.complete_rate) {
      m.completed = true;
      break;
    }
    const auto clusters = cluster_frontiers(frontiers, cfg.r_clus);

    goals.clear();
    if (stalled) {
      // Recovery: a full planning cycle explored nothing new, which means
      // the deterministic planner state can repeat forever. Nearest-frontier
      // goals strictly shrink the distance to the frontier set, so progress
      // resumes within a few cycles.
      const auto scene = make_planner_scene(grid, robots, clusters, frontiers,
                                            cfg.sensor_range);
      goals = nearest_frontier_planner(scene, seed);
      ++m.recovery_cycles;
    } else if (learned) {
      const auto stacks = build_stacks(grid, world, robots, frontiers, trails);
      const auto graphs =
          build_graph_set(robots, clusters, grid, robot_hist, goal_hist);
      Tape t;
      ParamVars pv = load_params(t, *params);
      const VarId feat = conv_encoder(t, pv, stack_input(t, stacks.obs));
      const GoalAssignment ga =
          select_goals(t, pv, *net, graphs, feat, mode, &sample_rng);
      goals = ga.goal_cell;
      const Tensor& fv = t.val(feat);
      for (std::size_t i = 0; i < robots.size(); ++i) {
        TopoNode rn = graphs.robots[i];
        rn.rep = rep_at(fv, rn.px, rn.py);
        robot_hist.push(std::move(rn));
      }
      for (std::size_t i = 0; i < ga.cluster_index.size(); ++i) {
        TopoNode gn = graphs.frontiers[ga.cluster_index[i]];
        gn.rep = rep_at(fv, gn.px, gn.py);
        goal_hist.push(std::move(gn));
      }
    } else {
      const auto scene = make_planner_scene(grid, robots, clusters, frontiers,
                                            cfg.sensor_range);
      goals = planner(scene, seed);
    }

    std::vector<DistanceField> fields;
    for (const Cell& g : goals) fields.push_back(fmm_field(grid, {g}));
    for (int s = 0; s < cfg.horizon && env_steps < cfg.max_steps; ++s) {
      for (std::size_t i = 0; i < robots.size(); ++i) {
        Action act = Action::Stay;
        if (robots[i].cell() != goals[i]) {
          const Cell wp = detail::descend_step(fields[i], robots[i].cell());
          if (wp != robots[i].cell()) act = waypoint_action(robots[i], wp);
        }
        robots[i] = step(world, robots[i], act);
        integrate_scan(grid, sense(world, robots[i], sensor));
        if (trails[i].back() != robots[i].cell()) {
          trails[i].push_back(robots[i].cell());
        }
      }
      ++env_steps;
    }
    m.rate_curve.push_back(detail::exploration_rate(grid, world));
    const int explored = grid.explored_count();
    stalled = explored == last_explored;
    last_explored = explored;
  }

  m.steps_to_completion = env_steps;
  m.exploration_rate = detail::exploration_rate(grid, world);
  for (const auto& trail : trails) {
    double len = 0.0;
    for (std::size_t i = 1; i < trail.size(); ++i) {
      len += cell_dist(trail[i - 1], trail[i]);
    }
    m.path_lengths.push_back(len);
  }
  std::map<Cell, int> visits;
  for (const auto& trail : trails) {
    std::set<Cell> unique(trail.begin(), trail.end());
    for (const Cell& c : unique) ++visits[c];
  }
  int shared = 0;
  for (const auto& [c, n] : visits) shared += n >= 2;
  m.overlap_ratio = visits.empty() ? 0.0 : double(shared) / visits.size();

  if (trace) {
    trace->width = world.width();
    trace->height = world.height();
    trace->final_grid.resize(static_cast<std::size_t>(world.width()) * world.height());
    for (int y = 0; y < world.height(); ++y) {
      for (int x = 0; x < world.width(); ++x) {
        trace->final_grid[y * world.width() + x] = grid.at({x, y});
      }
    }
    trace->trails = trails;
    trace->last_goals = goals;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Suite runner: per (map, planner, seed) rows plus mean/std aggregates per
// planner per map size class. Size classes split the corpus by free-cell
// count tertiles.
// ---------------------------------------------------------------------------

struct SuiteRow {
  std::string map_name;
  std::string size_class;
  std::string planner;
  std::uint64_t seed = 0;
  EpisodeMetrics metrics;
};

struct SuiteResult {
  std::vector<SuiteRow> rows;
  std::string csv;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::vector<std::string> size_classes(const std::vector<int>& free_counts) {
  std::vector<int> sorted = free_counts;
  std::sort(sorted.begin(), sorted.end());
  const int n = static_cast<int>(sorted.size());
  const int lo = sorted[(n - 1) / 3];
  const int hi = sorted[(2 * n - 1) / 3];
  std::vector<std::string> out;
  for (int f : free_counts) {
    out.push_back(f <= lo ? "small" : (f <= hi ? "medium" : "large"));
  }
  return out;
}

}  // namespace detail

inline SuiteResult run_suite(const RunConfig& cfg,
                             const ParameterSet* params = nullptr,
                             const NetConfig* net = nullptr) {
  std::vector<std::string> paths = cfg.map_paths;
  if (paths.empty() && !cfg.corpus_dir.empty()) paths = corpus_maps(cfg.corpus_dir);
  if (paths.empty()) throw ArgumentError("run_suite: no maps given");
  if (cfg.seeds.empty()) throw ArgumentError("run_suite: no seeds given");

  std::vector<LoadedWorld> worlds;
  std::vector<int> free_counts;
  for (const std::string& p : paths) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open map: " + p);
    std::stringstream ss;
    ss << in.rdbuf();
    worlds.push_back(load_world(ss.str()));
    free_counts.push_back(static_cast<int>(worlds.back().map.free_component().size()));
  }
  const auto classes = detail::size_classes(free_counts);

  SuiteResult result;
  for (std::size_t mi = 0; mi < worlds.size(); ++mi) {
    for (const std::string& planner : cfg.planners) {
      for (std::uint64_t seed : cfg.seeds) {
        SuiteRow row;
        row.map_name = std::filesystem::path(paths[mi]).filename().string();
        row.size_class = classes[mi];
        row.planner = planner;
        row.seed = seed;
        row.metrics = run_episode(cfg, worlds[mi], planner, seed, params, net);
        result.rows.push_back(std::move(row));
      }
    }
  }
  std::sort(result.rows.begin(), result.rows.end(),
            [](const SuiteRow& a, const SuiteRow& b) {
              if (a.map_name != b.map_name) return a.map_name < b.map_name;
              if (a.planner != b.planner) return a.planner < b.planner;
              return a.seed < b.seed;
            });

  std::ostringstream csv;
  csv << "map,size_class,planner,seed,steps,completed,exploration_rate,"
         "mean_path_length,overlap_ratio\n";
  for (const SuiteRow& r : result.rows) {
    double mean_len = 0.0;
    for (double l : r.metrics.path_lengths) mean_len += l;
    mean_len /= std::max<std::size_t>(1, r.metrics.path_lengths.size());
    csv << r.map_name << "," << r.size_class << "," << r.planner << ","
        << r.seed << "," << r.metrics.steps_to_completion << ","
        << (r.metrics.completed ? 1 : 0) << ","
        << detail::fmt(r.metrics.exploration_rate) << ","
        << detail::fmt(mean_len) << "," << detail::fmt(r.metrics.overlap_ratio)
        << "\n";
  }

  // Aggregate block: mean/std of steps and exploration rate per planner per
  // size class, in sorted key order.
  csv << "aggregate,size_class,planner,n,mean_steps,std_steps,mean_rate,"
         "std_rate\n";
  std::map<std::pair<std::string, std::string>, std::vector<const SuiteRow*>> groups;
  for (const SuiteRow& r : result.rows) {
    groups[{r.size_class, r.planner}].push_back(&r);
  }
  for (const auto& [key, rows] : groups) {
    double ms = 0, mr = 0;
    for (const SuiteRow* r : rows) {
      ms += r->metrics.steps_to_completion;
      mr += r->metrics.exploration_rate;
    }
    ms /= rows.size();
    mr /= rows.size();
    double vs = 0, vr = 0;
    for (const SuiteRow* r : rows) {
      vs += (r->metrics.steps_to_completion - ms) * (r->metrics.steps_to_completion - ms);
      vr += (r->metrics.exploration_rate - mr) * (r->metrics.exploration_rate - mr);
    }
    csv << "aggregate," << key.first << "," << key.second << "," << rows.size()
        << "," << detail::fmt(ms) << "," << detail::fmt(std::sqrt(vs / rows.size()))
        << "," << detail::fmt(mr) << "," << detail::fmt(std::sqrt(vr / rows.size()))
        << "\n";
  }
  result.csv = csv.str();
  return result;
}

// ---------------------------------------------------------------------------
// Training driver: PPO updates over rollouts that rotate through a map list.
// ---------------------------------------------------------------------------

struct TrainUpdateLog {
  int update = 0;
  int map_index = 0;
  int env_steps = 0;
  bool completed = false;
  double exploration_rate = 0.0;
  LossReport report;
};

struct TrainRunResult {
  ParameterSet params;
  std::vector<TrainUpdateLog> log;
};

inline TrainRunResult train_loop(const std::vector<GroundTruthMap>& maps,
                                 const NetConfig& net, const TrainConfig& cfg,
                                 int n_robots, int updates, std::uint64_t seed,
                                 ParameterSet initial = {}) {
  if (maps.empty()) throw ArgumentError("train_loop: no maps given");
  TrainRunResult out;
  out.params = initial.empty() ? init_parameters(net, seed) : std::move(initial);
  Adam opt(cfg.lr);
  for (int u = 0; u < updates; ++u) {
    const int mi = u % static_cast<int>(maps.size());
    const RolloutResult roll =
        rollout(maps[mi], out.params, net, cfg, seed + 1 + u, n_robots);
    TrainUpdateLog row;
    row.update = u;
    row.map_index = mi;
    row.env_steps = roll.stats.env_steps;
    row.completed = roll.stats.completed;
    row.exploration_rate = roll.stats.exploration_rate;
    if (!roll.buffer.steps.empty()) {
      row.report = ppo_update(roll.buffer, out.params, net, cfg, opt);
    }
    out.log.push_back(row);
  }
  return out;
}

inline std::string train_log_csv(const std::vector<TrainUpdateLog>& log) {
  std::ostringstream csv;
  csv << "update,map_index,env_steps,completed,exploration_rate,total,"
         "loss_clip,loss_vf,entropy,loss_mi,mi_estimate\n";
  for (const TrainUpdateLog& r : log) {
    csv << r.update << "," << r.map_index << "," << r.env_steps << ","
        << (r.completed ? 1 : 0) << "," << detail::fmt(r.exploration_rate)
        << "," << detail::fmt(r.report.total) << ","
        << detail::fmt(r.report.loss_clip) << ","
        << detail::fmt(r.report.loss_vf) << "," << detail::fmt(r.report.entropy)
        << "," << detail::fmt(r.report.loss_mi) << ","
        << detail::fmt(r.report.mi_estimate) << "\n";
  }
  return csv.str();
}

// ---------------------------------------------------------------------------
// Rendering: binary PPM (P6). Obstacles green, explored free light blue,
// unknown gray, per-robot trajectories in distinct colors, goal markers red.
// ---------------------------------------------------------------------------

inline void render(const EpisodeTrace& trace, const std::string& path) {
  const int w = trace.width, h = trace.height;
  if (w <= 0 || h <= 0) throw ArgumentError("render: empty trace");
  std::vector<unsigned char> px(static_cast<std::size_t>(w) * h * 3);
  auto put = [&](Cell c, unsigned char r, unsigned char g, unsigned char b) {
    const std::size_t i = (static_cast<std::size_t>(c.y) * w + c.x) * 3;
    px[i] = r;
    px[i + 1] = g;
    px[i + 2] = b;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      switch (trace.final_grid[y * w + x]) {
        case OccCell::Obstacle: put({x, y}, 0, 200, 0); break;
        case OccCell::Free: put({x, y}, 173, 216, 230); break;
        case OccCell::Unknown: put({x, y}, 128, 128, 128); break;
      }
    }
  }
  static constexpr unsigned char kTrailColors[6][3] = {
      {200, 30, 30}, {30, 30, 200}, {200, 140, 0},
      {140, 0, 200}, {0, 140, 140}, {90, 60, 30}};
  for (std::size_t i = 0; i < trace.trails.size(); ++i) {
    const auto& c = kTrailColors[i % 6];
    for (const Cell& cell : trace.trails[i]) put(cell, c[0], c[1], c[2]);
  }
  for (const Cell& g : trace.last_goals) put(g, 255, 0, 0);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open image for writing: " + path);
  out << "P6\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()),
            static_cast<std::streamsize>(px.size()));
  if (!out) throw std::runtime_error("image write failed: " + path);
}

}  // namespace mrx

#endif  // MRX_BENCH_HPP_
