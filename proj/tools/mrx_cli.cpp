#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mrx/bench.hpp"
#include "mrx/gradcheck.hpp"

namespace {

using namespace mrx;

struct CliFlags {
  std::string config;
  std::vector<std::string> maps;
  std::string corpus;
  std::vector<std::string> planners;
  int robots = 0;
  std::uint64_t seed = 0;
  std::string seeds;
  int max_steps = 0;
  int horizon = 0;
  std::string out;
  std::string checkpoint;
  int epochs = 200;
};

// Config file first, explicitly passed flags second (flags win).
RunConfig merge_config(const CLI::App* cmd, const CliFlags& f) {
  RunConfig cfg;
  if (!f.config.empty()) cfg = load_config(f.config);
  if (cmd->count("--map")) cfg.map_paths = f.maps;
  if (cmd->count("--corpus")) cfg.corpus_dir = f.corpus;
  if (cmd->count("--planner")) cfg.planners = f.planners;
  if (cmd->count("--robots")) cfg.n_robots = f.robots;
  if (cmd->count("--seed")) cfg.seeds = {f.seed};
  if (cmd->count("--seeds")) {
    cfg.seeds.clear();
    std::stringstream ss(f.seeds);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) cfg.seeds.push_back(std::stoull(item));
    }
  }
  if (cmd->count("--max-steps")) cfg.max_steps = f.max_steps;
  if (cmd->count("--horizon")) cfg.horizon = f.horizon;
  if (cmd->count("--out")) cfg.out_dir = f.out;
  if (cmd->count("--checkpoint")) cfg.checkpoint = f.checkpoint;
  return cfg;
}

void add_common_flags(CLI::App* cmd, CliFlags& f) {
  cmd->add_option("--config", f.config, "key=value configuration file");
  cmd->add_option("--map", f.maps, "map file (repeatable)");
  cmd->add_option("--corpus", f.corpus, "directory of .txt maps");
  cmd->add_option("--planner", f.planners, "planner name (repeatable)");
  cmd->add_option("--robots", f.robots, "number of robots");
  cmd->add_option("--seed", f.seed, "single seed");
  cmd->add_option("--seeds", f.seeds, "comma-separated seed list");
  cmd->add_option("--max-steps", f.max_steps, "env step cap per episode");
  cmd->add_option("--horizon", f.horizon, "env steps per planning cycle");
  cmd->add_option("--out", f.out, "output directory or file");
  cmd->add_option("--checkpoint", f.checkpoint, "parameter checkpoint path");
}

LoadedWorld load_map_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open map: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_world(ss.str());
}

std::vector<std::string> resolve_maps(const RunConfig& cfg) {
  if (!cfg.map_paths.empty()) return cfg.map_paths;
  if (!cfg.corpus_dir.empty()) return corpus_maps(cfg.corpus_dir);
  throw ArgumentError("no map given: use --map or --corpus");
}

// The learned planner needs parameters; baselines do not.
void maybe_load_policy(const RunConfig& cfg, const LoadedWorld& lw,
                       ParameterSet& params, NetConfig& net) {
  net.map_width = lw.map.width();
  net.map_height = lw.map.height();
  if (cfg.checkpoint.empty()) {
    params = init_parameters(net, cfg.seeds.empty() ? 0 : cfg.seeds.front());
  } else {
    params = load_checkpoint(cfg.checkpoint);
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

int cmd_run(const CLI::App* cmd, const CliFlags& f) {
  const RunConfig cfg = merge_config(cmd, f);
  const auto maps = resolve_maps(cfg);
  const std::string planner = cfg.planners.empty() ? "nearest" : cfg.planners[0];
  const std::uint64_t seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();
  const LoadedWorld lw = load_map_file(maps.front());

  ParameterSet params;
  NetConfig net;
  const bool learned = planner == "policy";
  if (learned) maybe_load_policy(cfg, lw, params, net);

  const EpisodeMetrics m =
      run_episode(cfg, lw, planner, seed, learned ? &params : nullptr,
                  learned ? &net : nullptr);
  std::printf("map=%s planner=%s seed=%llu\n", maps.front().c_str(),
              planner.c_str(), static_cast<unsigned long long>(seed));
  std::printf("steps=%d completed=%d exploration_rate=%.6f\n",
              m.steps_to_completion, m.completed ? 1 : 0, m.exploration_rate);
  for (std::size_t i = 0; i < m.path_lengths.size(); ++i) {
    std::printf("robot%zu_path_length=%.2f\n", i, m.path_lengths[i]);
  }
  std::printf("overlap_ratio=%.6f\n", m.overlap_ratio);
  return 0;
}

int cmd_suite(const CLI::App* cmd, const CliFlags& f) {
  const RunConfig cfg = merge_config(cmd, f);
  ParameterSet params;
  NetConfig net;
  const bool learned = std::find(cfg.planners.begin(), cfg.planners.end(),
                                 std::string("policy")) != cfg.planners.end();
  if (learned) {
    const auto maps = resolve_maps(cfg);
    maybe_load_policy(cfg, load_map_file(maps.front()), params, net);
  }
  const SuiteResult res = run_suite(cfg, learned ? &params : nullptr,
                                    learned ? &net : nullptr);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path =
      (std::filesystem::path(cfg.out_dir) / "suite.csv").string();
  write_text(path, res.csv);
  std::printf("%zu rows written to %s\n", res.rows.size(), path.c_str());
  const auto agg = res.csv.find("aggregate,size_class");
  if (agg != std::string::npos) std::fputs(res.csv.c_str() + agg, stdout);
  return 0;
}

int cmd_train(const CLI::App* cmd, const CliFlags& f) {
  const RunConfig cfg = merge_config(cmd, f);
  const auto map_paths = resolve_maps(cfg);
  std::vector<GroundTruthMap> maps;
  for (const std::string& p : map_paths) maps.push_back(load_map_file(p).map);

  NetConfig net;
  net.map_width = maps.front().width();
  net.map_height = maps.front().height();
  TrainConfig tcfg;
  tcfg.lr = 1e-4;
  if (cfg.horizon > 0) tcfg.horizon = cfg.horizon;
  if (cfg.max_steps > 0) tcfg.max_steps = cfg.max_steps;

  ParameterSet initial;
  if (!cfg.checkpoint.empty()) initial = load_checkpoint(cfg.checkpoint);
  const std::uint64_t seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();
  const TrainRunResult res = train_loop(maps, net, tcfg, cfg.n_robots,
                                        f.epochs, seed, std::move(initial));

  std::filesystem::create_directories(cfg.out_dir);
  const auto dir = std::filesystem::path(cfg.out_dir);
  write_text((dir / "train_log.csv").string(), train_log_csv(res.log));
  save_checkpoint(res.params, (dir / "checkpoint.ckpt").string());
  double first = 0, last = 0;
  const std::size_t n = res.log.size();
  for (std::size_t i = 0; i < n; ++i) {
    (i < n / 2 ? first : last) += res.log[i].env_steps;
  }
  std::printf("trained %d updates; mean steps first half %.1f, second half %.1f\n",
              f.epochs, first / std::max<std::size_t>(1, n / 2),
              last / std::max<std::size_t>(1, n - n / 2));
  std::printf("log: %s\ncheckpoint: %s\n", (dir / "train_log.csv").c_str(),
              (dir / "checkpoint.ckpt").c_str());
  return 0;
}

int cmd_render(const CLI::App* cmd, const CliFlags& f) {
  const RunConfig cfg = merge_config(cmd, f);
  const auto maps = resolve_maps(cfg);
  const std::string planner = cfg.planners.empty() ? "nearest" : cfg.planners[0];
  const std::uint64_t seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();
  const LoadedWorld lw = load_map_file(maps.front());

  ParameterSet params;
  NetConfig net;
  const bool learned = planner == "policy";
  if (learned) maybe_load_policy(cfg, lw, params, net);

  EpisodeTrace trace;
  run_episode(cfg, lw, planner, seed, learned ? &params : nullptr,
              learned ? &net : nullptr, &trace);
  std::string path = cfg.out_dir;
  if (path.empty() || std::filesystem::is_directory(path)) {
    path = (std::filesystem::path(path.empty() ? "." : path) / "episode.ppm")
               .string();
  }
  render(trace, path);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_gradcheck() {
  bool all_ok = true;
  for (const GradCheckResult& r : run_gradcheck()) {
    std::printf("%-14s max_rel_err=%.3e checked=%d %s\n", r.component.c_str(),
                r.max_rel_err, r.checked, r.ok ? "ok" : "FAIL");
    all_ok = all_ok && r.ok;
  }
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multirobot exploration benchmark"};
  app.require_subcommand(1);

  CliFlags f;
  CLI::App* run = app.add_subcommand("run", "single episode");
  CLI::App* suite = app.add_subcommand("suite", "benchmark over maps/planners/seeds");
  CLI::App* train = app.add_subcommand("train", "PPO training loop");
  CLI::App* rend = app.add_subcommand("render", "episode trace to PPM image");
  app.add_subcommand("gradcheck", "numeric gradient battery");
  for (CLI::App* cmd : {run, suite, train, rend}) add_common_flags(cmd, f);
  train->add_option("--epochs", f.epochs, "number of PPO updates");

  try {
    app.parse(argc, argv);
    if (run->parsed()) return cmd_run(run, f);
    if (suite->parsed()) return cmd_suite(suite, f);
    if (train->parsed()) return cmd_train(train, f);
    if (rend->parsed()) return cmd_render(rend, f);
    return cmd_gradcheck();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors and --help
  } catch (const mrx::ArgumentError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const mrx::FormatError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
