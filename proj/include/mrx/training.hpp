#ifndef MRX_TRAINING_HPP_
#define MRX_TRAINING_HPP_

#include <cmath>
#include <utility>
#include <vector>

#include "mrx/autodiff.hpp"
#include "mrx/core.hpp"
#include "mrx/geodesy.hpp"
#include "mrx/layers.hpp"
#include "mrx/mapping.hpp"
#include "mrx/policy.hpp"
#include "mrx/topograph.hpp"
#include "mrx/worldsim.hpp"

namespace mrx {

// ---------------------------------------------------------------------------
// Asymmetric actor-critic PPO with the mutual-information auxiliary loss.
// One MDP step spans a full planning cycle of low-level env steps.
// ---------------------------------------------------------------------------

struct TrainConfig {
  double lr = 1e-5;
  double discount = 0.99;
  double gae_lambda = 0.95;
  double c1 = 3.0;  // value loss weight
  double c2 = 1.0;  // entropy bonus weight
  double c3 = 1.0;  // MI auxiliary weight
  double clip_eps = 0.2;
  int epochs = 4;
  int horizon = 15;      // env steps per planning cycle
  int max_steps = 1800;  // env step cap per episode
  double a1 = 0.005;     // reward per newly explored cell
  double a2 = 0.225;     // per-cycle time penalty
  double complete_rate = 0.99;
  double r_clus = 8.0;
  SensorConfig sensor;
};

inline double reward(int area_now, int area_prev, const TrainConfig& cfg) {
  if (area_prev < 0 || area_now < area_prev) {
    throw ArgumentError("reward: explored area must be non-decreasing");
  }
  return cfg.a1 * (area_now - area_prev) - cfg.a2;
}

// Generalized advantage estimation; returns (advantages, returns).
inline std::pair<std::vector<double>, std::vector<double>> gae(
    const std::vector<double>& rewards, const std::vector<double>& values,
    double bootstrap_value, double discount, double lambda) {
  if (rewards.size() != values.size()) {
    throw ArgumentError("gae: rewards and values must have equal length");
  }
  const int n = static_cast<int>(rewards.size());
  std::vector<double> adv(n), ret(n);
  double acc = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    const double next_v = t + 1 < n ? values[t + 1] : bootstrap_value;
    const double delta = rewards[t] + discount * next_v - values[t];
    acc = delta + discount * lambda * acc;
    adv[t] = acc;
    ret[t] = adv[t] + values[t];
  }
  return {adv, ret};
}

struct StepRecord {
  ObservationStack obs;
  PrivilegeStack priv;
  TopoGraphSet graphs;
  std::vector<int> chosen;  // cluster index per robot
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
  int area_now = 0;  // explored cells after the cycle, for replay checks
};

struct RolloutBuffer {
  std::vector<StepRecord> steps;
  double bootstrap_value = 0.0;  // critic value past the cap; 0 on termination
  std::vector<double> advantages;
  std::vector<double> returns;
  bool closed = false;
};

inline void compute_advantages(RolloutBuffer& buf, const TrainConfig& cfg) {
  std::vector<double> rewards, values;
  for (const StepRecord& s : buf.steps) {
    rewards.push_back(s.reward);
    values.push_back(s.value);
  }
  auto [adv, ret] =
      gae(rewards, values, buf.bootstrap_value, cfg.discount, cfg.gae_lambda);
  buf.advantages = std::move(adv);
  buf.returns = std::move(ret);
  buf.closed = true;
}

struct LossReport {
  double total = 0.0;
  double loss_clip = 0.0;
  double loss_vf = 0.0;
  double entropy = 0.0;
  double loss_mi = 0.0;
  double mi_estimate = 0.0;
};

// One PPO update over a closed buffer: for each epoch, a single combined
// backward pass over every recorded decision step, then an Adam step. The
// maximized objective is L_CLIP - c1 L_VF + c2 S - c3 L_MI, so the minimized
// loss carries the opposite signs.
inline LossReport ppo_update(const RolloutBuffer& buf, ParameterSet& params,
                             const NetConfig& net_cfg, const TrainConfig& cfg,
                             Adam& opt) {
  if (!buf.closed || buf.steps.empty()) {
    throw ArgumentError("ppo_update: buffer must be closed and nonempty");
  }
  const int n = static_cast<int>(buf.steps.size());

  // Normalized advantages, shared by every epoch.
  std::vector<double> adv = buf.advantages;
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double stdev = std::sqrt(var / n);
  for (double& a : adv) a = (a - mean) / (stdev + 1e-8);

  std::vector<ChannelStack> obs_batch, priv_batch;
  for (const StepRecord& s : buf.steps) {
    obs_batch.push_back(s.obs);
    priv_batch.push_back(s.priv);
  }

  LossReport report;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape t;
    ParamVars pv = load_params(t, params);

    VarId clip_sum = t.input(Tensor::scalar(0.0));
    VarId vf_sum = t.input(Tensor::scalar(0.0));
    VarId ent_sum = t.input(Tensor::scalar(0.0));
    for (int i = 0; i < n; ++i) {
      const StepRecord& s = buf.steps[i];
      const AsymFeatures af = asym_features(t, pv, s.obs, s.priv);
      const GoalAssignment ga = select_goals(t, pv, net_cfg, s.graphs,
                                             af.obs_feat, SelectMode::Argmax);
      std::vector<std::pair<int, int>> chosen;
      for (std::size_t r = 0; r < s.chosen.size(); ++r) {
        chosen.push_back({static_cast<int>(r), s.chosen[r]});
      }
      const VarId new_logp = t.sum(t.log(t.gather_elems(ga.probs, chosen)));
      const VarId ratio = t.exp(t.add_scalar(new_logp, -s.log_prob));
      const VarId surr1 = t.scale(ratio, adv[i]);
      const VarId surr2 =
          t.scale(t.clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), adv[i]);
      clip_sum = t.add(clip_sum, t.min2(surr1, surr2));

      const VarId v = t.sum(state_value(t, pv, af.delta_flat));
      const VarId err = t.add_scalar(v, -buf.returns[i]);
      vf_sum = t.add(vf_sum, t.mul(err, err));

      ent_sum = t.sub(ent_sum, t.sum(t.mul(ga.probs, t.log(ga.probs))));
    }
    const VarId l_clip = t.scale(clip_sum, 1.0 / n);
    const VarId l_vf = t.scale(vf_sum, 1.0 / n);
    const VarId entropy = t.scale(ent_sum, 1.0 / n);
    const VarId l_mi = mi_loss(t, pv, obs_batch, priv_batch);

    VarId loss = t.add(t.scale(l_clip, -1.0), t.scale(l_vf, cfg.c1));
    loss = t.add(loss, t.scale(entropy, -cfg.c2));
    loss = t.add(loss, t.scale(l_mi, cfg.c3));
    if (!std::isfinite(t.val(loss).data[0])) {
      throw NumericError("ppo_update: non-finite loss");
    }
    t.backward(loss);
    opt.update(params, t, pv);

    report.total = t.val(loss).data[0];
    report.loss_clip = t.val(l_clip).data[0];
    report.loss_vf = t.val(l_vf).data[0];
    report.entropy = t.val(entropy).data[0];
    report.loss_mi = t.val(l_mi).data[0];
  }

  if (n >= 2) {
    Tape t;
    ParamVars pv = load_params(t, params);
    report.mi_estimate = t.val(mi_estimate(t, pv, obs_batch, priv_batch)).data[0];
  }
  return report;
}

// ---------------------------------------------------------------------------
// Rollout collection
// ---------------------------------------------------------------------------

struct EpisodeStats {
  int env_steps = 0;
  int cycles = 0;
  bool completed = false;
  double exploration_rate = 0.0;
  std::vector<double> rate_curve;  // per cycle, non-decreasing
  std::vector<std::vector<Cell>> trails;
};

struct RolloutResult {
  RolloutBuffer buffer;
  EpisodeStats stats;
};

namespace detail {

inline double exploration_rate(const OccupancyGrid& grid,
                               const GroundTruthMap& world) {
  int seen = 0;
  for (const Cell& c : world.free_component()) {
    if (grid.at(c) != OccCell::Unknown) ++seen;
  }
  return double(seen) / world.free_component().size();
}

// One descent step of the goal's distance field from the robot's cell; the
// robot's own cell when no lower neighbor exists.
inline Cell descend_step(const DistanceField& field, Cell cur) {
  Cell best = cur;
  double best_val = field.reachable(cur) ? field.at(cur) : kInf;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const Cell n{cur.x + dx, cur.y + dy};
      if (n.x < 0 || n.x >= field.width || n.y < 0 || n.y >= field.height) continue;
      if (!field.reachable(n)) continue;
      if (dx != 0 && dy != 0 && (!field.reachable({cur.x + dx, cur.y}) ||
                                 !field.reachable({cur.x, cur.y + dy}))) {
        continue;
      }
      if (field.at(n) < best_val - 1e-12) {
        best_val = field.at(n);
        best = n;
      }
    }
  }
  return best;
}

}  // namespace detail

// Runs one seeded episode under the current parameters: every planning
// cycle builds the scene, picks goals through the matching head, then the
// robots follow fast-marching descent toward their goals for `horizon` env
// steps while integrating scans. Rewards live at cycle granularity.
inline RolloutResult rollout(const GroundTruthMap& world,
                             const ParameterSet& params,
                             const NetConfig& net_cfg, const TrainConfig& cfg,
                             std::uint64_t seed, int n_robots,
                             SelectMode mode = SelectMode::Sample) {
  RolloutResult out;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  auto robots = spawn_robots(world, n_robots, seed);
  OccupancyGrid grid(world.width(), world.height());
  out.stats.trails.resize(robots.size());
  for (std::size_t i = 0; i < robots.size(); ++i) {
    integrate_scan(grid, sense(world, robots[i], cfg.sensor));
    out.stats.trails[i].push_back(robots[i].cell());
  }

  HistoryBuffer robot_hist(net_cfg.history_capacity);
  HistoryBuffer goal_hist(net_cfg.history_capacity);
  int area_prev = 0;

  while (out.stats.env_steps < cfg.max_steps) {
    const auto frontiers = detect_frontiers(grid);
    const double rate = detail::exploration_rate(grid, world);
    if (frontiers.empty() || rate >= cfg.complete_rate) {
      out.stats.completed = true;
      if (!out.buffer.steps.empty()) out.buffer.steps.back().done = true;
      break;
    }
    const auto clusters = cluster_frontiers(frontiers, cfg.r_clus);
    const auto stacks = build_stacks(grid, world, robots, frontiers, out.stats.trails);
    const auto graphs = build_graph_set(robots, clusters, grid, robot_hist, goal_hist);

    StepRecord rec;
    rec.obs = stacks.obs;
    rec.priv = stacks.priv;
    rec.graphs = graphs;
    std::vector<Cell> goals;
    std::vector<double> feat_values;
    {
      Tape t;
      ParamVars pv = load_params(t, params);
      const AsymFeatures af = asym_features(t, pv, stacks.obs, stacks.priv);
      const GoalAssignment ga =
          select_goals(t, pv, net_cfg, graphs, af.obs_feat, mode, &rng);
      rec.chosen = ga.cluster_index;
      rec.log_prob = t.val(ga.log_prob).data[0];
      rec.value = t.val(t.sum(state_value(t, pv, af.delta_flat))).data[0];
      goals = ga.goal_cell;
      feat_values = t.val(af.obs_feat).data;
    }
    const Tensor feat(
        {net_cfg.feature_channels, net_cfg.feat_height(), net_cfg.feat_width()},
        feat_values);

    // Distance field per goal; robots descend it step by step so replans
    // inside the cycle are unnecessary.
    std::vector<DistanceField> fields;
    for (const Cell& g : goals) fields.push_back(fmm_field(grid, {g}));

    for (int s = 0; s < cfg.horizon && out.stats.env_steps < cfg.max_steps; ++s) {
      for (std::size_t i = 0; i < robots.size(); ++i) {
        Action act = Action::Stay;
        if (robots[i].cell() != goals[i]) {
          const Cell wp = detail::descend_step(fields[i], robots[i].cell());
          if (wp != robots[i].cell()) act = waypoint_action(robots[i], wp);
        }
        robots[i] = step(world, robots[i], act);
        integrate_scan(grid, sense(world, robots[i], cfg.sensor));
        if (out.stats.trails[i].back() != robots[i].cell()) {
          out.stats.trails[i].push_back(robots[i].cell());
        }
      }
      ++out.stats.env_steps;
    }

    rec.area_now = grid.explored_count();
    rec.reward = reward(rec.area_now, area_prev, cfg);
    area_prev = rec.area_now;
    out.buffer.steps.push_back(std::move(rec));
    ++out.stats.cycles;
    out.stats.rate_curve.push_back(detail::exploration_rate(grid, world));

    // Histories record the decision-time scene: robot poses and assigned
    // goals with their representation vectors as interpolated back then.
    for (std::size_t i = 0; i < robots.size(); ++i) {
      TopoNode rn = graphs.robots[i];
      rn.rep = rep_at(feat, rn.px, rn.py);
      robot_hist.push(std::move(rn));
    }
    for (std::size_t i = 0; i < goals.size(); ++i) {
      TopoNode gn = graphs.frontiers[out.buffer.steps.back().chosen[i]];
      gn.rep = rep_at(feat, gn.px, gn.py);
      goal_hist.push(std::move(gn));
    }
  }

  out.stats.exploration_rate = detail::exploration_rate(grid, world);
  if (!out.stats.completed && !out.buffer.steps.empty()) {
    // Truncated by the step cap: bootstrap from the critic at the final state.
    const auto frontiers = detect_frontiers(grid);
    const auto stacks = build_stacks(grid, world, robots, frontiers, out.stats.trails);
    Tape t;
    ParamVars pv = load_params(t, params);
    const AsymFeatures af = asym_features(t, pv, stacks.obs, stacks.priv);
    out.buffer.bootstrap_value =
        t.val(t.sum(state_value(t, pv, af.delta_flat))).data[0];
  }
  compute_advantages(out.buffer, cfg);
  return out;
}

}  // namespace mrx

#endif  // MRX_TRAINING_HPP_
