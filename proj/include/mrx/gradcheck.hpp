#ifndef MRX_GRADCHECK_HPP_
#define MRX_GRADCHECK_HPP_

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "mrx/autodiff.hpp"
#include "mrx/core.hpp"
#include "mrx/layers.hpp"
#include "mrx/mapping.hpp"
#include "mrx/policy.hpp"

namespace mrx {

// ---------------------------------------------------------------------------
// Numeric gradient battery: analytic reverse-mode gradients vs central
// finite differences (h = 1e-5) for every differentiable building block.
// ---------------------------------------------------------------------------

struct GradCheckResult {
  std::string component;
  double max_rel_err = 0.0;
  int checked = 0;
  bool ok = false;
};

namespace detail {

inline double gc_rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / denom;
}

// Checks a sample of elements of the named parameters against central
// differences of the scalar objective rebuilt from scratch per probe.
template <typename Build>
GradCheckResult check_component(
    const std::string& component, ParameterSet params,
    const std::vector<std::string>& names, Build build, Rng& pick,
    int per_tensor = 12, double tol = 1e-4, double h = 1e-5) {
  GradCheckResult res;
  res.component = component;

  Tape tape;
  ParamVars pv = load_params(tape, params);
  tape.backward(build(tape, pv));

  for (const std::string& name : names) {
    const auto analytic = tape.grad(pv.at(name));
    Tensor& target = params.at(name);
    const int total = static_cast<int>(target.numel());
    for (int k = 0; k < std::min(per_tensor, total); ++k) {
      const int i = total <= per_tensor
                        ? k
                        : static_cast<int>(pick.next_below(total));
      const double saved = target.data[i];
      auto eval = [&]() {
        Tape t2;
        ParamVars pv2 = load_params(t2, params);
        return t2.val(build(t2, pv2)).data[0];
      };
      target.data[i] = saved + h;
      const double hi = eval();
      target.data[i] = saved - h;
      const double lo = eval();
      target.data[i] = saved;
      const double numeric = (hi - lo) / (2.0 * h);
      res.max_rel_err = std::max(res.max_rel_err, gc_rel_err(analytic[i], numeric));
      ++res.checked;
    }
  }
  res.ok = res.max_rel_err <= tol;
  return res;
}

// Zero-initialized biases sit exactly on ReLU kinks over all-zero input
// regions, where central differences are meaningless; a small jitter moves
// every pre-activation off the kink without changing what is being checked.
inline void gc_jitter(ParameterSet& params, Rng& rng) {
  for (auto& [name, tensor] : params) {
    for (double& v : tensor.data) v += 0.01 * rng.next_normal();
  }
}

inline ChannelStack gc_random_stack(int w, int h, Rng& rng) {
  ChannelStack s(w, h);
  for (double& v : s.data) v = rng.next_real();
  return s;
}

}  // namespace detail

inline std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed = 40) {
  NetConfig cfg;
  cfg.map_width = cfg.map_height = 16;
  ParameterSet params = init_parameters(cfg, seed);
  Rng rng(seed);
  detail::gc_jitter(params, rng);
  Rng pick(seed ^ 0xabcdef);

  std::vector<GradCheckResult> out;

  // MLP (critic head alone, random flat input).
  {
    Tensor flat({1, cfg.flat_dim()});
    for (double& v : flat.data) v = rng.next_normal();
    out.push_back(detail::check_component(
        "mlp", params, {"value.l0.w", "value.l1.w", "value.l2.w", "value.l1.b"},
        [&](Tape& t, ParamVars& pv) {
          return t.sum(value_head(t, pv, t.input(flat)));
        },
        pick));
  }

  // Convolutional stack encoder.
  {
    const ChannelStack stack = detail::gc_random_stack(16, 16, rng);
    out.push_back(detail::check_component(
        "conv_encoder", params, {"conv0.w", "conv1.b", "conv2.w", "conv4.w"},
        [&](Tape& t, ParamVars& pv) {
          const VarId y = conv_encoder(t, pv, stack_input(t, stack));
          return t.mean(t.mul(y, y));
        },
        pick));
  }

  // Self-graph attention over a complete 4-node graph.
  {
    Tensor nodes({4, cfg.node_dim});
    for (double& v : nodes.data) v = rng.next_normal();
    const std::vector<double> adj(16, 1.0);
    out.push_back(detail::check_component(
        "gat_self", params,
        {"gat_self.wk.w", "gat_self.wq.w", "gat_self.wu.w", "gat_self.rho.l0.w",
         "gat_self.rho.l1.b"},
        [&](Tape& t, ParamVars& pv) {
          const GatOut g = gat_self_layer(t, pv, t.input(nodes), adj);
          return t.sum(t.mul(g.nodes, g.nodes));
        },
        pick));
  }

  // Cross-graph attention between 2 queries and 3 keys.
  {
    Tensor qa({2, cfg.node_dim}), kb({3, cfg.node_dim});
    for (double& v : qa.data) v = rng.next_normal();
    for (double& v : kb.data) v = rng.next_normal();
    std::vector<double> dists(6);
    for (double& v : dists) v = rng.next_real();
    out.push_back(detail::check_component(
        "gat_cross", params,
        {"gat_cross0.wk.w", "gat_cross0.wq.w", "gat_cross0.phi.l0.w",
         "gat_cross0.phi.l1.w", "gat_cross0.rho.l0.w"},
        [&](Tape& t, ParamVars& pv) {
          const GatCrossOut g = gat_cross_layer(t, pv, "gat_cross0",
                                                t.input(qa), t.input(kb), dists);
          return t.add(t.sum(t.mul(g.nodes, g.nodes)), t.sum(g.logits));
        },
        pick));
  }

  // Unrolled Sinkhorn, differentiated through a parameter-fed affinity.
  {
    ParameterSet sink;
    Tensor w({4, 4});
    for (double& v : w.data) v = rng.next_normal();
    sink["sink.a"] = std::move(w);
    Tensor probe({4, 4});
    for (double& v : probe.data) v = rng.next_normal();
    out.push_back(detail::check_component(
        "sinkhorn", sink, {"sink.a"},
        [&](Tape& t, ParamVars& pv) {
          const VarId p = sinkhorn(t, pv.at("sink.a"), 0.5, 10);
          return t.sum(t.mul(p, t.input(probe)));
        },
        pick, 16));
  }

  // Asymmetric encoder pair feeding the critic head.
  {
    const ChannelStack obs = detail::gc_random_stack(16, 16, rng);
    const ChannelStack priv = detail::gc_random_stack(16, 16, rng);
    out.push_back(detail::check_component(
        "asym_value", params, {"conv0.w", "conv3.w", "value.l0.w", "value.l2.b"},
        [&](Tape& t, ParamVars& pv) {
          const AsymFeatures af = asym_features(t, pv, obs, priv);
          return state_value(t, pv, af.delta_flat);
        },
        pick));
  }

  // InfoNCE loss over a 3-pair batch.
  {
    std::vector<ChannelStack> obs, priv;
    for (int i = 0; i < 3; ++i) {
      obs.push_back(detail::gc_random_stack(16, 16, rng));
      priv.push_back(detail::gc_random_stack(16, 16, rng));
    }
    out.push_back(detail::check_component(
        "mi_loss", params,
        {"embed.conv0.w", "embed.conv3.w", "embed.l0.w", "embed.l2.w",
         "tphi.l0.w", "tphi.l1.w"},
        [&](Tape& t, ParamVars& pv) { return mi_loss(t, pv, obs, priv); },
        pick));
  }

  // MI estimate over the same kind of batch.
  {
    std::vector<ChannelStack> obs, priv;
    for (int i = 0; i < 3; ++i) {
      obs.push_back(detail::gc_random_stack(16, 16, rng));
      priv.push_back(detail::gc_random_stack(16, 16, rng));
    }
    out.push_back(detail::check_component(
        "mi_estimate", params,
        {"embed.conv1.w", "embed.l1.w", "tphi.l0.b", "tphi.l1.w"},
        [&](Tape& t, ParamVars& pv) { return mi_estimate(t, pv, obs, priv); },
        pick));
  }

  return out;
}

}  // namespace mrx

#endif  // MRX_GRADCHECK_HPP_
