#ifndef MRX_POLICY_HPP_
#define MRX_POLICY_HPP_

#include <string>
#include <vector>

#include "mrx/autodiff.hpp"
#include "mrx/core.hpp"
#include "mrx/layers.hpp"
#include "mrx/mapping.hpp"
#include "mrx/topograph.hpp"

namespace mrx {

// ---------------------------------------------------------------------------
// Decision head: asymmetric feature representation, privileged value
// estimation, mutual-information scoring, and graph-matching goal selection.
// The actor path consumes only observation-derived inputs; privilege enters
// through the critic and the MI module alone.
// ---------------------------------------------------------------------------

struct AsymFeatures {
  VarId obs_feat;    // [C_h, H/8, W/8]
  VarId priv_feat;   // same shape, same conv parameters
  VarId delta_flat;  // [1, C_h * H/8 * W/8]
};

inline AsymFeatures asym_features(Tape& t, const ParamVars& pv,
                                  const ChannelStack& obs,
                                  const ChannelStack& priv) {
  if (obs.width != priv.width || obs.height != priv.height) {
    throw ShapeError("asym_features: stack size mismatch");
  }
  const VarId f = conv_encoder(t, pv, stack_input(t, obs));
  const VarId fp = conv_encoder(t, pv, stack_input(t, priv));
  const Tensor& fs = t.val(f);
  const int flat = fs.dim(0) * fs.dim(1) * fs.dim(2);
  return {f, fp, t.reshape(t.sub(f, fp), {1, flat})};
}

inline VarId state_value(Tape& t, const ParamVars& pv, VarId delta_flat) {
  return value_head(t, pv, delta_flat);
}

namespace detail {

// Embeds each stack and returns the [B, embed_dim] batch matrix.
inline VarId embed_batch(Tape& t, const ParamVars& pv,
                         const std::vector<ChannelStack>& stacks) {
  VarId out = embed_stack(t, pv, stack_input(t, stacks[0]));
  for (std::size_t i = 1; i < stacks.size(); ++i) {
    out = t.vconcat(out, embed_stack(t, pv, stack_input(t, stacks[i])));
  }
  return out;
}

}  // namespace detail

// Pair score matrix: T_phi applied to halved pairwise L2 distances between
// unit-norm embeddings, so the statistical network sees inputs in [0, 1].
inline VarId pair_scores(Tape& t, const ParamVars& pv, VarId emb_a, VarId emb_b) {
  return tphi_apply(t, pv, t.scale(t.pairwise_l2(emb_a, emb_b), 0.5));
}

// Contrastive loss over a batch of (observation, privilege) stack pairs:
// positives on the diagonal, in-batch negatives off it. A batch of one has
// no negatives and scores exactly zero.
inline VarId mi_loss(Tape& t, const ParamVars& pv,
                     const std::vector<ChannelStack>& obs,
                     const std::vector<ChannelStack>& priv) {
  if (obs.empty() || obs.size() != priv.size()) {
    throw ArgumentError("mi_loss: batch must be nonempty and paired");
  }
  const int b = static_cast<int>(obs.size());
  const VarId zo = detail::embed_batch(t, pv, obs);
  const VarId zp = detail::embed_batch(t, pv, priv);
  const VarId scores = pair_scores(t, pv, zo, zp);
  const VarId rows = t.row_softmax(scores);
  std::vector<std::pair<int, int>> diag;
  for (int i = 0; i < b; ++i) diag.push_back({i, i});
  return t.scale(t.mean(t.log(t.gather_elems(rows, diag))), -1.0);
}

// Donsker-Varadhan style estimate from statistical-network outputs on
// positive and negative pairs: mean softplus(-T) over positives minus mean
// softplus(T) over negatives. Identically zero when T_phi is the zero map.
inline VarId mi_estimate(Tape& t, const ParamVars& pv, VarId pos_dists,
                         VarId neg_dists) {
  const VarId tp = tphi_apply(t, pv, pos_dists);
  const VarId tn = tphi_apply(t, pv, neg_dists);
  return t.sub(t.mean(t.softplus(t.scale(tp, -1.0))),
               t.mean(t.softplus(tn)));
}

// Batch convenience: diagonal pairs positive, off-diagonal negative.
// Needs at least two pairs so the negative set is nonempty.
inline VarId mi_estimate(Tape& t, const ParamVars& pv,
                         const std::vector<ChannelStack>& obs,
                         const std::vector<ChannelStack>& priv) {
  if (obs.size() < 2 || obs.size() != priv.size()) {
    throw ArgumentError("mi_estimate: needs >= 2 paired stacks");
  }
  const int b = static_cast<int>(obs.size());
  const VarId zo = detail::embed_batch(t, pv, obs);
  const VarId zp = detail::embed_batch(t, pv, priv);
  const VarId d = t.scale(t.pairwise_l2(zo, zp), 0.5);
  std::vector<std::pair<int, int>> pos, neg;
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) (i == j ? pos : neg).push_back({i, j});
  }
  const VarId dp = t.reshape(t.gather_elems(d, pos), {1, b});
  const VarId dn = t.reshape(t.gather_elems(d, neg), {1, b * (b - 1)});
  return mi_estimate(t, pv, dp, dn);
}

// ---------------------------------------------------------------------------
// Goal selection
// ---------------------------------------------------------------------------

enum class SelectMode { Sample, Argmax };

struct GoalAssignment {
  bool complete = false;          // no frontiers left: exploration is done
  std::vector<int> cluster_index; // chosen cluster per robot
  std::vector<Cell> goal_cell;    // the matching cluster centers
  VarId probs = -1;               // [n_r, n_f] Sinkhorn rows
  VarId log_prob = -1;            // scalar joint log-probability
};

// Numeric bilinear sample of a [C, H, W] feature tensor, for recording
// history-node representations outside the tape.
inline std::vector<double> rep_at(const Tensor& feat, double px, double py) {
  const int c = feat.dim(0), h = feat.dim(1), w = feat.dim(2);
  const auto p = bilerp_point(px, py, w, h);
  std::vector<double> out(c, 0.0);
  for (int ch = 0; ch < c; ++ch) {
    for (int k = 0; k < 4; ++k) {
      out[ch] += p.w[k] * feat.data[ch * h * w + p.idx[k]];
    }
  }
  return out;
}

namespace detail {

// Node features V^0: MLP-encoded [category || geometric] concatenated with
// the representation vector (interpolated from the live feature map for
// current nodes, recorded values for history nodes).
inline VarId encode_nodes(Tape& t, const ParamVars& pv, const NetConfig& cfg,
                          const std::vector<TopoNode>& nodes, VarId obs_feat,
                          bool live) {
  const int n = static_cast<int>(nodes.size());
  Tensor cla_geo({n, 5});
  for (int i = 0; i < n; ++i) {
    cla_geo.data[i * 5 + 0] = nodes[i].cla[0];
    cla_geo.data[i * 5 + 1] = nodes[i].cla[1];
    cla_geo.data[i * 5 + 2] = nodes[i].geo[0];
    cla_geo.data[i * 5 + 3] = nodes[i].geo[1];
    cla_geo.data[i * 5 + 4] = nodes[i].geo[2];
  }
  VarId enc = t.relu(linear(t, pv, "node_enc.l0", t.input(cla_geo)));
  enc = linear(t, pv, "node_enc.l1", enc);

  VarId rep;
  if (live) {
    const Tensor& fs = t.val(obs_feat);
    std::vector<Tape::BilerpPoint> pts;
    pts.reserve(nodes.size());
    for (const TopoNode& nd : nodes) {
      pts.push_back(bilerp_point(nd.px, nd.py, fs.dim(2), fs.dim(1)));
    }
    rep = t.bilerp_gather(obs_feat, pts);
  } else {
    Tensor r({n, cfg.feature_channels});
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < cfg.feature_channels &&
                      c < static_cast<int>(nodes[i].rep.size()); ++c) {
        r.data[i * cfg.feature_channels + c] = nodes[i].rep[c];
      }
    }
    rep = t.input(r);
  }
  return t.hconcat(enc, rep);
}

}  // namespace detail

// Full matching pass: self attention on each populated node set, history
// cross passes, then the robot-frontier cross layer whose edge logits feed
// Sinkhorn. `rng` is required in Sample mode.
inline GoalAssignment select_goals(Tape& t, const ParamVars& pv,
                                   const NetConfig& cfg, const TopoGraphSet& g,
                                   VarId obs_feat, SelectMode mode,
                                   Rng* rng = nullptr) {
  GoalAssignment out;
  if (g.n_frontiers() == 0) {
    out.complete = true;
    return out;
  }
  if (mode == SelectMode::Sample && rng == nullptr) {
    throw ArgumentError("select_goals: sampling needs an rng");
  }
  const int n_r = g.n_robots(), n_f = g.n_frontiers();

  VarId vr = detail::encode_nodes(t, pv, cfg, g.robots, obs_feat, true);
  VarId vf = detail::encode_nodes(t, pv, cfg, g.frontiers, obs_feat, true);
  vr = gat_self_layer(t, pv, vr, complete_adjacency(n_r)).nodes;
  vf = gat_self_layer(t, pv, vf, complete_adjacency(n_f)).nodes;

  if (!g.robot_history.empty()) {
    VarId vh = detail::encode_nodes(t, pv, cfg, g.robot_history, obs_feat, false);
    vh = gat_self_layer(t, pv, vh,
                        complete_adjacency(static_cast<int>(g.robot_history.size())))
             .nodes;
    vr = gat_cross_layer(t, pv, "gat_cross0", vr, vh, g.d_robot_history).nodes;
  }
  if (!g.goal_history.empty()) {
    VarId vh = detail::encode_nodes(t, pv, cfg, g.goal_history, obs_feat, false);
    vh = gat_self_layer(t, pv, vh,
                        complete_adjacency(static_cast<int>(g.goal_history.size())))
             .nodes;
    vf = gat_cross_layer(t, pv, "gat_cross1", vf, vh, g.d_frontier_history).nodes;
  }

  const GatCrossOut cross =
      gat_cross_layer(t, pv, "gat_cross2", vr, vf, g.d_robot_frontier);
  out.probs = sinkhorn(t, cross.logits, cfg.sinkhorn_temp, cfg.sinkhorn_iters);

  const Tensor& p = t.val(out.probs);
  std::vector<std::pair<int, int>> chosen;
  for (int i = 0; i < n_r; ++i) {
    int pick = 0;
    if (mode == SelectMode::Argmax) {
      for (int j = 1; j < n_f; ++j) {
        if (p.data[i * n_f + j] > p.data[i * n_f + pick]) pick = j;
      }
    } else {
      const double u = rng->next_real();
      double acc = 0.0;
      pick = n_f - 1;
      for (int j = 0; j < n_f; ++j) {
        acc += p.data[i * n_f + j];
        if (u < acc) {
          pick = j;
          break;
        }
      }
    }
    chosen.push_back({i, pick});
    out.cluster_index.push_back(pick);
    out.goal_cell.push_back(g.cluster_centers[pick]);
  }
  out.log_prob = t.sum(t.log(t.gather_elems(out.probs, chosen)));
  return out;
}

}  // namespace mrx

#endif  // MRX_POLICY_HPP_
