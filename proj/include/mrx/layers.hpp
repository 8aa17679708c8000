#ifndef MRX_LAYERS_HPP_
#define MRX_LAYERS_HPP_

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mrx/autodiff.hpp"
#include "mrx/core.hpp"
#include "mrx/mapping.hpp"

namespace mrx {

// ---------------------------------------------------------------------------
// Network configuration. Only depth, the /8 downsample and C_h = 32 are
// fixed; everything else is sized here.
// ---------------------------------------------------------------------------

struct NetConfig {
  int map_width = 64;
  int map_height = 64;
  int feature_channels = 32;  // C_h
  int node_dim = 64;          // 2 * C_h after encoder + rep concat
  int kqv_dim = 32;           // key/query/value width
  int embed_dim = 64;         // MI embedding output
  double sinkhorn_temp = 0.1;
  int sinkhorn_iters = 20;
  int history_capacity = 8;

  int feat_width() const { return map_width / 8; }
  int feat_height() const { return map_height / 8; }
  int flat_dim() const { return feat_width() * feat_height() * feature_channels; }
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

// Named tensors for every learnable weight. std::map keeps iteration order
// stable, which the checkpoint format and update loops rely on.
using ParameterSet = std::map<std::string, Tensor>;
using ParamVars = std::map<std::string, VarId>;

namespace detail {

inline void add_linear(ParameterSet& p, const std::string& name, int out, int in,
                       Rng& rng) {
  Tensor w({out, in});
  const double s = std::sqrt(2.0 / in);
  for (double& v : w.data) v = s * rng.next_normal();
  p[name + ".w"] = std::move(w);
  p[name + ".b"] = Tensor({out});
}

inline void add_conv(ParameterSet& p, const std::string& name, int out, int in,
                     Rng& rng) {
  Tensor w({out, in, 3, 3});
  const double s = std::sqrt(2.0 / (in * 9));
  for (double& v : w.data) v = s * rng.next_normal();
  p[name + ".w"] = std::move(w);
  p[name + ".b"] = Tensor({out});
}

}  // namespace detail

inline constexpr int kConvChannels[5] = {16, 16, 32, 32, 32};
inline constexpr int kConvStrides[5] = {2, 1, 2, 1, 2};
inline constexpr int kEmbedConvChannels[4] = {16, 16, 32, 32};
inline constexpr int kGatCrossPasses = 3;  // G_rr_h, G_fg_h, G_rf in order

inline ParameterSet init_parameters(const NetConfig& cfg, std::uint64_t seed) {
  if (cfg.map_width % 8 != 0 || cfg.map_height % 8 != 0) {
    throw ShapeError("init_parameters: map dimensions must be divisible by 8");
  }
  ParameterSet p;
  Rng rng(seed);

  // Shared observation/privilege feature encoder: 5 conv layers, /8 spatial.
  int in_ch = kStackChannels;
  for (int i = 0; i < 5; ++i) {
    detail::add_conv(p, "conv" + std::to_string(i), kConvChannels[i], in_ch, rng);
    in_ch = kConvChannels[i];
  }

  // Critic head on the flattened feature disparity.
  detail::add_linear(p, "value.l0", 64, cfg.flat_dim(), rng);
  detail::add_linear(p, "value.l1", 64, 64, rng);
  detail::add_linear(p, "value.l2", 1, 64, rng);

  // Node encoder: [category one-hot (2) | geometric (3)] -> C_h.
  detail::add_linear(p, "node_enc.l0", cfg.feature_channels, 5, rng);
  detail::add_linear(p, "node_enc.l1", cfg.feature_channels, cfg.feature_channels, rng);

  // Self-representation attention, shared across the four self graphs.
  const int h = cfg.node_dim;
  const int kq = cfg.kqv_dim;
  auto add_gat_common = [&](const std::string& prefix) {
    detail::add_linear(p, prefix + ".wk", kq, h, rng);
    detail::add_linear(p, prefix + ".wq", kq, h, rng);
    detail::add_linear(p, prefix + ".wu", kq, h, rng);
    detail::add_linear(p, prefix + ".rho.l0", h, h + kq, rng);
    detail::add_linear(p, prefix + ".rho.l1", h, h, rng);
  };
  add_gat_common("gat_self");
  for (int i = 0; i < kGatCrossPasses; ++i) {
    const std::string prefix = "gat_cross" + std::to_string(i);
    add_gat_common(prefix);
    detail::add_linear(p, prefix + ".phi.l0", kq, 2 * kq + 1, rng);
    detail::add_linear(p, prefix + ".phi.l1", 1, kq, rng);
  }

  // Mutual-information embedding network: 4 conv + global pool + 3-layer MLP.
  in_ch = kStackChannels;
  for (int i = 0; i < 4; ++i) {
    detail::add_conv(p, "embed.conv" + std::to_string(i), kEmbedConvChannels[i],
                     in_ch, rng);
    in_ch = kEmbedConvChannels[i];
  }
  detail::add_linear(p, "embed.l0", cfg.embed_dim, in_ch, rng);
  detail::add_linear(p, "embed.l1", cfg.embed_dim, cfg.embed_dim, rng);
  detail::add_linear(p, "embed.l2", cfg.embed_dim, cfg.embed_dim, rng);

  // Statistical network on the normalized pair distance.
  detail::add_linear(p, "tphi.l0", 16, 1, rng);
  detail::add_linear(p, "tphi.l1", 1, 16, rng);

  return p;
}

inline ParamVars load_params(Tape& tape, const ParameterSet& params) {
  ParamVars vars;
  for (const auto& [name, tensor] : params) vars[name] = tape.input(tensor);
  return vars;
}

// ---------------------------------------------------------------------------
// Forward builders
// ---------------------------------------------------------------------------

// y = x * W^T + b for x [N, in].
inline VarId linear(Tape& t, const ParamVars& pv, const std::string& name, VarId x) {
  return t.add_rowvec(t.matmul(x, t.transpose(pv.at(name + ".w"))),
                      pv.at(name + ".b"));
}

inline VarId stack_input(Tape& t, const ChannelStack& s) {
  return t.input(Tensor({kStackChannels, s.height, s.width}, s.data));
}

// 5-layer strided conv encoder, ReLU between layers: [5, H, W] -> [32, H/8, W/8].
inline VarId conv_encoder(Tape& t, const ParamVars& pv, VarId stack) {
  const int H = t.val(stack).dim(1), W = t.val(stack).dim(2);
  if (H % 8 != 0 || W % 8 != 0) {
    throw ShapeError("conv_encoder: input dimensions must be divisible by 8");
  }
  VarId x = stack;
  for (int i = 0; i < 5; ++i) {
    const std::string n = "conv" + std::to_string(i);
    x = t.conv2d(x, pv.at(n + ".w"), pv.at(n + ".b"), kConvStrides[i], 1);
    if (i < 4) x = t.relu(x);
  }
  return x;
}

// 3-layer critic MLP on the flattened feature disparity.
inline VarId value_head(Tape& t, const ParamVars& pv, VarId delta_flat) {
  VarId x = t.relu(linear(t, pv, "value.l0", delta_flat));
  x = t.relu(linear(t, pv, "value.l1", x));
  return linear(t, pv, "value.l2", x);
}

// One self-representation attention layer: dot-product coefficients over the
// masked neighborhood, value aggregation, residual MLP fusion.
struct GatOut {
  VarId nodes;   // updated node features
  VarId coeffs;  // attention rows (each sums to 1 over the neighborhood)
};

inline GatOut gat_self_layer(Tape& t, const ParamVars& pv, VarId nodes,
                             const std::vector<double>& adjacency) {
  const VarId k = linear(t, pv, "gat_self.wk", nodes);
  const VarId q = linear(t, pv, "gat_self.wq", nodes);
  const VarId u = linear(t, pv, "gat_self.wu", nodes);
  const VarId scores = t.matmul(q, t.transpose(k));
  const VarId coeffs = t.row_softmax(scores, &adjacency);
  const VarId agg = t.matmul(coeffs, u);
  const VarId fused = t.relu(linear(t, pv, "gat_self.rho.l0", t.hconcat(nodes, agg)));
  return {t.add(nodes, linear(t, pv, "gat_self.rho.l1", fused)), coeffs};
}

// Cross-representation attention from A-side queries onto B-side keys. The
// coefficient logits come from an MLP on [k_j || q_i || d_ij]; the geodesic
// distance enters here. Returns the updated A nodes and the raw logits.
struct GatCrossOut {
  VarId nodes;   // updated A-side features
  VarId coeffs;  // [N_a, N_b] attention rows
  VarId logits;  // [N_a, N_b] pre-softmax edge scores
};

inline GatCrossOut gat_cross_layer(Tape& t, const ParamVars& pv,
                                   const std::string& prefix, VarId nodes_a,
                                   VarId nodes_b,
                                   const std::vector<double>& dists) {
  const int na = t.val(nodes_a).dim(0);
  const int nb = t.val(nodes_b).dim(0);
  if (static_cast<int>(dists.size()) != na * nb) {
    throw ShapeError("gat_cross_layer: distance matrix shape mismatch");
  }
  for (double d : dists) {
    if (!std::isfinite(d)) {
      throw NumericError("gat_cross_layer: non-finite edge distance");
    }
  }
  const VarId q = linear(t, pv, prefix + ".wq", nodes_a);
  const VarId k = linear(t, pv, prefix + ".wk", nodes_b);
  const VarId u = linear(t, pv, prefix + ".wu", nodes_b);

  std::vector<int> rows_b(na * nb), rows_a(na * nb);
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      rows_b[i * nb + j] = j;
      rows_a[i * nb + j] = i;
    }
  }
  const VarId pair_kq =
      t.hconcat(t.gather_rows(k, rows_b), t.gather_rows(q, rows_a));
  const VarId dcol = t.input(Tensor({na * nb, 1}, dists));
  const VarId phi_in = t.hconcat(pair_kq, dcol);
  const VarId phi = linear(t, pv, prefix + ".phi.l1",
                           t.relu(linear(t, pv, prefix + ".phi.l0", phi_in)));
  const VarId logits = t.reshape(phi, {na, nb});
  const VarId coeffs = t.row_softmax(logits);
  const VarId agg = t.matmul(coeffs, u);
  const VarId fused =
      t.relu(linear(t, pv, prefix + ".rho.l0", t.hconcat(nodes_a, agg)));
  return {t.add(nodes_a, linear(t, pv, prefix + ".rho.l1", fused)), coeffs, logits};
}

// Sinkhorn normalization of exp(affinity / temperature): `iters` row+column
// rounds, then a closing row normalization so each row reads as a proper
// distribution even for rectangular inputs.
inline VarId sinkhorn(Tape& t, VarId affinity, double temperature, int iters) {
  if (iters < 1) throw ArgumentError("sinkhorn: iters must be >= 1");
  if (temperature <= 0.0) throw ArgumentError("sinkhorn: temperature must be > 0");
  const int m = t.val(affinity).dim(0), n = t.val(affinity).dim(1);
  // Per-row max shift before exp: a row scaling of the kernel, which the
  // leading row normalization cancels exactly.
  std::vector<double> shift(static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    double mx = -1e300;
    for (int j = 0; j < n; ++j) {
      mx = std::max(mx, t.val(affinity).data[i * n + j]);
    }
    for (int j = 0; j < n; ++j) shift[i * n + j] = -mx / temperature;
  }
  VarId kernel = t.exp(t.add(t.scale(affinity, 1.0 / temperature),
                             t.input(Tensor({m, n}, shift))));
  for (int it = 0; it < iters; ++it) {
    kernel = t.col_normalize(t.row_normalize(kernel));
  }
  return t.row_normalize(kernel);
}

// MI embedding: 4 strided convs, global average pool, 3-layer MLP, unit
// L2 norm. Output is [1, embed_dim].
inline VarId embed_stack(Tape& t, const ParamVars& pv, VarId stack) {
  VarId x = stack;
  for (int i = 0; i < 4; ++i) {
    const std::string n = "embed.conv" + std::to_string(i);
    x = t.relu(t.conv2d(x, pv.at(n + ".w"), pv.at(n + ".b"), 2, 1));
  }
  VarId v = t.channel_mean(x);
  v = t.relu(linear(t, pv, "embed.l0", v));
  v = t.relu(linear(t, pv, "embed.l1", v));
  v = linear(t, pv, "embed.l2", v);
  return t.l2_normalize_rows(v);
}

// Statistical network applied elementwise to a matrix of pair distances.
inline VarId tphi_apply(Tape& t, const ParamVars& pv, VarId dists) {
  const int m = t.val(dists).dim(0), n = t.val(dists).dim(1);
  VarId x = t.reshape(dists, {m * n, 1});
  x = t.relu(linear(t, pv, "tphi.l0", x));
  x = linear(t, pv, "tphi.l1", x);
  return t.reshape(x, {m, n});
}

// ---------------------------------------------------------------------------
// Checkpoint format: version tag line, then per tensor a text manifest line
// "name dim0 dim1 ..." followed by the flat little-endian float64 payload.
// ---------------------------------------------------------------------------

inline constexpr const char* kCheckpointTag = "mrx-checkpoint v1";

inline void save_checkpoint(const ParameterSet& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out << kCheckpointTag << "\n";
  for (const auto& [name, tensor] : params) {
    out << name;
    for (int d : tensor.shape) out << " " << d;
    out << "\n";
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline ParameterSet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string tag;
  std::getline(in, tag);
  if (tag != kCheckpointTag) {
    throw FormatError("checkpoint version tag mismatch: '" + tag + "'");
  }
  ParameterSet params;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name;
    ls >> name;
    std::vector<int> shape;
    int d;
    while (ls >> d) shape.push_back(d);
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw FormatError("checkpoint payload truncated at tensor " + name);
    params[name] = std::move(t);
  }
  return params;
}

// ---------------------------------------------------------------------------
// Adam optimizer
// ---------------------------------------------------------------------------

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  double learning_rate() const { return lr_; }

  void update(ParameterSet& params, const Tape& tape, const ParamVars& vars) {
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, step_);
    const double bc2 = 1.0 - std::pow(beta2_, step_);
    for (auto& [name, tensor] : params) {
      const auto& g = tape.grad(vars.at(name));
      auto& m = m_[name];
      auto& v = v_[name];
      if (m.size() != g.size()) {
        m.assign(g.size(), 0.0);
        v.assign(g.size(), 0.0);
      }
      for (std::size_t i = 0; i < g.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        tensor.data[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
      }
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long step_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace mrx

#endif  // MRX_LAYERS_HPP_
