#ifndef MRX_AUTODIFF_HPP_
#define MRX_AUTODIFF_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mrx/core.hpp"

namespace mrx {

// ---------------------------------------------------------------------------
// Dense 64-bit tensors and a tape for reverse-mode differentiation.
//
// Every operation appends one node; backward() replays the tape in reverse,
// so gradient accumulation order is deterministic. Shapes are checked at
// construction time and raise ShapeError.
// ---------------------------------------------------------------------------

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
    data.assign(numel_of(shape), fill);
  }
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel_of(shape)) {
      throw ShapeError("Tensor: data length does not match shape");
    }
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 0) throw ShapeError("Tensor: negative dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }
  int dim(int i) const { return shape[i]; }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

using VarId = int;

class Tape {
 public:
  VarId input(Tensor t) {
    nodes_.push_back({std::move(t), {}, nullptr});
    nodes_.back().grad.assign(nodes_.back().value.numel(), 0.0);
    return static_cast<VarId>(nodes_.size() - 1);
  }

  VarId input(std::vector<int> shape, std::vector<double> data) {
    return input(Tensor(std::move(shape), std::move(data)));
  }

  const Tensor& val(VarId id) const { return nodes_[id].value; }
  const std::vector<double>& grad(VarId id) const { return nodes_[id].grad; }

  // Seeds the gradient of a scalar output with 1 and replays the tape.
  void backward(VarId out) {
    if (nodes_[out].value.numel() != 1) {
      throw ShapeError("backward: output must be scalar");
    }
    for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
    nodes_[out].grad[0] = 1.0;
    for (int i = out; i >= 0; --i) {
      if (nodes_[i].back) nodes_[i].back();
    }
  }

  // -------------------------------------------------------------------------
  // Elementwise
  // -------------------------------------------------------------------------

  VarId add(VarId a, VarId b) {
    check_same(a, b, "add");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += val(b).data[i];
    return make(std::move(out), [this, a, b](const Node& n) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        nodes_[a].grad[i] += n.grad[i];
        nodes_[b].grad[i] += n.grad[i];
      }
    });
  }

  VarId sub(VarId a, VarId b) {
    check_same(a, b, "sub");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= val(b).data[i];
    return make(std::move(out), [this, a, b](const Node& n) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        nodes_[a].grad[i] += n.grad[i];
        nodes_[b].grad[i] -= n.grad[i];
      }
    });
  }

  VarId mul(VarId a, VarId b) {
    check_same(a, b, "mul");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= val(b).data[i];
    return make(std::move(out), [this, a, b](const Node& n) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        nodes_[a].grad[i] += n.grad[i] * nodes_[b].value.data[i];
        nodes_[b].grad[i] += n.grad[i] * nodes_[a].value.data[i];
      }
    });
  }

  VarId scale(VarId a, double c) {
    Tensor out = val(a);
    for (double& v : out.data) v *= c;
    return make(std::move(out), [this, a, c](const Node& n) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) nodes_[a].grad[i] += c * n.grad[i];
    });
  }

  VarId add_scalar(VarId a, double c) {
    Tensor out = val(a);
    for (double& v : out.data) v += c;
    return make(std::move(out), [this, a](const Node& n) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) nodes_[a].grad[i] += n.grad[i];
    });
  }

  VarId relu(VarId a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::max(v, 0.0);
    return make(std::move(out), [this, a](const Node& n) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        if (nodes_[a].value.data[i] > 0.0) nodes_[a].grad[i] += n.grad[i];
      }
    });
  }

  VarId log(VarId a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::log(v);
    return make(std::move(out), [this, a](const Node& n) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        nodes_[a].grad[i] += n.grad[i] / nodes_[a].value.data[i];
      }
    });
  }

  VarId exp(VarId a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::exp(v);
    return make(std::move(out), [this, a](const Node& n) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        nodes_[a].grad[i] += n.grad[i] * n.value.data[i];
      }
    });
  }

  // log(1 + e^x), evaluated stably.
  VarId softplus(VarId a) {
    Tensor out = val(a);
    for (double& v : out.data) {
      v = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    }
    return make(std::move(out), [this, a](const Node& n) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        const double x = nodes_[a].value.data[i];
        nodes_[a].grad[i] += n.grad[i] / (1.0 + std::exp(-x));
      }
    });
  }

  VarId clamp(VarId a, double lo, double hi) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::min(std::max(v, lo), hi);
    return make(std::move(out), [this, a, lo, hi](const Node& n) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        const double x = nodes_[a].value.data[i];
        if (x > lo && x < hi) nodes_[a].grad[i] += n.grad[i];
      }
    });
  }

  // Elementwise minimum; gradient follows the smaller input (ties go to a).
  VarId min2(VarId a, VarId b) {
    check_same(a, b, "min2");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) {
      out.data[i] = std::min(out.data[i], val(b).data[i]);
    }
    return make(std::move(out), [this, a, b](const Node& n) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        if (nodes_[a].value.data[i] <= nodes_[b].value.data[i]) {
          nodes_[a].grad[i] += n.grad[i];
        } else {
          nodes_[b].grad[i] += n.grad[i];
        }
      }
    });
  }

  // -------------------------------------------------------------------------
  // Reductions and reshaping
  // -------------------------------------------------------------------------

  VarId sum(VarId a) {
    const double s = std::accumulate(val(a).data.begin(), val(a).data.end(), 0.0);
    return make(Tensor::scalar(s), [this, a](const Node& n) {
      for (double& g : nodes_[a].grad) g += n.grad[0];
    });
  }

  VarId mean(VarId a) {
    const double inv = 1.0 / static_cast<double>(val(a).numel());
    const double s =
        std::accumulate(val(a).data.begin(), val(a).data.end(), 0.0) * inv;
    return make(Tensor::scalar(s), [this, a, inv](const Node& n) {
      for (double& g : nodes_[a].grad) g += n.grad[0] * inv;
    });
  }

  VarId reshape(VarId a, std::vector<int> shape) {
    if (Tensor::numel_of(shape) != val(a).numel()) {
      throw ShapeError("reshape: element count mismatch");
    }
    Tensor out(std::move(shape), val(a).data);
    return make(std::move(out), [this, a](const Node& n) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) nodes_[a].grad[i] += n.grad[i];
    });
  }

  // -------------------------------------------------------------------------
  // Linear algebra
  // -------------------------------------------------------------------------

  VarId matmul(VarId a, VarId b) {
    check_rank(a, 2, "matmul");
    check_rank(b, 2, "matmul");
    const int m = val(a).dim(0), k = val(a).dim(1), n = val(b).dim(1);
    if (val(b).dim(0) != k) throw ShapeError("matmul: inner dimension mismatch");
    Tensor out({m, n});
    const auto& A = val(a).data;
    const auto& B = val(b).data;
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < k; ++p) {
        const double av = A[i * k + p];
        for (int j = 0; j < n; ++j) out.data[i * n + j] += av * B[p * n + j];
      }
    }
    return make(std::move(out), [this, a, b, m, k, n](const Node& nd) {
      const auto& A = nodes_[a].value.data;
      const auto& B = nodes_[b].value.data;
      auto& dA = nodes_[a].grad;
      auto& dB = nodes_[b].grad;
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          const double g = nd.grad[i * n + j];
          if (g == 0.0) continue;
          for (int p = 0; p < k; ++p) {
            dA[i * k + p] += g * B[p * n + j];
            dB[p * n + j] += g * A[i * k + p];
          }
        }
      }
    });
  }

  VarId transpose(VarId a) {
    check_rank(a, 2, "transpose");
    const int m = val(a).dim(0), n = val(a).dim(1);
    Tensor out({n, m});
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) out.data[j * m + i] = val(a).data[i * n + j];
    }
    return make(std::move(out), [this, a, m, n](const Node& nd) {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          nodes_[a].grad[i * n + j] += nd.grad[j * m + i];
        }
      }
    });
  }

  // Adds a length-n row vector to every row of an [m, n] matrix.
  VarId add_rowvec(VarId a, VarId b) {
    check_rank(a, 2, "add_rowvec");
    const int m = val(a).dim(0), n = val(a).dim(1);
    if (static_cast<int>(val(b).numel()) != n) {
      throw ShapeError("add_rowvec: vector length mismatch");
    }
    Tensor out = val(a);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) out.data[i * n + j] += val(b).data[j];
    }
    return make(std::move(out), [this, a, b, m, n](const Node& nd) {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          nodes_[a].grad[i * n + j] += nd.grad[i * n + j];
          nodes_[b].grad[j] += nd.grad[i * n + j];
        }
      }
    });
  }

  // -------------------------------------------------------------------------
  // Row-wise softmax / normalization
  // -------------------------------------------------------------------------

  // Stable softmax over each row. An optional 0/1 mask (constant, same
  // shape) restricts the support; masked-out entries get probability 0. A
  // fully masked row raises NumericError (degenerate softmax).
  VarId row_softmax(VarId a, const std::vector<double>* mask = nullptr) {
    check_rank(a, 2, "row_softmax");
    const int m = val(a).dim(0), n = val(a).dim(1);
    if (mask && static_cast<int>(mask->size()) != m * n) {
      throw ShapeError("row_softmax: mask shape mismatch");
    }
    Tensor out({m, n});
    std::vector<double> mcopy = mask ? *mask : std::vector<double>();
    for (int i = 0; i < m; ++i) {
      double mx = -kBig;
      for (int j = 0; j < n; ++j) {
        if (!mask || (*mask)[i * n + j] > 0.5) {
          mx = std::max(mx, val(a).data[i * n + j]);
        }
      }
      if (mx == -kBig) {
        throw NumericError("row_softmax: row " + std::to_string(i) +
                           " has empty support");
      }
      double z = 0.0;
      for (int j = 0; j < n; ++j) {
        if (!mask || (*mask)[i * n + j] > 0.5) {
          out.data[i * n + j] = std::exp(val(a).data[i * n + j] - mx);
          z += out.data[i * n + j];
        }
      }
      for (int j = 0; j < n; ++j) out.data[i * n + j] /= z;
    }
    return make(std::move(out),
                [this, a, m, n, mc = std::move(mcopy)](const Node& nd) {
      for (int i = 0; i < m; ++i) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j) {
          dot += nd.grad[i * n + j] * nd.value.data[i * n + j];
        }
        for (int j = 0; j < n; ++j) {
          if (!mc.empty() && mc[i * n + j] <= 0.5) continue;
          nodes_[a].grad[i * n + j] +=
              nd.value.data[i * n + j] * (nd.grad[i * n + j] - dot);
        }
      }
    });
  }

  // y_ij = x_ij / sum_j x_ij. Inputs must be strictly positive.
  VarId row_normalize(VarId a) {
    check_rank(a, 2, "row_normalize");
    const int m = val(a).dim(0), n = val(a).dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += val(a).data[i * n + j];
      for (int j = 0; j < n; ++j) out.data[i * n + j] = val(a).data[i * n + j] / s;
    }
    return make(std::move(out), [this, a, m, n](const Node& nd) {
      for (int i = 0; i < m; ++i) {
        double s = 0.0, dot = 0.0;
        for (int j = 0; j < n; ++j) s += nodes_[a].value.data[i * n + j];
        for (int j = 0; j < n; ++j) {
          dot += nd.grad[i * n + j] * nd.value.data[i * n + j];
        }
        for (int j = 0; j < n; ++j) {
          nodes_[a].grad[i * n + j] += (nd.grad[i * n + j] - dot) / s;
        }
      }
    });
  }

  VarId col_normalize(VarId a) {
    VarId t = transpose(a);
    return transpose(row_normalize(t));
  }

  // Rows rescaled to unit L2 norm (with a small epsilon against zero rows).
  VarId l2_normalize_rows(VarId a) {
    check_rank(a, 2, "l2_normalize_rows");
    const int m = val(a).dim(0), n = val(a).dim(1);
    Tensor out({m, n});
    std::vector<double> norms(m);
    for (int i = 0; i < m; ++i) {
      double ss = 1e-12;
      for (int j = 0; j < n; ++j) {
        ss += val(a).data[i * n + j] * val(a).data[i * n + j];
      }
      norms[i] = std::sqrt(ss);
      for (int j = 0; j < n; ++j) out.data[i * n + j] = val(a).data[i * n + j] / norms[i];
    }
    return make(std::move(out),
                [this, a, m, n, norms = std::move(norms)](const Node& nd) {
      for (int i = 0; i < m; ++i) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j) {
          dot += nd.grad[i * n + j] * nd.value.data[i * n + j];
        }
        for (int j = 0; j < n; ++j) {
          nodes_[a].grad[i * n + j] +=
              (nd.grad[i * n + j] - dot * nd.value.data[i * n + j]) / norms[i];
        }
      }
    });
  }

  // -------------------------------------------------------------------------
  // Gather / concat
  // -------------------------------------------------------------------------

  VarId hconcat(VarId a, VarId b) {
    check_rank(a, 2, "hconcat");
    check_rank(b, 2, "hconcat");
    const int m = val(a).dim(0), n1 = val(a).dim(1), n2 = val(b).dim(1);
    if (val(b).dim(0) != m) throw ShapeError("hconcat: row count mismatch");
    Tensor out({m, n1 + n2});
    for (int i = 0; i < m; ++i) {
      std::copy_n(&val(a).data[i * n1], n1, &out.data[i * (n1 + n2)]);
      std::copy_n(&val(b).data[i * n2], n2, &out.data[i * (n1 + n2) + n1]);
    }
    return make(std::move(out), [this, a, b, m, n1, n2](const Node& nd) {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n1; ++j) {
          nodes_[a].grad[i * n1 + j] += nd.grad[i * (n1 + n2) + j];
        }
        for (int j = 0; j < n2; ++j) {
          nodes_[b].grad[i * n2 + j] += nd.grad[i * (n1 + n2) + n1 + j];
        }
      }
    });
  }

  VarId vconcat(VarId a, VarId b) {
    check_rank(a, 2, "vconcat");
    check_rank(b, 2, "vconcat");
    const int m1 = val(a).dim(0), m2 = val(b).dim(0), n = val(a).dim(1);
    if (val(b).dim(1) != n) throw ShapeError("vconcat: column count mismatch");
    Tensor out({m1 + m2, n});
    std::copy(val(a).data.begin(), val(a).data.end(), out.data.begin());
    std::copy(val(b).data.begin(), val(b).data.end(), out.data.begin() + m1 * n);
    return make(std::move(out), [this, a, b, m1, m2, n](const Node& nd) {
      for (int i = 0; i < m1 * n; ++i) nodes_[a].grad[i] += nd.grad[i];
      for (int i = 0; i < m2 * n; ++i) nodes_[b].grad[i] += nd.grad[m1 * n + i];
    });
  }

  VarId gather_rows(VarId a, std::vector<int> rows) {
    check_rank(a, 2, "gather_rows");
    const int n = val(a).dim(1);
    Tensor out({static_cast<int>(rows.size()), n});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy_n(&val(a).data[rows[i] * n], n, &out.data[i * n]);
    }
    return make(std::move(out), [this, a, n, rows = std::move(rows)](const Node& nd) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < n; ++j) {
          nodes_[a].grad[rows[i] * n + j] += nd.grad[i * n + j];
        }
      }
    });
  }

  // Picks individual (row, col) entries of a matrix into a vector.
  VarId gather_elems(VarId a, std::vector<std::pair<int, int>> elems) {
    check_rank(a, 2, "gather_elems");
    const int n = val(a).dim(1);
    Tensor out({static_cast<int>(elems.size())});
    for (std::size_t i = 0; i < elems.size(); ++i) {
      out.data[i] = val(a).data[elems[i].first * n + elems[i].second];
    }
    return make(std::move(out),
                [this, a, n, elems = std::move(elems)](const Node& nd) {
      for (std::size_t i = 0; i < elems.size(); ++i) {
        nodes_[a].grad[elems[i].first * n + elems[i].second] += nd.grad[i];
      }
    });
  }

  // [m, n] matrix of L2 distances between rows of A [m, d] and B [n, d].
  VarId pairwise_l2(VarId a, VarId b) {
    check_rank(a, 2, "pairwise_l2");
    check_rank(b, 2, "pairwise_l2");
    const int m = val(a).dim(0), d = val(a).dim(1), n = val(b).dim(0);
    if (val(b).dim(1) != d) throw ShapeError("pairwise_l2: dimension mismatch");
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        double ss = 1e-12;
        for (int k = 0; k < d; ++k) {
          const double diff = val(a).data[i * d + k] - val(b).data[j * d + k];
          ss += diff * diff;
        }
        out.data[i * n + j] = std::sqrt(ss);
      }
    }
    return make(std::move(out), [this, a, b, m, n, d](const Node& nd) {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          const double g = nd.grad[i * n + j] / nd.value.data[i * n + j];
          if (g == 0.0) continue;
          for (int k = 0; k < d; ++k) {
            const double diff =
                nodes_[a].value.data[i * d + k] - nodes_[b].value.data[j * d + k];
            nodes_[a].grad[i * d + k] += g * diff;
            nodes_[b].grad[j * d + k] -= g * diff;
          }
        }
      }
    });
  }

  // -------------------------------------------------------------------------
  // Convolution (NCHW single image, square kernel, zero padding)
  // -------------------------------------------------------------------------

  VarId conv2d(VarId x, VarId w, VarId b, int stride, int pad) {
    check_rank(x, 3, "conv2d input");
    check_rank(w, 4, "conv2d weight");
    const int C = val(x).dim(0), H = val(x).dim(1), W = val(x).dim(2);
    const int O = val(w).dim(0), KC = val(w).dim(1), KH = val(w).dim(2),
              KW = val(w).dim(3);
    if (KC != C) throw ShapeError("conv2d: channel mismatch");
    if (static_cast<int>(val(b).numel()) != O) {
      throw ShapeError("conv2d: bias length mismatch");
    }
    const int OH = (H + 2 * pad - KH) / stride + 1;
    const int OW = (W + 2 * pad - KW) / stride + 1;
    if (OH <= 0 || OW <= 0) throw ShapeError("conv2d: output would be empty");
    Tensor out({O, OH, OW});
    const auto& X = val(x).data;
    const auto& Wt = val(w).data;
    for (int o = 0; o < O; ++o) {
      for (int oy = 0; oy < OH; ++oy) {
        for (int ox = 0; ox < OW; ++ox) {
          double acc = val(b).data[o];
          for (int c = 0; c < C; ++c) {
            for (int ky = 0; ky < KH; ++ky) {
              const int iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= H) continue;
              for (int kx = 0; kx < KW; ++kx) {
                const int ix = ox * stride + kx - pad;
                if (ix < 0 || ix >= W) continue;
                acc += X[(c * H + iy) * W + ix] *
                       Wt[((o * C + c) * KH + ky) * KW + kx];
              }
            }
          }
          out.data[(o * OH + oy) * OW + ox] = acc;
        }
      }
    }
    return make(std::move(out),
                [this, x, w, b, stride, pad, C, H, W, O, KH, KW, OH, OW](const Node& nd) {
      const auto& X = nodes_[x].value.data;
      const auto& Wt = nodes_[w].value.data;
      auto& dX = nodes_[x].grad;
      auto& dW = nodes_[w].grad;
      auto& dB = nodes_[b].grad;
      for (int o = 0; o < O; ++o) {
        for (int oy = 0; oy < OH; ++oy) {
          for (int ox = 0; ox < OW; ++ox) {
            const double g = nd.grad[(o * OH + oy) * OW + ox];
            if (g == 0.0) continue;
            dB[o] += g;
            for (int c = 0; c < C; ++c) {
              for (int ky = 0; ky < KH; ++ky) {
                const int iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < KW; ++kx) {
                  const int ix = ox * stride + kx - pad;
                  if (ix < 0 || ix >= W) continue;
                  dX[(c * H + iy) * W + ix] +=
                      g * Wt[((o * C + c) * KH + ky) * KW + kx];
                  dW[((o * C + c) * KH + ky) * KW + kx] +=
                      g * X[(c * H + iy) * W + ix];
                }
              }
            }
          }
        }
      }
    });
  }

  // Mean over the spatial dimensions of a [C, H, W] tensor.
  VarId channel_mean(VarId x) {
    check_rank(x, 3, "channel_mean");
    const int C = val(x).dim(0), H = val(x).dim(1), W = val(x).dim(2);
    const double inv = 1.0 / (static_cast<double>(H) * W);
    Tensor out({1, C});
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (int i = 0; i < H * W; ++i) s += val(x).data[c * H * W + i];
      out.data[c] = s * inv;
    }
    return make(std::move(out), [this, x, C, H, W, inv](const Node& nd) {
      for (int c = 0; c < C; ++c) {
        for (int i = 0; i < H * W; ++i) {
          nodes_[x].grad[c * H * W + i] += nd.grad[c] * inv;
        }
      }
    });
  }

  // Bilinear sampling from a [C, H, W] feature map at precomputed corner
  // indices and weights: out[p] = sum_k weight[p][k] * F[:, idx[p][k]].
  struct BilerpPoint {
    int idx[4];       // linear spatial index per corner
    double w[4];      // interpolation weight per corner
  };

  VarId bilerp_gather(VarId f, std::vector<BilerpPoint> pts) {
    check_rank(f, 3, "bilerp_gather");
    const int C = val(f).dim(0), H = val(f).dim(1), W = val(f).dim(2);
    const int plane = H * W;
    Tensor out({static_cast<int>(pts.size()), C});
    for (std::size_t p = 0; p < pts.size(); ++p) {
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) {
          acc += pts[p].w[k] * val(f).data[c * plane + pts[p].idx[k]];
        }
        out.data[p * C + c] = acc;
      }
    }
    return make(std::move(out),
                [this, f, C, plane, pts = std::move(pts)](const Node& nd) {
      for (std::size_t p = 0; p < pts.size(); ++p) {
        for (int c = 0; c < C; ++c) {
          const double g = nd.grad[p * C + c];
          for (int k = 0; k < 4; ++k) {
            nodes_[f].grad[c * plane + pts[p].idx[k]] += g * pts[p].w[k];
          }
        }
      }
    });
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  static constexpr double kBig = 1e300;

  struct Node {
    Tensor value;
    std::vector<double> grad;
    std::function<void()> back;
  };

  VarId make(Tensor value, std::function<void(const Node&)> back_fn) {
    for (double v : value.data) {
      if (!std::isfinite(v)) throw NumericError("non-finite value in tape op");
    }
    const VarId id = static_cast<VarId>(nodes_.size());
    nodes_.push_back({std::move(value), {}, nullptr});
    nodes_.back().grad.assign(nodes_.back().value.numel(), 0.0);
    nodes_.back().back = [this, id, fn = std::move(back_fn)]() { fn(nodes_[id]); };
    return id;
  }

  void check_same(VarId a, VarId b, const char* op) const {
    if (!val(a).same_shape(val(b))) {
      throw ShapeError(std::string(op) + ": shape mismatch");
    }
  }
  void check_rank(VarId a, int rank, const char* op) const {
    if (static_cast<int>(val(a).shape.size()) != rank) {
      throw ShapeError(std::string(op) + ": wrong rank");
    }
  }

  std::vector<Node> nodes_;
};

}  // namespace mrx

#endif  // MRX_AUTODIFF_HPP_
