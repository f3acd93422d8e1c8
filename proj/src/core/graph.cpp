#include "vda/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "vda/error.hpp"

namespace vda {
namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

CMapR as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return CMapR(t.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MapR as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MapR(t.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void add_into(Tensor* dst, const Tensor& src) {
  if (!dst) return;
  double* d = dst->raw();
  const double* s = src.raw();
  for (std::size_t i = 0; i < src.size(); ++i) d[i] += s[i];
}

std::size_t conv_out_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

const Tensor* Gradients::find(const Parameter& p) const {
  for (const auto& e : entries_) {
    if (e.param == &p) return &e.grad;
  }
  return nullptr;
}

const Tensor* Gradients::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.param->name == name) return &e.grad;
  }
  return nullptr;
}

void Gradients::accumulate(Parameter* p, const Tensor& g) {
  for (auto& e : entries_) {
    if (e.param == p) {
      add_into(&e.grad, g);
      return;
    }
  }
  entries_.push_back({p, g});
}

// --- bookkeeping -----------------------------------------------------------

Var Graph::push(std::string label, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
  Node n;
  n.label = std::move(label);
  n.value = std::move(value);
  for (std::size_t i : inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
  n.inputs = std::move(inputs);
  n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) throw ShapeError("graph: invalid node handle");
  return nodes_[v.id];
}

void Graph::shape_error(const std::string& label, const std::string& what) const {
  throw ShapeError("node '" + label + "': " + what);
}

const Tensor& Graph::value(Var v) const { return node(v).value; }
const std::string& Graph::label(Var v) const { return node(v).label; }
bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

Var Graph::constant(Tensor value, std::string label) {
  return push(std::move(label), std::move(value), {}, nullptr);
}

Var Graph::parameter(Parameter& p, bool track) {
  Var v = push(p.name, p.value, {}, nullptr);
  if (track && p.trainable) {
    nodes_[v.id].requires_grad = true;
    nodes_[v.id].param = &p;
  }
  return v;
}

// --- dense algebra ---------------------------------------------------------

Var Graph::matmul(Var a, Var b, std::string label) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) {
    shape_error(label, "matmul of " + shape_string(A.shape()) + " and " + shape_string(B.shape()));
  }
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor out(Shape{m, n});
  as_matrix(out, m, n).noalias() = as_matrix(A, m, k) * as_matrix(B, k, n);
  return push(std::move(label), std::move(out), {a.id, b.id},
              [a, b, m, k, n](const std::vector<Node>& nodes, const Tensor& g, std::span<Tensor*> gi) {
                auto G = as_matrix(g, m, n);
                if (gi[0]) as_matrix(*gi[0], m, k).noalias() += G * as_matrix(nodes[b.id].value, k, n).transpose();
                if (gi[1]) as_matrix(*gi[1], k, n).noalias() += as_matrix(nodes[a.id].value, m, k).transpose() * G;
              });
}

Var Graph::add_bias(Var x, Var bias, std::string label) {
  const Tensor& X = value(x);
  const Tensor& Bv = value(bias);
  if (X.rank() < 2 || Bv.rank() != 1 || Bv.dim(0) != X.dim(1)) {
    shape_error(label, "bias " + shape_string(Bv.shape()) + " for input " + shape_string(X.shape()));
  }
  const std::size_t batch = X.dim(0), channels = X.dim(1);
  const std::size_t inner = X.size() / (batch * channels);
  Tensor out = X;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      double* p = out.raw() + (b * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) p[i] += Bv[c];
    }
  return push(std::move(label), std::move(out), {x.id, bias.id},
              [batch, channels, inner](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                add_into(gi[0], g);
                if (gi[1]) {
                  for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t c = 0; c < channels; ++c) {
                      const double* p = g.raw() + (b * channels + c) * inner;
                      double s = 0.0;
                      for (std::size_t i = 0; i < inner; ++i) s += p[i];
                      (*gi[1])[c] += s;
                    }
                }
              });
}

Var Graph::linear(Var x, Var weight, Var bias, const std::string& label) {
  return add_bias(matmul(x, weight, label + ".matmul"), bias, label);
}

Var Graph::conv2d(Var x, Var weight, std::size_t stride, Padding padding, std::string label) {
  const Tensor& X = value(x);
  const Tensor& W = value(weight);
  if (X.rank() != 4 || W.rank() != 4 || W.dim(1) != X.dim(1) || W.dim(2) != W.dim(3) || stride == 0) {
    shape_error(label, "conv2d of input " + shape_string(X.shape()) + " with weight " +
                           shape_string(W.shape()));
  }
  const std::size_t B = X.dim(0), C = X.dim(1), H = X.dim(2), Wd = X.dim(3);
  const std::size_t O = W.dim(0), k = W.dim(2);
  const std::size_t pad = padding == Padding::same ? (k - 1) / 2 : 0;
  if (H + 2 * pad < k || Wd + 2 * pad < k) shape_error(label, "kernel larger than input");
  const std::size_t Ho = conv_out_size(H, k, stride, pad);
  const std::size_t Wo = conv_out_size(Wd, k, stride, pad);
  const std::size_t ckk = C * k * k, hw = Ho * Wo, cols = B * hw;

  // im2col: rows (c, ki, kj), columns (b, oy, ox)
  auto col = std::make_shared<Tensor>(Shape{ckk, cols});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t ki = 0; ki < k; ++ki)
      for (std::size_t kj = 0; kj < k; ++kj) {
        double* row = col->raw() + ((c * k + ki) * k + kj) * cols;
        for (std::size_t b = 0; b < B; ++b) {
          const double* img = X.raw() + (b * C + c) * H * Wd;
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
            double* dst = row + b * hw + oy * Wo;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) {
              std::fill(dst, dst + Wo, 0.0);
              continue;
            }
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
              dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(Wd)) ? 0.0 : img[iy * static_cast<std::ptrdiff_t>(Wd) + ix];
            }
          }
        }
      }

  MatR prod = as_matrix(W, O, ckk) * as_matrix(*col, ckk, cols);
  Tensor out(Shape{B, O, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o)
      std::copy_n(prod.data() + o * cols + b * hw, hw, out.raw() + (b * O + o) * hw);

  return push(std::move(label), std::move(out), {x.id, weight.id},
              [=](const std::vector<Node>& nodes, const Tensor& g, std::span<Tensor*> gi) {
                MatR G(static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(cols));
                for (std::size_t b = 0; b < B; ++b)
                  for (std::size_t o = 0; o < O; ++o)
                    std::copy_n(g.raw() + (b * O + o) * hw, hw, G.data() + o * cols + b * hw);
                if (gi[1]) as_matrix(*gi[1], O, ckk).noalias() += G * as_matrix(*col, ckk, cols).transpose();
                if (!gi[0]) return;
                MatR dcol = as_matrix(nodes[weight.id].value, O, ckk).transpose() * G;
                Tensor& dx = *gi[0];
                for (std::size_t c = 0; c < C; ++c)
                  for (std::size_t ki = 0; ki < k; ++ki)
                    for (std::size_t kj = 0; kj < k; ++kj) {
                      const double* row = dcol.data() + ((c * k + ki) * k + kj) * cols;
                      for (std::size_t b = 0; b < B; ++b) {
                        double* img = dx.raw() + (b * C + c) * H * Wd;
                        for (std::size_t oy = 0; oy < Ho; ++oy) {
                          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
                          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                          const double* src = row + b * hw + oy * Wo;
                          for (std::size_t ox = 0; ox < Wo; ++ox) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
                            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(Wd)) img[iy * static_cast<std::ptrdiff_t>(Wd) + ix] += src[ox];
                          }
                        }
                      }
                    }
              });
}

// --- nonlinearities and pooling ---------------------------------------------

Var Graph::relu(Var x, std::string label) { return leaky_relu(x, 0.0, std::move(label)); }

Var Graph::leaky_relu(Var x, double slope, std::string label) {
  Tensor out = value(x);
  for (double& v : out.data()) v = v > 0.0 ? v : slope * v;
  return push(std::move(label), std::move(out), {x.id},
              [x, slope](const std::vector<Node>& nodes, const Tensor& g, std::span<Tensor*> gi) {
                const Tensor& in = nodes[x.id].value;
                for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += in[i] > 0.0 ? g[i] : slope * g[i];
              });
}

Var Graph::maxout(Var x, std::string label) {
  const Tensor& X = value(x);
  if (X.rank() < 2 || X.dim(1) % 2 != 0) {
    shape_error(label, "maxout needs an even channel count, got " + shape_string(X.shape()));
  }
  const std::size_t B = X.dim(0), C2 = X.dim(1), C = C2 / 2;
  const std::size_t inner = X.size() / (B * C2);
  Shape shape = X.shape();
  shape[1] = C;
  Tensor out(shape);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t i0 = (b * C2 + 2 * c) * inner + i;
        const std::size_t i1 = i0 + inner;
        const std::size_t o = (b * C + c) * inner + i;
        const bool second = X[i1] > X[i0];
        argmax[o] = second ? i1 : i0;
        out[o] = X[argmax[o]];
      }
  return push(std::move(label), std::move(out), {x.id},
              [argmax = std::move(argmax)](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                for (std::size_t o = 0; o < g.size(); ++o) (*gi[0])[argmax[o]] += g[o];
              });
}

Var Graph::vmax_pool(Var x, std::string label) {
  const Tensor& X = value(x);
  if (X.rank() != 4 || X.dim(1) % 2 != 0) {
    shape_error(label, "vmax_pool needs [B,2C,H,W], got " + shape_string(X.shape()));
  }
  const std::size_t B = X.dim(0), C2 = X.dim(1), C = C2 / 2, H = X.dim(2), W = X.dim(3);
  const std::size_t Ho = (H + 1) / 2, Wo = (W + 1) / 2;
  Tensor out(Shape{B, C, Ho, Wo});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          std::size_t best = static_cast<std::size_t>(-1);
          for (std::size_t dc = 0; dc < 2; ++dc)
            for (std::size_t dy = 0; dy < 2; ++dy)
              for (std::size_t dx = 0; dx < 2; ++dx) {
                const std::size_t iy = 2 * oy + dy, ix = 2 * ox + dx;
                if (iy >= H || ix >= W) continue;
                const std::size_t idx = ((b * C2 + 2 * c + dc) * H + iy) * W + ix;
                if (best == static_cast<std::size_t>(-1) || X[idx] > X[best]) best = idx;
              }
          const std::size_t o = ((b * C + c) * Ho + oy) * Wo + ox;
          argmax[o] = best;
          out[o] = X[best];
        }
  return push(std::move(label), std::move(out), {x.id},
              [argmax = std::move(argmax)](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                for (std::size_t o = 0; o < g.size(); ++o) (*gi[0])[argmax[o]] += g[o];
              });
}

Var Graph::global_avg_pool(Var x, std::string label) {
  const Tensor& X = value(x);
  if (X.rank() != 4) shape_error(label, "avg_pool needs [B,C,H,W], got " + shape_string(X.shape()));
  const std::size_t B = X.dim(0), C = X.dim(1), hw = X.dim(2) * X.dim(3);
  Tensor out(Shape{B, C});
  for (std::size_t i = 0; i < B * C; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < hw; ++j) s += X[i * hw + j];
    out[i] = s / static_cast<double>(hw);
  }
  return push(std::move(label), std::move(out), {x.id},
              [hw](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                const double inv = 1.0 / static_cast<double>(hw);
                for (std::size_t i = 0; i < g.size(); ++i)
                  for (std::size_t j = 0; j < hw; ++j) (*gi[0])[i * hw + j] += g[i] * inv;
              });
}

Var Graph::softmax(Var x, std::string label) {
  const Tensor& X = value(x);
  if (X.rank() != 2) shape_error(label, "softmax needs [B,C], got " + shape_string(X.shape()));
  const std::size_t B = X.dim(0), C = X.dim(1);
  Tensor out(X.shape());
  for (std::size_t b = 0; b < B; ++b) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, X.at(b, c));
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += (out.at(b, c) = std::exp(X.at(b, c) - mx));
    for (std::size_t c = 0; c < C; ++c) out.at(b, c) /= s;
  }
  const std::size_t self = nodes_.size();
  return push(std::move(label), std::move(out), {x.id},
              [self, B, C](const std::vector<Node>& nodes, const Tensor& g, std::span<Tensor*> gi) {
                const Tensor& y = nodes[self].value;
                for (std::size_t b = 0; b < B; ++b) {
                  double dot = 0.0;
                  for (std::size_t c = 0; c < C; ++c) dot += g.at(b, c) * y.at(b, c);
                  for (std::size_t c = 0; c < C; ++c) gi[0]->at(b, c) += y.at(b, c) * (g.at(b, c) - dot);
                }
              });
}

Var Graph::log_softmax(Var x, std::string label) {
  const Tensor& X = value(x);
  if (X.rank() != 2) shape_error(label, "log_softmax needs [B,C], got " + shape_string(X.shape()));
  const std::size_t B = X.dim(0), C = X.dim(1);
  Tensor out(X.shape());
  for (std::size_t b = 0; b < B; ++b) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, X.at(b, c));
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += std::exp(X.at(b, c) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < C; ++c) out.at(b, c) = X.at(b, c) - lse;
  }
  const std::size_t self = nodes_.size();
  return push(std::move(label), std::move(out), {x.id},
              [self, B, C](const std::vector<Node>& nodes, const Tensor& g, std::span<Tensor*> gi) {
                const Tensor& y = nodes[self].value;
                for (std::size_t b = 0; b < B; ++b) {
                  double gs = 0.0;
                  for (std::size_t c = 0; c < C; ++c) gs += g.at(b, c);
                  for (std::size_t c = 0; c < C; ++c) gi[0]->at(b, c) += g.at(b, c) - std::exp(y.at(b, c)) * gs;
                }
              });
}

Var Graph::log(Var x, std::string label) {
  Tensor out = value(x);
  for (double& v : out.data()) {
    if (!(v > 0.0)) throw NumericError("node '" + label + "': log of non-positive value");
    v = std::log(v);
  }
  return push(std::move(label), std::move(out), {x.id},
              [x](const std::vector<Node>& nodes, const Tensor& g, std::span<Tensor*> gi) {
                const Tensor& in = nodes[x.id].value;
                for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] / in[i];
              });
}

Var Graph::l2_normalize(Var x, std::string label) {
  const Tensor& X = value(x);
  if (X.rank() != 2) shape_error(label, "l2_normalize needs [B,K], got " + shape_string(X.shape()));
  const std::size_t B = X.dim(0), K = X.dim(1);
  Tensor out(X.shape());
  std::vector<double> norms(B);
  for (std::size_t b = 0; b < B; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += X.at(b, k) * X.at(b, k);
    norms[b] = std::sqrt(s);
    if (norms[b] > 0.0)
      for (std::size_t k = 0; k < K; ++k) out.at(b, k) = X.at(b, k) / norms[b];
  }
  const std::size_t self = nodes_.size();
  return push(std::move(label), std::move(out), {x.id},
              [self, B, K, norms = std::move(norms)](const std::vector<Node>& nodes, const Tensor& g,
                                                     std::span<Tensor*> gi) {
                const Tensor& y = nodes[self].value;
                for (std::size_t b = 0; b < B; ++b) {
                  if (norms[b] == 0.0) continue;
                  double dot = 0.0;
                  for (std::size_t k = 0; k < K; ++k) dot += y.at(b, k) * g.at(b, k);
                  for (std::size_t k = 0; k < K; ++k)
                    gi[0]->at(b, k) += (g.at(b, k) - y.at(b, k) * dot) / norms[b];
                }
              });
}

// --- elementwise and reductions --------------------------------------------

Var Graph::add(Var a, Var b, std::string label) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape()) shape_error(label, "add of " + shape_string(A.shape()) + " and " + shape_string(B.shape()));
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  return push(std::move(label), std::move(out), {a.id, b.id},
              [](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                add_into(gi[0], g);
                add_into(gi[1], g);
              });
}

Var Graph::sub(Var a, Var b, std::string label) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape()) shape_error(label, "sub of " + shape_string(A.shape()) + " and " + shape_string(B.shape()));
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
  return push(std::move(label), std::move(out), {a.id, b.id},
              [](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                add_into(gi[0], g);
                if (gi[1])
                  for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] -= g[i];
              });
}

Var Graph::mul(Var a, Var b, std::string label) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape()) shape_error(label, "mul of " + shape_string(A.shape()) + " and " + shape_string(B.shape()));
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  return push(std::move(label), std::move(out), {a.id, b.id},
              [a, b](const std::vector<Node>& nodes, const Tensor& g, std::span<Tensor*> gi) {
                const Tensor& A = nodes[a.id].value;
                const Tensor& B = nodes[b.id].value;
                if (gi[0])
                  for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * B[i];
                if (gi[1])
                  for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * A[i];
              });
}

Var Graph::scale(Var x, double factor, std::string label) {
  Tensor out = value(x);
  for (double& v : out.data()) v *= factor;
  return push(std::move(label), std::move(out), {x.id},
              [factor](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += factor * g[i];
              });
}

Var Graph::sum(Var x, std::string label) {
  const Tensor& X = value(x);
  double s = 0.0;
  for (double v : X.data()) s += v;
  return push(std::move(label), Tensor::scalar(s), {x.id},
              [](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                for (double& v : gi[0]->data()) v += g[0];
              });
}

Var Graph::mean(Var x, std::string label) {
  const Tensor& X = value(x);
  if (X.empty()) shape_error(label, "mean of an empty tensor");
  double s = 0.0;
  for (double v : X.data()) s += v;
  const double n = static_cast<double>(X.size());
  return push(std::move(label), Tensor::scalar(s / n), {x.id},
              [n](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                for (double& v : gi[0]->data()) v += g[0] / n;
              });
}

Var Graph::sum_rows(Var x, std::string label) {
  const Tensor& X = value(x);
  if (X.rank() != 2) shape_error(label, "sum_rows needs [B,K], got " + shape_string(X.shape()));
  const std::size_t B = X.dim(0), K = X.dim(1);
  Tensor out(Shape{B});
  for (std::size_t b = 0; b < B; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += X.at(b, k);
    out[b] = s;
  }
  return push(std::move(label), std::move(out), {x.id},
              [B, K](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                for (std::size_t b = 0; b < B; ++b)
                  for (std::size_t k = 0; k < K; ++k) gi[0]->at(b, k) += g[b];
              });
}

Var Graph::transpose(Var x, std::string label) {
  const Tensor& X = value(x);
  if (X.rank() != 2) shape_error(label, "transpose needs rank 2, got " + shape_string(X.shape()));
  const std::size_t M = X.dim(0), N = X.dim(1);
  Tensor out(Shape{N, M});
  as_matrix(out, N, M) = as_matrix(X, M, N).transpose();
  return push(std::move(label), std::move(out), {x.id},
              [M, N](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                as_matrix(*gi[0], M, N) += as_matrix(g, N, M).transpose();
              });
}

Var Graph::concat_rows(const std::vector<Var>& parts, std::string label) {
  if (parts.empty()) shape_error(label, "concat_rows of nothing");
  Shape shape = value(parts[0]).shape();
  if (shape.empty()) shape_error(label, "concat_rows of scalars");
  std::size_t rows = 0;
  std::vector<std::size_t> ids, offsets;
  for (Var p : parts) {
    const Tensor& t = value(p);
    Shape tail(t.shape().begin() + (t.rank() ? 1 : 0), t.shape().end());
    Shape ref(shape.begin() + 1, shape.end());
    if (t.rank() != shape.size() || tail != ref) {
      shape_error(label, "concat_rows of " + shape_string(value(parts[0]).shape()) + " and " +
                             shape_string(t.shape()));
    }
    ids.push_back(p.id);
    offsets.push_back(rows);
    rows += t.dim(0);
  }
  shape[0] = rows;
  Tensor out(shape);
  std::size_t pos = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    std::copy_n(t.raw(), t.size(), out.raw() + pos);
    pos += t.size();
  }
  const std::size_t row_size = rows ? out.size() / rows : 0;
  return push(std::move(label), std::move(out), ids,
              [offsets, row_size](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                for (std::size_t i = 0; i < gi.size(); ++i) {
                  if (!gi[i]) continue;
                  const double* src = g.raw() + offsets[i] * row_size;
                  for (std::size_t j = 0; j < gi[i]->size(); ++j) (*gi[i])[j] += src[j];
                }
              });
}

Var Graph::slice_rows(Var x, std::size_t begin, std::size_t end, std::string label) {
  const Tensor& X = value(x);
  if (X.rank() < 1 || begin > end || end > X.dim(0)) {
    shape_error(label, "slice [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                           shape_string(X.shape()));
  }
  const std::size_t row_size = X.dim(0) ? X.size() / X.dim(0) : 0;
  Shape shape = X.shape();
  shape[0] = end - begin;
  Tensor out(shape);
  std::copy_n(X.raw() + begin * row_size, out.size(), out.raw());
  return push(std::move(label), std::move(out), {x.id},
              [begin, row_size](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                double* dst = gi[0]->raw() + begin * row_size;
                for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j];
              });
}

Var Graph::pick(Var x, std::vector<std::size_t> columns, std::string label) {
  const Tensor& X = value(x);
  if (X.rank() != 2 || columns.size() != X.dim(0)) {
    shape_error(label, "pick of " + std::to_string(columns.size()) + " columns from " + shape_string(X.shape()));
  }
  const std::size_t C = X.dim(1);
  Tensor out(Shape{columns.size()});
  for (std::size_t b = 0; b < columns.size(); ++b) {
    if (columns[b] >= C) shape_error(label, "pick column out of range");
    out[b] = X.at(b, columns[b]);
  }
  return push(std::move(label), std::move(out), {x.id},
              [columns = std::move(columns)](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                for (std::size_t b = 0; b < columns.size(); ++b) gi[0]->at(b, columns[b]) += g[b];
              });
}

Var Graph::reshape(Var x, Shape shape, std::string label) {
  const Tensor& X = value(x);
  if (shape_size(shape) != X.size()) {
    shape_error(label, "reshape " + shape_string(X.shape()) + " to " + shape_string(shape));
  }
  return push(std::move(label), X.reshaped(std::move(shape)), {x.id},
              [](const std::vector<Node>&, const Tensor& g, std::span<Tensor*> gi) {
                for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
              });
}

// --- reverse pass ------------------------------------------------------------

Gradients Graph::backward(Var loss) const {
  const Node& root = node(loss);
  if (root.value.size() != 1) {
    throw ShapeError("node '" + root.label + "': backward needs a scalar loss, got " +
                     shape_string(root.value.shape()));
  }
  Gradients out;
  if (!root.requires_grad) return out;

  std::vector<Tensor> grads(loss.id + 1);
  grads[loss.id] = Tensor(root.value.shape(), 1.0);
  std::vector<Tensor*> inputs;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.requires_grad || grads[i].empty()) continue;
    if (n.param) {
      out.accumulate(n.param, grads[i]);
      continue;
    }
    if (!n.backward) continue;
    inputs.assign(n.inputs.size(), nullptr);
    for (std::size_t j = 0; j < n.inputs.size(); ++j) {
      const std::size_t in = n.inputs[j];
      if (!nodes_[in].requires_grad) continue;
      if (grads[in].empty()) grads[in] = Tensor(nodes_[in].value.shape(), 0.0);
      inputs[j] = &grads[in];
    }
    n.backward(nodes_, grads[i], inputs);
    // Intermediate gradients are no longer needed once propagated.
    grads[i] = Tensor();
  }
  return out;
}

}  // namespace vda
