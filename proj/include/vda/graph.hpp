#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vda/tensor.hpp"

namespace vda {

/// A named tensor owned by a network. Frozen parameters never receive gradients.
struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
};

/// Handle to a node inside a Graph.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

enum class Padding { same, valid };

struct GradEntry {
  Parameter* param = nullptr;
  Tensor grad;
};

/// Gradients produced by Graph::backward, one entry per tracked parameter.
class Gradients {
 public:
  const std::vector<GradEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  const Tensor* find(const Parameter& p) const;
  const Tensor* find(std::string_view name) const;

  void accumulate(Parameter* p, const Tensor& g);

 private:
  std::vector<GradEntry> entries_;
};

/// Define-by-run computation graph with reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the node list is already
/// topologically sorted. Parameter leaves copy the parameter value at the
/// time they are created; later updates to the Parameter do not affect nodes
/// that already exist.
class Graph {
 public:
  Var constant(Tensor value, std::string label = "constant");
  /// Leaf bound to a parameter. The leaf is differentiable iff `track` is set
  /// and the parameter is trainable.
  Var parameter(Parameter& p, bool track = true);
  /// Non-differentiable leaf holding a copy of the parameter value.
  Var parameter(const Parameter& p) { return constant(p.value, p.name); }

  Var matmul(Var a, Var b, std::string label = "matmul");
  /// Adds a per-channel bias to [B,O] or [B,C,H,W] inputs.
  Var add_bias(Var x, Var bias, std::string label = "add_bias");
  Var linear(Var x, Var weight, Var bias, const std::string& label = "linear");
  /// 2-D cross-correlation of [B,C,H,W] with weights [O,C,k,k], zero padded.
  Var conv2d(Var x, Var weight, std::size_t stride, Padding padding,
             std::string label = "conv2d");

  Var relu(Var x, std::string label = "relu");
  Var leaky_relu(Var x, double slope, std::string label = "leaky_relu");
  /// Max over adjacent channel pairs (2k, 2k+1) of [B,2C,...].
  Var maxout(Var x, std::string label = "maxout");
  /// 2x2 spatial max (stride 2, ceil mode) combined with channel-pair max.
  Var vmax_pool(Var x, std::string label = "vmax_pool");
  /// Average over the full spatial extent: [B,C,H,W] -> [B,C].
  Var global_avg_pool(Var x, std::string label = "avg_pool");

  Var softmax(Var x, std::string label = "softmax");
  Var log_softmax(Var x, std::string label = "log_softmax");
  /// Elementwise natural log; throws NumericError for non-positive inputs.
  Var log(Var x, std::string label = "log");
  /// Row-wise L2 normalisation of [B,K]; zero rows map to zero.
  Var l2_normalize(Var x, std::string label = "l2_normalize");

  Var add(Var a, Var b, std::string label = "add");
  Var sub(Var a, Var b, std::string label = "sub");
  Var mul(Var a, Var b, std::string label = "mul");
  Var scale(Var x, double factor, std::string label = "scale");

  Var sum(Var x, std::string label = "sum");
  Var mean(Var x, std::string label = "mean");
  /// [B,K] -> [B]
  Var sum_rows(Var x, std::string label = "sum_rows");
  Var transpose(Var x, std::string label = "transpose");
  Var concat_rows(const std::vector<Var>& parts, std::string label = "concat_rows");
  Var slice_rows(Var x, std::size_t begin, std::size_t end, std::string label = "slice_rows");
  /// out[i] = x[i, columns[i]] for [B,C] input.
  Var pick(Var x, std::vector<std::size_t> columns, std::string label = "pick");
  Var reshape(Var x, Shape shape, std::string label = "reshape");

  const Tensor& value(Var v) const;
  const std::string& label(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }

  /// Reverse pass from a size-1 loss node. Can be called repeatedly.
  Gradients backward(Var loss) const;

 private:
  struct Node;
  using BackwardFn = std::function<void(const std::vector<Node>& nodes, const Tensor& grad_out,
                                        std::span<Tensor*> grad_in)>;

  struct Node {
    std::string label;
    Tensor value;
    std::vector<std::size_t> inputs;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  Var push(std::string label, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);
  const Node& node(Var v) const;
  [[noreturn]] void shape_error(const std::string& label, const std::string& what) const;

  std::vector<Node> nodes_;
};

}  // namespace vda
