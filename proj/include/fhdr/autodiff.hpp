#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "fhdr/tensor.hpp"

/// Tape-based reverse-mode automatic differentiation over `Tensor`.
///
/// A `Graph` records every operation in execution order, so node ids are a
/// topological order by construction. `backward()` walks the tape once in
/// reverse, summing gradients into each input. After `backward()` the graph is
/// finalized: recording or a second backward throws `StateError` until
/// `reset()`.
namespace fhdr::ad {

enum class OpTag {
  constant,
  parameter,
  conv2d,
  add,
  sub,
  mul,
  sigmoid,
  relu,
  leaky_relu,
  scale,
  concat_channels,
  slice_channels,
  dwt2,
  idwt2,
  clamp_min,
  mu_law,
  abs,
  mean,
  sum,
  sobel,
};

std::string_view tag_name(OpTag tag);

class Graph;

/// Handle to a node of a graph. Cheap to copy; valid until the graph is reset.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

class Graph {
 public:
  /// Receives the graph and the id of the node whose upstream gradient is ready.
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  OpTag tag(Var v) const;
  const std::vector<std::size_t>& inputs(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  bool finalized() const { return finalized_; }

  /// Populates gradients of every node that requires them. `loss` must be (1,1,1,1).
  void backward(Var loss);
  /// d loss / d v; all zeros if `v` does not influence the loss.
  Tensor grad(Var v) const;
  void reset();

  // Op-implementer interface.
  Var record(OpTag tag, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);
  const Tensor& node_value(std::size_t id) const { return nodes_[id].value; }
  bool node_requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Upstream gradient of `id`; only meaningful inside a BackwardFn for that node.
  const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }
  /// Gradient accumulator of `id`, zero-initialized on first use.
  Tensor& grad_buffer(std::size_t id);

 private:
  struct Node {
    OpTag tag;
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check_recordable() const;

  std::deque<Node> nodes_;  // stable addresses: value() references survive later recording
  bool finalized_ = false;
};

/// Same-graph check shared by every op.
Graph& graph_of(std::initializer_list<Var> vars);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t pad = 1;
};

Var conv2d(Var input, Var weight, Var bias, Conv2dOptions opts = {});

enum class ElementwiseKind { add, sub, mul, sigmoid, relu, leaky_relu };

/// Dispatcher over the pointwise ops; `b` must be given for binary kinds only.
Var elementwise(ElementwiseKind kind, Var a, const Var* b = nullptr, double slope = 0.01);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var sigmoid(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var scale(Var a, double factor);
Var concat_channels(std::span<const Var> parts);
Var slice_channels(Var a, std::size_t begin, std::size_t count);
/// max(a, lo); the gradient passes where a > lo and is zero where clamping is active.
Var clamp_min(Var a, double lo);
Var abs(Var a);
/// Mean of all entries as a (1,1,1,1) tensor.
Var mean(Var a);
Var sum(Var a);

}  // namespace fhdr::ad

namespace fhdr {

/// Direct forward convolution on plain tensors (zero padding).
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, ad::Conv2dOptions opts = {});

}  // namespace fhdr
