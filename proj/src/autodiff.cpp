#include "fhdr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fhdr/errors.hpp"

namespace fhdr::ad {

std::string_view tag_name(OpTag tag) {
  switch (tag) {
    case OpTag::constant: return "constant";
    case OpTag::parameter: return "parameter";
    case OpTag::conv2d: return "conv2d";
    case OpTag::add: return "add";
    case OpTag::sub: return "sub";
    case OpTag::mul: return "mul";
    case OpTag::sigmoid: return "sigmoid";
    case OpTag::relu: return "relu";
    case OpTag::leaky_relu: return "leaky_relu";
    case OpTag::scale: return "scale";
    case OpTag::concat_channels: return "concat_channels";
    case OpTag::slice_channels: return "slice_channels";
    case OpTag::dwt2: return "dwt2";
    case OpTag::idwt2: return "idwt2";
    case OpTag::clamp_min: return "clamp_min";
    case OpTag::mu_law: return "mu_law";
    case OpTag::abs: return "abs";
    case OpTag::mean: return "mean";
    case OpTag::sum: return "sum";
    case OpTag::sobel: return "sobel";
  }
  return "?";
}

const Tensor& Var::value() const {
  if (graph == nullptr) throw StateError("Var is not bound to a graph");
  return graph->value(*this);
}

void Graph::check_recordable() const {
  if (finalized_) throw StateError("graph already ran backward(); call reset() before recording again");
}

Var Graph::constant(Tensor value) { return record(OpTag::constant, std::move(value), {}, nullptr); }

Var Graph::parameter(Tensor value) {
  Var v = record(OpTag::parameter, std::move(value), {}, nullptr);
  nodes_[v.id].requires_grad = true;
  return v;
}

Var Graph::record(OpTag tag, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
  check_recordable();
  bool needs_grad = false;
  for (std::size_t in : inputs) {
    if (in >= nodes_.size()) throw StateError("record: input id does not precede its consumer");
    needs_grad = needs_grad || nodes_[in].requires_grad;
  }
  Node node{tag, std::move(value), Tensor{}, std::move(inputs), needs_grad ? std::move(fn) : BackwardFn{}, needs_grad};
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

const Tensor& Graph::value(Var v) const {
  if (v.graph != this || v.id >= nodes_.size()) throw StateError("Var does not belong to this graph");
  return nodes_[v.id].value;
}

bool Graph::requires_grad(Var v) const {
  value(v);
  return nodes_[v.id].requires_grad;
}

OpTag Graph::tag(Var v) const {
  value(v);
  return nodes_[v.id].tag;
}

const std::vector<std::size_t>& Graph::inputs(Var v) const {
  value(v);
  return nodes_[v.id].inputs;
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty() && node.value.numel() > 0) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void Graph::backward(Var loss) {
  const Tensor& lv = value(loss);
  if (lv.shape() != Shape{1, 1, 1, 1}) throw ShapeError("backward: loss must be scalar, got " + lv.shape().str());
  if (finalized_) throw StateError("backward: graph already finalized; call reset()");
  finalized_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss.id).fill(1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.grad.empty()) continue;
    node.backward(*this, i);
  }
}

Tensor Graph::grad(Var v) const {
  const Tensor& val = value(v);
  const Tensor& g = nodes_[v.id].grad;
  return g.empty() ? Tensor(val.shape()) : g;
}

void Graph::reset() {
  nodes_.clear();
  finalized_ = false;
}

Graph& graph_of(std::initializer_list<Var> vars) {
  Graph* g = nullptr;
  for (const Var& v : vars) {
    if (v.graph == nullptr) throw StateError("Var is not bound to a graph");
    if (g != nullptr && v.graph != g) throw StateError("operands belong to different graphs");
    g = v.graph;
  }
  return *g;
}

namespace {

template <class Fwd, class Deriv>
Var unary(OpTag tag, Var a, Fwd fwd, Deriv deriv) {
  Graph& g = graph_of({a});
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out.data()[i] = fwd(x.data()[i]);
  return g.record(tag, std::move(out), {a.id}, [deriv](Graph& gr, std::size_t self) {
    const std::size_t in = gr.inputs(Var{&gr, self})[0];
    const Tensor& up = gr.upstream(self);
    const Tensor& xv = gr.node_value(in);
    const Tensor& yv = gr.node_value(self);
    Tensor& gx = gr.grad_buffer(in);
    for (std::size_t i = 0; i < up.numel(); ++i) gx.data()[i] += up.data()[i] * deriv(xv.data()[i], yv.data()[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  Graph& g = graph_of({a, b});
  require_same_shape(a.value(), b.value(), "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.value().data()[i] + b.value().data()[i];
  return g.record(OpTag::add, std::move(out), {a.id, b.id}, [](Graph& gr, std::size_t self) {
    const auto& ins = gr.inputs(Var{&gr, self});
    const Tensor& up = gr.upstream(self);
    for (std::size_t in : ins) {
      if (!gr.node_requires_grad(in)) continue;
      Tensor& gx = gr.grad_buffer(in);
      for (std::size_t i = 0; i < up.numel(); ++i) gx.data()[i] += up.data()[i];
    }
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of({a, b});
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.value().data()[i] - b.value().data()[i];
  return g.record(OpTag::sub, std::move(out), {a.id, b.id}, [](Graph& gr, std::size_t self) {
    const auto& ins = gr.inputs(Var{&gr, self});
    const Tensor& up = gr.upstream(self);
    for (int k = 0; k < 2; ++k) {
      if (!gr.node_requires_grad(ins[k])) continue;
      const double sign = k == 0 ? 1.0 : -1.0;
      Tensor& gx = gr.grad_buffer(ins[k]);
      for (std::size_t i = 0; i < up.numel(); ++i) gx.data()[i] += sign * up.data()[i];
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of({a, b});
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.value().data()[i] * b.value().data()[i];
  return g.record(OpTag::mul, std::move(out), {a.id, b.id}, [](Graph& gr, std::size_t self) {
    const auto& ins = gr.inputs(Var{&gr, self});
    const Tensor& up = gr.upstream(self);
    for (int k = 0; k < 2; ++k) {
      if (!gr.node_requires_grad(ins[k])) continue;
      const Tensor& other = gr.node_value(ins[1 - k]);
      Tensor& gx = gr.grad_buffer(ins[k]);
      for (std::size_t i = 0; i < up.numel(); ++i) gx.data()[i] += up.data()[i] * other.data()[i];
    }
  });
}

Var sigmoid(Var a) {
  return unary(
      OpTag::sigmoid, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(
      OpTag::relu, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      OpTag::leaky_relu, a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var scale(Var a, double factor) {
  return unary(
      OpTag::scale, a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var clamp_min(Var a, double lo) {
  return unary(
      OpTag::clamp_min, a, [lo](double x) { return x > lo ? x : lo; },
      [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

Var abs(Var a) {
  return unary(
      OpTag::abs, a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var elementwise(ElementwiseKind kind, Var a, const Var* b, double slope) {
  const bool binary = kind == ElementwiseKind::add || kind == ElementwiseKind::sub || kind == ElementwiseKind::mul;
  if (binary != (b != nullptr)) {
    throw ShapeError(binary ? "elementwise: binary kind needs a second operand"
                            : "elementwise: unary kind takes no second operand");
  }
  switch (kind) {
    case ElementwiseKind::add: return add(a, *b);
    case ElementwiseKind::sub: return sub(a, *b);
    case ElementwiseKind::mul: return mul(a, *b);
    case ElementwiseKind::sigmoid: return sigmoid(a);
    case ElementwiseKind::relu: return relu(a);
    case ElementwiseKind::leaky_relu: return leaky_relu(a, slope);
  }
  throw ConfigError("elementwise: unknown kind");
}

Var concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no parts");
  Graph& g = graph_of({parts[0]});
  std::vector<Tensor> values;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    graph_of({parts[0], p});
    values.push_back(p.value());
    ids.push_back(p.id);
  }
  Tensor out = fhdr::concat_channels(values);
  return g.record(OpTag::concat_channels, std::move(out), std::move(ids), [](Graph& gr, std::size_t self) {
    const auto& ins = gr.inputs(Var{&gr, self});
    const Tensor& up = gr.upstream(self);
    const Shape& s = up.shape();
    std::size_t c0 = 0;
    for (std::size_t in : ins) {
      const std::size_t c = gr.node_value(in).shape().c;
      if (gr.node_requires_grad(in)) {
        Tensor& gx = gr.grad_buffer(in);
        for (std::size_t n = 0; n < s.n; ++n) {
          const double* src = up.plane(n, c0);
          double* dst = gx.plane(n, 0);
          for (std::size_t i = 0; i < c * s.plane(); ++i) dst[i] += src[i];
        }
      }
      c0 += c;
    }
  });
}

Var slice_channels(Var a, std::size_t begin, std::size_t count) {
  Graph& g = graph_of({a});
  Tensor out = fhdr::slice_channels(a.value(), begin, count);
  return g.record(OpTag::slice_channels, std::move(out), {a.id}, [begin, count](Graph& gr, std::size_t self) {
    const std::size_t in = gr.inputs(Var{&gr, self})[0];
    const Tensor& up = gr.upstream(self);
    Tensor& gx = gr.grad_buffer(in);
    const Shape& s = up.shape();
    for (std::size_t n = 0; n < s.n; ++n) {
      const double* src = up.plane(n, 0);
      double* dst = gx.plane(n, begin);
      for (std::size_t i = 0; i < count * s.plane(); ++i) dst[i] += src[i];
    }
  });
}

Var sum(Var a) {
  Graph& g = graph_of({a});
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return g.record(OpTag::sum, Tensor::scalar(s), {a.id}, [](Graph& gr, std::size_t self) {
    const std::size_t in = gr.inputs(Var{&gr, self})[0];
    const double up = gr.upstream(self).item();
    for (double& v : gr.grad_buffer(in).data()) v += up;
  });
}

Var mean(Var a) {
  Graph& g = graph_of({a});
  const std::size_t n = a.value().numel();
  if (n == 0) throw ShapeError("mean: empty tensor");
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return g.record(OpTag::mean, Tensor::scalar(s / static_cast<double>(n)), {a.id}, [n](Graph& gr, std::size_t self) {
    const std::size_t in = gr.inputs(Var{&gr, self})[0];
    const double up = gr.upstream(self).item() / static_cast<double>(n);
    for (double& v : gr.grad_buffer(in).data()) v += up;
  });
}

}  // namespace fhdr::ad
