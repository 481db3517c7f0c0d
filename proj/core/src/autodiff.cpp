#include "wdro/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace wdro::ad {

namespace {

std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

bool is_scalar_shape(Eigen::Index rows, Eigen::Index cols) { return rows == 1 && cols == 1; }

// Result shape of an elementwise binary op where either side may be 1x1.
std::pair<Eigen::Index, Eigen::Index> broadcast_shape(OpKind kind, Eigen::Index ar,
                                                      Eigen::Index ac, Eigen::Index br,
                                                      Eigen::Index bc) {
  if (ar == br && ac == bc) return {ar, ac};
  if (is_scalar_shape(ar, ac)) return {br, bc};
  if (is_scalar_shape(br, bc)) return {ar, ac};
  throw ShapeError(op_name(kind), std::string("incompatible operand shapes ") +
                                      shape_string(ar, ac) + " and " + shape_string(br, bc));
}

Matrix elementwise(OpKind kind, const Matrix& a, const Matrix& b) {
  auto combine = [kind](auto&& lhs, auto&& rhs) -> Matrix {
    switch (kind) {
      case OpKind::add: return (lhs + rhs).matrix();
      case OpKind::sub: return (lhs - rhs).matrix();
      default: return (lhs * rhs).matrix();
    }
  };
  if (a.rows() == b.rows() && a.cols() == b.cols()) return combine(a.array(), b.array());
  if (a.size() == 1) {
    const Matrix filled = Matrix::Constant(b.rows(), b.cols(), a(0, 0));
    return combine(filled.array(), b.array());
  }
  const Matrix filled = Matrix::Constant(a.rows(), a.cols(), b(0, 0));
  return combine(a.array(), filled.array());
}

Matrix softmax_of(const Matrix& z) {
  const double m = z.maxCoeff();
  Matrix e = (z.array() - m).exp().matrix();
  e /= e.sum();
  return e;
}

double log_sum_exp(const Matrix& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

}  // namespace

ShapeError::ShapeError(std::string slot, const std::string& what)
    : std::invalid_argument("shape mismatch in '" + slot + "': " + what), slot_(std::move(slot)) {}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::affine: return "affine";
    case OpKind::sum: return "sum";
    case OpKind::broadcast: return "broadcast";
    case OpKind::matvec: return "matvec";
    case OpKind::matvec_t: return "matvec_t";
    case OpKind::outer: return "outer";
    case OpKind::tanh: return "tanh";
    case OpKind::leaky_relu: return "leaky_relu";
    case OpKind::log: return "log";
    case OpKind::exp: return "exp";
    case OpKind::reciprocal: return "reciprocal";
    case OpKind::softmax: return "softmax";
    case OpKind::softmax_cross_entropy: return "softmax_cross_entropy";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// GraphBuilder

NodeRef GraphBuilder::push(Op op) {
  ops_.push_back(std::move(op));
  return NodeRef{static_cast<std::int32_t>(ops_.size() - 1)};
}

const GraphBuilder::Op& GraphBuilder::at(NodeRef ref, const char* context) const {
  if (ref.index < 0 || static_cast<std::size_t>(ref.index) >= ops_.size()) {
    throw std::invalid_argument(std::string(context) + ": node does not belong to this builder");
  }
  return ops_[static_cast<std::size_t>(ref.index)];
}

NodeRef GraphBuilder::features(Eigen::Index dim) {
  if (features_node_ >= 0) throw std::logic_error("graph already has a features slot");
  if (dim < 1) throw ShapeError("features", "dimension must be positive");
  slots_.push_back({Slot::Kind::features, "features", -1, {}});
  Op op;
  op.rows = dim;
  op.cols = 1;
  op.slot = static_cast<int>(slots_.size() - 1);
  const NodeRef ref = push(op);
  features_node_ = ref.index;
  return ref;
}

NodeRef GraphBuilder::label(Eigen::Index dim) {
  if (label_node_ >= 0) throw std::logic_error("graph already has a label slot");
  if (dim < 1) throw ShapeError("label", "dimension must be positive");
  slots_.push_back({Slot::Kind::label, "label", -1, {}});
  Op op;
  op.rows = dim;
  op.cols = 1;
  op.slot = static_cast<int>(slots_.size() - 1);
  const NodeRef ref = push(op);
  label_node_ = ref.index;
  return ref;
}

NodeRef GraphBuilder::parameter(std::string name, Eigen::Index rows, Eigen::Index cols) {
  if (rows < 1 || cols < 1) throw ShapeError(name, "parameter block must be non-empty");
  ParameterBlock block{name, rows, cols, parameter_count_};
  parameter_count_ += block.size();
  blocks_.push_back(block);
  slots_.push_back({Slot::Kind::parameter, std::move(name), static_cast<int>(blocks_.size() - 1), {}});
  Op op;
  op.rows = rows;
  op.cols = cols;
  op.slot = static_cast<int>(slots_.size() - 1);
  return push(op);
}

NodeRef GraphBuilder::constant(Matrix value) {
  Op op;
  op.rows = value.rows();
  op.cols = value.cols();
  slots_.push_back({Slot::Kind::constant, "constant", -1, std::move(value)});
  op.slot = static_cast<int>(slots_.size() - 1);
  return push(op);
}

NodeRef GraphBuilder::binary(OpKind kind, NodeRef a, NodeRef b) {
  const Op& lhs = at(a, op_name(kind));
  const Op& rhs = at(b, op_name(kind));
  const auto [rows, cols] = broadcast_shape(kind, lhs.rows, lhs.cols, rhs.rows, rhs.cols);
  Op op;
  op.kind = kind;
  op.args = {a.index, b.index};
  op.rows = rows;
  op.cols = cols;
  return push(op);
}

NodeRef GraphBuilder::add(NodeRef a, NodeRef b) { return binary(OpKind::add, a, b); }
NodeRef GraphBuilder::sub(NodeRef a, NodeRef b) { return binary(OpKind::sub, a, b); }
NodeRef GraphBuilder::mul(NodeRef a, NodeRef b) { return binary(OpKind::mul, a, b); }

NodeRef GraphBuilder::affine(NodeRef a, double scale, double shift) {
  const Op& src = at(a, "affine");
  Op op;
  op.kind = OpKind::affine;
  op.args = {a.index, -1};
  op.attr = {scale, shift};
  op.rows = src.rows;
  op.cols = src.cols;
  return push(op);
}

NodeRef GraphBuilder::sum(NodeRef a) {
  at(a, "sum");
  Op op;
  op.kind = OpKind::sum;
  op.args = {a.index, -1};
  op.rows = 1;
  op.cols = 1;
  return push(op);
}

NodeRef GraphBuilder::matvec(NodeRef w, NodeRef v) {
  const Op& mat = at(w, "matvec");
  const Op& vec = at(v, "matvec");
  if (vec.cols != 1 || vec.rows != mat.cols) {
    throw ShapeError("matvec", "cannot multiply " + shape_string(mat.rows, mat.cols) + " by " +
                                   shape_string(vec.rows, vec.cols));
  }
  Op op;
  op.kind = OpKind::matvec;
  op.args = {w.index, v.index};
  op.rows = mat.rows;
  op.cols = 1;
  return push(op);
}

namespace {
GraphBuilder::Op unary_op(OpKind kind, std::int32_t arg, Eigen::Index rows, Eigen::Index cols,
                          double attr = 0.0) {
  GraphBuilder::Op op;
  op.kind = kind;
  op.args = {arg, -1};
  op.attr = {attr, 0.0};
  op.rows = rows;
  op.cols = cols;
  return op;
}
}  // namespace

NodeRef GraphBuilder::tanh(NodeRef a) {
  const Op& src = at(a, "tanh");
  return push(unary_op(OpKind::tanh, a.index, src.rows, src.cols));
}

NodeRef GraphBuilder::leaky_relu(NodeRef a, double negative_slope) {
  const Op& src = at(a, "leaky_relu");
  return push(unary_op(OpKind::leaky_relu, a.index, src.rows, src.cols, negative_slope));
}

NodeRef GraphBuilder::log(NodeRef a) {
  const Op& src = at(a, "log");
  return push(unary_op(OpKind::log, a.index, src.rows, src.cols));
}

NodeRef GraphBuilder::exp(NodeRef a) {
  const Op& src = at(a, "exp");
  return push(unary_op(OpKind::exp, a.index, src.rows, src.cols));
}

NodeRef GraphBuilder::softmax(NodeRef a) {
  const Op& src = at(a, "softmax");
  if (src.cols != 1) throw ShapeError("softmax", "expects a column vector");
  return push(unary_op(OpKind::softmax, a.index, src.rows, src.cols));
}

NodeRef GraphBuilder::softmax_cross_entropy(NodeRef logits, NodeRef target) {
  const Op& z = at(logits, "softmax_cross_entropy");
  const Op& t = at(target, "softmax_cross_entropy");
  if (z.cols != 1 || t.cols != 1 || z.rows != t.rows) {
    throw ShapeError("softmax_cross_entropy", "logits " + shape_string(z.rows, z.cols) +
                                                  " and target " + shape_string(t.rows, t.cols));
  }
  Op op;
  op.kind = OpKind::softmax_cross_entropy;
  op.args = {logits.index, target.index};
  op.rows = 1;
  op.cols = 1;
  return push(op);
}

ComputationGraph GraphBuilder::build(NodeRef output) && {
  const Op& out = at(output, "build");
  if (!is_scalar_shape(out.rows, out.cols)) {
    throw ShapeError("output", "graph output must be 1x1, got " + shape_string(out.rows, out.cols));
  }
  ComputationGraph graph;
  graph.feature_dim_ = features_node_ >= 0 ? ops_[static_cast<std::size_t>(features_node_)].rows : 0;
  graph.label_dim_ = label_node_ >= 0 ? ops_[static_cast<std::size_t>(label_node_)].rows : 0;
  graph.ops_ = std::move(ops_);
  graph.slots_ = std::move(slots_);
  graph.blocks_ = std::move(blocks_);
  graph.parameter_count_ = parameter_count_;
  graph.features_node_ = features_node_;
  graph.label_node_ = label_node_;
  graph.output_ = output.index;
  return graph;
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(OpKind kind, std::array<std::uint32_t, 2> args, std::uint8_t arity,
               std::array<double, 2> attr, Matrix value) {
  Node node;
  node.kind = kind;
  node.args = args;
  node.arity = arity;
  node.attr = attr;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

double Tape::scalar(Var v) const {
  const Matrix& m = nodes_[v.id].value;
  if (m.size() != 1) throw ShapeError("scalar", "node is " + shape_string(m.rows(), m.cols()));
  return m(0, 0);
}

Var Tape::leaf(Matrix value) { return push(OpKind::leaf, {0, 0}, 0, {0.0, 0.0}, std::move(value)); }

Var Tape::add(Var a, Var b) { return apply(OpKind::add, {static_cast<std::int32_t>(a.id), static_cast<std::int32_t>(b.id)}, {}); }
Var Tape::sub(Var a, Var b) { return apply(OpKind::sub, {static_cast<std::int32_t>(a.id), static_cast<std::int32_t>(b.id)}, {}); }
Var Tape::mul(Var a, Var b) { return apply(OpKind::mul, {static_cast<std::int32_t>(a.id), static_cast<std::int32_t>(b.id)}, {}); }
Var Tape::affine(Var a, double scale, double shift) { return apply(OpKind::affine, {static_cast<std::int32_t>(a.id), -1}, {scale, shift}); }
Var Tape::sum(Var a) { return apply(OpKind::sum, {static_cast<std::int32_t>(a.id), -1}, {}); }
Var Tape::broadcast(Var a, Eigen::Index rows, Eigen::Index cols) {
  return apply(OpKind::broadcast, {static_cast<std::int32_t>(a.id), -1},
               {static_cast<double>(rows), static_cast<double>(cols)});
}
Var Tape::matvec(Var w, Var v) { return apply(OpKind::matvec, {static_cast<std::int32_t>(w.id), static_cast<std::int32_t>(v.id)}, {}); }
Var Tape::matvec_t(Var w, Var u) { return apply(OpKind::matvec_t, {static_cast<std::int32_t>(w.id), static_cast<std::int32_t>(u.id)}, {}); }
Var Tape::outer(Var a, Var b) { return apply(OpKind::outer, {static_cast<std::int32_t>(a.id), static_cast<std::int32_t>(b.id)}, {}); }
Var Tape::tanh(Var a) { return apply(OpKind::tanh, {static_cast<std::int32_t>(a.id), -1}, {}); }
Var Tape::leaky_relu(Var a, double negative_slope) { return apply(OpKind::leaky_relu, {static_cast<std::int32_t>(a.id), -1}, {negative_slope, 0.0}); }
Var Tape::log(Var a) { return apply(OpKind::log, {static_cast<std::int32_t>(a.id), -1}, {}); }
Var Tape::exp(Var a) { return apply(OpKind::exp, {static_cast<std::int32_t>(a.id), -1}, {}); }
Var Tape::reciprocal(Var a) { return apply(OpKind::reciprocal, {static_cast<std::int32_t>(a.id), -1}, {}); }
Var Tape::softmax(Var a) { return apply(OpKind::softmax, {static_cast<std::int32_t>(a.id), -1}, {}); }
Var Tape::softmax_cross_entropy(Var logits, Var target) {
  return apply(OpKind::softmax_cross_entropy,
               {static_cast<std::int32_t>(logits.id), static_cast<std::int32_t>(target.id)}, {});
}

Var Tape::apply(OpKind kind, std::array<std::int32_t, 2> args, std::array<double, 2> attr) {
  const auto arg0 = static_cast<std::uint32_t>(args[0]);
  const auto arg1 = args[1] >= 0 ? static_cast<std::uint32_t>(args[1]) : 0u;
  const std::uint8_t arity = args[1] >= 0 ? 2 : 1;
  const Matrix& a = nodes_[arg0].value;
  Matrix out;
  switch (kind) {
    case OpKind::add:
    case OpKind::sub:
    case OpKind::mul: {
      const Matrix& b = nodes_[arg1].value;
      broadcast_shape(kind, a.rows(), a.cols(), b.rows(), b.cols());
      out = elementwise(kind, a, b);
      break;
    }
    case OpKind::affine: out = (attr[0] * a.array() + attr[1]).matrix(); break;
    case OpKind::sum: out = Matrix::Constant(1, 1, a.sum()); break;
    case OpKind::broadcast:
      out = Matrix::Constant(static_cast<Eigen::Index>(attr[0]), static_cast<Eigen::Index>(attr[1]), a(0, 0));
      break;
    case OpKind::matvec: {
      const Matrix& v = nodes_[arg1].value;
      if (v.cols() != 1 || v.rows() != a.cols()) throw ShapeError("matvec", "operand mismatch");
      out = a * v;
      break;
    }
    case OpKind::matvec_t: {
      const Matrix& u = nodes_[arg1].value;
      if (u.cols() != 1 || u.rows() != a.rows()) throw ShapeError("matvec_t", "operand mismatch");
      out = a.transpose() * u;
      break;
    }
    case OpKind::outer: out = a * nodes_[arg1].value.transpose(); break;
    case OpKind::tanh: out = a.array().tanh().matrix(); break;
    case OpKind::leaky_relu: {
      const double slope = attr[0];
      out = a.unaryExpr([slope](double v) { return v >= 0.0 ? v : slope * v; });
      break;
    }
    case OpKind::log: out = a.array().log().matrix(); break;
    case OpKind::exp: out = a.array().exp().matrix(); break;
    case OpKind::reciprocal: out = a.array().inverse().matrix(); break;
    case OpKind::softmax: out = softmax_of(a); break;
    case OpKind::softmax_cross_entropy: {
      const Matrix& t = nodes_[arg1].value;
      if (t.rows() != a.rows() || t.cols() != a.cols()) {
        throw ShapeError("softmax_cross_entropy", "logits and target differ in shape");
      }
      out = Matrix::Constant(1, 1, t.sum() * log_sum_exp(a) - (t.array() * a.array()).sum());
      break;
    }
    case OpKind::leaf: throw std::logic_error("apply() called with leaf");
  }
  return push(kind, {arg0, arg1}, arity, attr, std::move(out));
}

Tape::Bound Tape::record(const ComputationGraph& graph, const Sample& z,
                         std::span<const double> theta) {
  if (!nodes_.empty()) throw std::logic_error("tape already holds an evaluation; call reset()");
  if (z.x.size() != graph.feature_dim_) {
    throw ShapeError("features", "expected " + std::to_string(graph.feature_dim_) + " entries, got " +
                                     std::to_string(z.x.size()));
  }
  if (z.y.size() != graph.label_dim_) {
    throw ShapeError("label", "expected " + std::to_string(graph.label_dim_) + " entries, got " +
                                  std::to_string(z.y.size()));
  }
  if (static_cast<Eigen::Index>(theta.size()) != graph.parameter_count_) {
    throw ShapeError("parameters", "expected " + std::to_string(graph.parameter_count_) +
                                       " entries, got " + std::to_string(theta.size()));
  }

  Bound bound;
  bound.parameters.resize(graph.blocks_.size());
  nodes_.reserve(graph.ops_.size() * 6);
  for (const auto& op : graph.ops_) {
    if (op.kind == OpKind::leaf) {
      const auto& slot = graph.slots_[static_cast<std::size_t>(op.slot)];
      switch (slot.kind) {
        case GraphBuilder::Slot::Kind::features: bound.features = leaf(z.x); break;
        case GraphBuilder::Slot::Kind::label: bound.label = leaf(z.y); break;
        case GraphBuilder::Slot::Kind::parameter: {
          const auto& block = graph.blocks_[static_cast<std::size_t>(slot.block)];
          Eigen::Map<const Matrix> view(theta.data() + block.offset, block.rows, block.cols);
          bound.parameters[static_cast<std::size_t>(slot.block)] = leaf(Matrix(view));
          break;
        }
        case GraphBuilder::Slot::Kind::constant: leaf(slot.value); break;
      }
    } else {
      apply(op.kind, op.args, op.attr);
    }
  }
  bound.output = Var{static_cast<std::uint32_t>(graph.output_)};
  return bound;
}

Var Tape::reduce_to(Var g, Var target) {
  const Matrix& t = nodes_[target.id].value;
  const Matrix& gv = nodes_[g.id].value;
  if (t.size() == 1 && gv.size() != 1) return sum(g);
  return g;
}

void Tape::accumulate(std::vector<std::int64_t>& adjoint, std::uint32_t id, Var contribution) {
  if (adjoint[id] < 0) {
    adjoint[id] = contribution.id;
  } else {
    adjoint[id] = add(Var{static_cast<std::uint32_t>(adjoint[id])}, contribution).id;
  }
}

void Tape::backprop(const Node& node_in, Var self, Var g, std::vector<std::int64_t>& adjoint,
                    const std::vector<char>& needed) {
  // `node_in` may be invalidated by pushes below; copy what is needed first.
  const OpKind kind = node_in.kind;
  const Var a{node_in.args[0]};
  const Var b{node_in.args[1]};
  const std::uint8_t arity = node_in.arity;
  const std::array<double, 2> attr = node_in.attr;
  const bool need_a = arity >= 1 && needed[a.id];
  const bool need_b = arity >= 2 && needed[b.id];

  switch (kind) {
    case OpKind::leaf: return;
    case OpKind::add:
      if (need_a) accumulate(adjoint, a.id, reduce_to(g, a));
      if (need_b) accumulate(adjoint, b.id, reduce_to(g, b));
      return;
    case OpKind::sub:
      if (need_a) accumulate(adjoint, a.id, reduce_to(g, a));
      if (need_b) accumulate(adjoint, b.id, reduce_to(affine(g, -1.0, 0.0), b));
      return;
    case OpKind::mul:
      if (need_a) accumulate(adjoint, a.id, reduce_to(mul(g, b), a));
      if (need_b) accumulate(adjoint, b.id, reduce_to(mul(g, a), b));
      return;
    case OpKind::affine:
      if (need_a) accumulate(adjoint, a.id, affine(g, attr[0], 0.0));
      return;
    case OpKind::sum: {
      if (!need_a) return;
      const Eigen::Index rows = nodes_[a.id].value.rows();
      const Eigen::Index cols = nodes_[a.id].value.cols();
      accumulate(adjoint, a.id, broadcast(g, rows, cols));
      return;
    }
    case OpKind::broadcast:
      if (need_a) accumulate(adjoint, a.id, sum(g));
      return;
    case OpKind::matvec:
      if (need_a) accumulate(adjoint, a.id, outer(g, b));
      if (need_b) accumulate(adjoint, b.id, matvec_t(a, g));
      return;
    case OpKind::matvec_t:
      if (need_a) accumulate(adjoint, a.id, outer(b, g));
      if (need_b) accumulate(adjoint, b.id, matvec(a, g));
      return;
    case OpKind::outer:
      if (need_a) accumulate(adjoint, a.id, matvec(g, b));
      if (need_b) accumulate(adjoint, b.id, matvec_t(g, a));
      return;
    case OpKind::tanh:
      if (need_a) accumulate(adjoint, a.id, mul(g, affine(mul(self, self), -1.0, 1.0)));
      return;
    case OpKind::leaky_relu: {
      if (!need_a) return;
      const double slope = attr[0];
      Matrix mask = nodes_[a.id].value.unaryExpr([slope](double v) { return v >= 0.0 ? 1.0 : slope; });
      accumulate(adjoint, a.id, mul(g, leaf(std::move(mask))));
      return;
    }
    case OpKind::log:
      if (need_a) accumulate(adjoint, a.id, mul(g, reciprocal(a)));
      return;
    case OpKind::exp:
      if (need_a) accumulate(adjoint, a.id, mul(g, self));
      return;
    case OpKind::reciprocal:
      if (need_a) accumulate(adjoint, a.id, mul(g, affine(mul(self, self), -1.0, 0.0)));
      return;
    case OpKind::softmax:
      if (need_a) accumulate(adjoint, a.id, mul(self, sub(g, sum(mul(g, self)))));
      return;
    case OpKind::softmax_cross_entropy: {
      // d/dz [sum(t) lse(z) - t.z] = sum(t) softmax(z) - t. The target is
      // treated as data and receives no gradient.
      if (!need_a) return;
      const Var probs = softmax(a);
      const Var scaled = mul(probs, sum(b));
      accumulate(adjoint, a.id, mul(sub(scaled, b), g));
      return;
    }
  }
}

std::vector<Var> Tape::gradient(Var output, std::span<const Var> wrt) {
  if (nodes_[output.id].value.size() != 1) {
    throw ShapeError("output", "gradient requires a scalar output");
  }
  const std::size_t n = static_cast<std::size_t>(output.id) + 1;
  std::vector<char> needed(n, 0);
  for (const Var v : wrt) {
    if (v.id < n) needed[v.id] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = nodes_[i];
    if (needed[i] || node.arity == 0) continue;
    bool any = needed[node.args[0]] != 0;
    // Only the logits of softmax_cross_entropy carry gradient.
    if (node.arity == 2 && node.kind != OpKind::softmax_cross_entropy) {
      any = any || needed[node.args[1]] != 0;
    }
    needed[i] = any ? 1 : 0;
  }

  std::vector<std::int64_t> adjoint(n, -1);
  std::vector<Var> result(wrt.size());
  if (needed[output.id]) {
    adjoint[output.id] = leaf(Matrix::Ones(1, 1)).id;
    for (std::size_t i = n; i-- > 0;) {
      if (!needed[i] || adjoint[i] < 0) continue;
      const Node node_copy_view = Node{nodes_[i].kind, nodes_[i].args, nodes_[i].arity, nodes_[i].attr, {}};
      backprop(node_copy_view, Var{static_cast<std::uint32_t>(i)},
               Var{static_cast<std::uint32_t>(adjoint[i])}, adjoint, needed);
    }
  }
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    const Var v = wrt[k];
    if (v.id < n && adjoint[v.id] >= 0) {
      result[k] = Var{static_cast<std::uint32_t>(adjoint[v.id])};
    } else {
      const Matrix& shape = nodes_[v.id].value;
      result[k] = leaf(Matrix::Zero(shape.rows(), shape.cols()));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Graph-level operations

double evaluate(const ComputationGraph& graph, const Sample& z, std::span<const double> theta) {
  Tape tape;
  const auto bound = tape.record(graph, z, theta);
  return tape.scalar(bound.output);
}

Vector input_gradient(const ComputationGraph& graph, const Sample& z, std::span<const double> theta) {
  Tape tape;
  const auto bound = tape.record(graph, z, theta);
  if (graph.feature_dim() == 0) return Vector();
  const Var wrt[] = {bound.features};
  const auto grads = tape.gradient(bound.output, wrt);
  return tape.value(grads[0]).col(0);
}

namespace {

void scatter_block_gradients(const Tape& tape, const ComputationGraph& graph,
                             const std::vector<Var>& grads, Vector& out) {
  const auto& blocks = graph.parameter_blocks();
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const Matrix& g = tape.value(grads[k]);
    out.segment(blocks[k].offset, blocks[k].size()) = Eigen::Map<const Vector>(g.data(), g.size());
  }
}

}  // namespace

Vector parameter_gradient(const ComputationGraph& graph, const Sample& z,
                          std::span<const double> theta) {
  Tape tape;
  const auto bound = tape.record(graph, z, theta);
  const auto grads = tape.gradient(bound.output, bound.parameters);
  Vector out = Vector::Zero(graph.parameter_count());
  scatter_block_gradients(tape, graph, grads, out);
  return out;
}

PenalizedLoss parameter_gradient_of_penalized_loss(const ComputationGraph& graph,
                                                   std::span<const Sample> batch,
                                                   std::span<const double> theta,
                                                   double penalty_weight) {
  if (batch.empty()) throw std::invalid_argument("penalized loss: batch must be non-empty");
  if (!(penalty_weight >= 0.0)) {
    throw std::invalid_argument("penalized loss: penalty weight must be >= 0");
  }
  PenalizedLoss result;
  Vector grad_sum = Vector::Zero(graph.parameter_count());
  Vector sample_grad(graph.parameter_count());
  double loss_sum = 0.0;
  double penalty_sum = 0.0;
  Tape tape;
  for (const Sample& z : batch) {
    tape.reset();
    const auto bound = tape.record(graph, z, theta);
    loss_sum += tape.scalar(bound.output);
    Var objective = bound.output;
    if (penalty_weight != 0.0) {
      const Var wrt[] = {bound.features};
      const Var gx = tape.gradient(bound.output, wrt)[0];
      const Var penalty = tape.sum(tape.mul(gx, gx));
      penalty_sum += tape.scalar(penalty);
      objective = tape.add(bound.output, tape.affine(penalty, penalty_weight, 0.0));
    }
    const auto grads = tape.gradient(objective, bound.parameters);
    scatter_block_gradients(tape, graph, grads, sample_grad);
    grad_sum += sample_grad;
  }
  const double count = static_cast<double>(batch.size());
  result.mean_loss = loss_sum / count;
  result.mean_penalty = penalty_sum / count;
  result.value = result.mean_loss + penalty_weight * result.mean_penalty;
  result.gradient = grad_sum / count;
  return result;
}

}  // namespace wdro::ad
