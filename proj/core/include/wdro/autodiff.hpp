#pragma once

// Reverse-mode differentiation over small matrix-valued computation graphs.
//
// A ComputationGraph is an immutable program (built once with GraphBuilder)
// with three kinds of input slots: the feature vector x, the label vector y
// and named parameter blocks that together form the flat parameter vector
// theta. Each evaluation instantiates the program on a private Tape.
//
// Backward sweeps are themselves recorded on the tape as ordinary nodes, so
// a gradient can be differentiated again. This is how the gradient-norm
// penalty ||grad_x h||^2 is differentiated with respect to theta.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wdro/sample.hpp"

namespace wdro::ad {

/// Raised when an input does not match the shape declared by a graph slot.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(std::string slot, const std::string& what);
  const std::string& slot() const noexcept { return slot_; }

 private:
  std::string slot_;
};

enum class OpKind : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  affine,      // scale * a + shift
  sum,         // all entries -> 1x1
  broadcast,   // 1x1 -> rows x cols
  matvec,      // W v
  matvec_t,    // W^T u
  outer,       // a b^T
  tanh,
  leaky_relu,  // attr = negative slope; derivative at 0 is 1
  log,
  exp,
  reciprocal,
  softmax,
  softmax_cross_entropy,  // (logits, target) -> sum(target) * lse(logits) - target . logits
};

const char* op_name(OpKind kind);

/// Handle to a node in a GraphBuilder program.
struct NodeRef {
  std::int32_t index = -1;
};

struct ParameterBlock {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index offset = 0;  // into the flat parameter vector (column-major block)
  Eigen::Index size() const { return rows * cols; }
};

class ComputationGraph;

class GraphBuilder {
 public:
  NodeRef features(Eigen::Index dim);
  NodeRef label(Eigen::Index dim);
  NodeRef parameter(std::string name, Eigen::Index rows, Eigen::Index cols);
  NodeRef constant(Matrix value);

  NodeRef add(NodeRef a, NodeRef b);
  NodeRef sub(NodeRef a, NodeRef b);
  NodeRef mul(NodeRef a, NodeRef b);
  NodeRef affine(NodeRef a, double scale, double shift);
  NodeRef sum(NodeRef a);
  NodeRef matvec(NodeRef w, NodeRef v);
  NodeRef tanh(NodeRef a);
  NodeRef leaky_relu(NodeRef a, double negative_slope);
  NodeRef log(NodeRef a);
  NodeRef exp(NodeRef a);
  NodeRef softmax(NodeRef a);
  NodeRef softmax_cross_entropy(NodeRef logits, NodeRef target);

  ComputationGraph build(NodeRef output) &&;

 // Program representation, shared with ComputationGraph and Tape.
  struct Op {
    OpKind kind = OpKind::leaf;
    std::array<std::int32_t, 2> args{-1, -1};
    std::array<double, 2> attr{0.0, 0.0};
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    int slot = -1;  // leaf: index into slots
  };
  struct Slot {
    enum class Kind { features, label, parameter, constant } kind;
    std::string name;
    int block = -1;  // parameter block index
    Matrix value;    // constants only
  };

 private:
  friend class ComputationGraph;
  NodeRef push(Op op);
  NodeRef binary(OpKind kind, NodeRef a, NodeRef b);
  const Op& at(NodeRef ref, const char* context) const;

  std::vector<Op> ops_;
  std::vector<Slot> slots_;
  std::vector<ParameterBlock> blocks_;
  Eigen::Index parameter_count_ = 0;
  int features_node_ = -1;
  int label_node_ = -1;
};

/// Immutable scalar-output program. Safe to share across threads; every
/// evaluation uses its own Tape.
class ComputationGraph {
 public:
  Eigen::Index feature_dim() const { return feature_dim_; }
  Eigen::Index label_dim() const { return label_dim_; }
  Eigen::Index parameter_count() const { return parameter_count_; }
  const std::vector<ParameterBlock>& parameter_blocks() const { return blocks_; }
  std::size_t node_count() const { return ops_.size(); }

 private:
  friend class GraphBuilder;
  friend class Tape;
  std::vector<GraphBuilder::Op> ops_;
  std::vector<GraphBuilder::Slot> slots_;
  std::vector<ParameterBlock> blocks_;
  Eigen::Index parameter_count_ = 0;
  Eigen::Index feature_dim_ = 0;
  Eigen::Index label_dim_ = 0;
  int features_node_ = -1;
  int label_node_ = -1;
  int output_ = -1;
};

/// Handle to a node recorded on a Tape.
struct Var {
  std::uint32_t id = 0;
};

/// Forward values and adjoints for exactly one evaluation. Call reset()
/// before recording another evaluation on the same tape.
class Tape {
 public:
  struct Bound {
    Var features;
    Var label;
    std::vector<Var> parameters;  // one per parameter block
    Var output;
  };

  /// Records `graph` with the given inputs. Throws ShapeError naming the
  /// offending slot when an input has the wrong size, std::logic_error if
  /// the tape already holds an evaluation.
  Bound record(const ComputationGraph& graph, const Sample& z, std::span<const double> theta);

  Var leaf(Matrix value);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var affine(Var a, double scale, double shift);
  Var sum(Var a);
  Var broadcast(Var a, Eigen::Index rows, Eigen::Index cols);
  Var matvec(Var w, Var v);
  Var matvec_t(Var w, Var u);
  Var outer(Var a, Var b);
  Var tanh(Var a);
  Var leaky_relu(Var a, double negative_slope);
  Var log(Var a);
  Var exp(Var a);
  Var reciprocal(Var a);
  Var softmax(Var a);
  Var softmax_cross_entropy(Var logits, Var target);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const;

  /// Gradient of the scalar node `output` with respect to each node in
  /// `wrt`. The backward sweep is appended to the tape, so the returned
  /// nodes can themselves be differentiated.
  std::vector<Var> gradient(Var output, std::span<const Var> wrt);

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  void reset() { nodes_.clear(); }

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    std::array<std::uint32_t, 2> args{0, 0};
    std::uint8_t arity = 0;
    std::array<double, 2> attr{0.0, 0.0};
    Matrix value;
  };

  Var push(OpKind kind, std::array<std::uint32_t, 2> args, std::uint8_t arity,
           std::array<double, 2> attr, Matrix value);
  Var apply(OpKind kind, std::array<std::int32_t, 2> args, std::array<double, 2> attr);
  Var reduce_to(Var g, Var target);
  void backprop(const Node& node, Var node_var, Var g, std::vector<std::int64_t>& adjoint,
                const std::vector<char>& needed);
  void accumulate(std::vector<std::int64_t>& adjoint, std::uint32_t id, Var contribution);

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Graph-level operations.

/// h_theta(z).
double evaluate(const ComputationGraph& graph, const Sample& z, std::span<const double> theta);

/// grad_x h_theta(x, y). The label slot never receives a gradient.
Vector input_gradient(const ComputationGraph& graph, const Sample& z, std::span<const double> theta);

/// grad_theta h_theta(z) as a flat vector in parameter-block order.
Vector parameter_gradient(const ComputationGraph& graph, const Sample& z,
                          std::span<const double> theta);

struct PenalizedLoss {
  double value = 0.0;      // mean loss + penalty_weight * mean ||grad_x h||_2^2
  double mean_loss = 0.0;
  double mean_penalty = 0.0;  // mean ||grad_x h||_2^2 (before weighting)
  Vector gradient;         // d value / d theta
};

/// Value and theta-gradient of
///   B^-1 sum_b h(z_b) + penalty_weight * B^-1 sum_b ||grad_x h(z_b)||_2^2.
/// Batch reductions run left to right. When penalty_weight == 0 the penalty
/// path is skipped entirely, so the result equals the plain mean-loss
/// gradient bit for bit.
PenalizedLoss parameter_gradient_of_penalized_loss(const ComputationGraph& graph,
                                                   std::span<const Sample> batch,
                                                   std::span<const double> theta,
                                                   double penalty_weight);

// ---------------------------------------------------------------------------
// Finite-difference verification.

struct FiniteDifferenceEntry {
  Eigen::Index coordinate = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;
};

struct FiniteDifferenceReport {
  static constexpr double kRelativeFloor = 1e-8;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  std::vector<FiniteDifferenceEntry> entries;  // sorted by descending rel_error
};

/// Central differences of `f` at `point`, compared against `analytic`.
FiniteDifferenceReport finite_difference_check(const std::function<double(const Vector&)>& f,
                                               const Vector& analytic, const Vector& point,
                                               double step);

enum class DifferentiationTarget { features, parameters };

/// Checks input_gradient or parameter_gradient of `graph` at (z, theta).
FiniteDifferenceReport finite_difference_check(const ComputationGraph& graph, const Sample& z,
                                               std::span<const double> theta,
                                               DifferentiationTarget target, double step);

/// Checks the theta-gradient of the penalized batch objective against central
/// differences of its scalar value.
FiniteDifferenceReport finite_difference_check_penalized(const ComputationGraph& graph,
                                                         std::span<const Sample> batch,
                                                         std::span<const double> theta,
                                                         double penalty_weight, double step);

}  // namespace wdro::ad
