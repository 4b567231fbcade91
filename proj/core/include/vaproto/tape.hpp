#pragma once

#include <cstdint>
#include <vector>

#include "vaproto/numeric.hpp"

namespace vaproto {

using NodeId = std::int32_t;

// Reverse-mode tape over vector-valued nodes (scalars are dim-1 vectors).
// Nodes are appended in evaluation order, so the list is topologically
// sorted by construction and backward() is a single reverse sweep that
// visits each node exactly once. Single-owner, single-threaded.
class Tape {
 public:
  NodeId leaf(Vector value);
  NodeId leaf_matrix(const Matrix& m);  // flattened row-major weights

  NodeId matvec(NodeId w, std::size_t rows, std::size_t cols, NodeId x);
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId relu(NodeId a);
  // keep_mask entries are 0 (dropped) or 1/(1-p) (inverted scaling).
  NodeId dropout(NodeId a, Vector keep_mask);
  NodeId sum(NodeId a);                            // scalar
  NodeId mean_of(const std::vector<NodeId>& xs);   // elementwise mean
  // Per-dimension unbiased sample variance of the inputs; a single input
  // yields the zero vector (and a zero gradient).
  NodeId variance_of(const std::vector<NodeId>& xs);
  // Replaces every entry by the mean of the entries.
  NodeId isotropize(NodeId var);
  NodeId l2_norm(NodeId a);                        // scalar; gradient 0 at 0
  NodeId pack(const std::vector<NodeId>& scalars); // gather scalars into one vector
  // -(||point - mean||^2 + sum(var)): the per-class logit of a query.
  NodeId gauss_point_logit(NodeId point, NodeId mean, NodeId var);
  // Stable log-softmax cross-entropy of a logits vector against a target
  // index; probability clamped at kLogClamp.
  NodeId softmax_xent(NodeId logits, std::size_t target);

  const Vector& value(NodeId id) const;
  // Valid after backward(); zero-initialized for unreached nodes.
  const Vector& grad(NodeId id) const;

  // Seeds d(output)/d(output) = 1 and accumulates gradients into every
  // node. `output` must be scalar. Deterministic: identical tapes produce
  // bit-identical gradient buffers.
  void backward(NodeId output);

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    Leaf,
    MatVec,
    Add,
    Scale,
    Mul,
    Relu,
    Dropout,
    Sum,
    Mean,
    Variance,
    Isotropize,
    L2Norm,
    Pack,
    GaussPointLogit,
    SoftmaxXent,
  };

  struct Node {
    Op op = Op::Leaf;
    std::vector<NodeId> in;
    Vector value;
    Vector aux;                // dropout mask / variance mean / softmax probs
    std::size_t rows = 0;      // MatVec
    std::size_t cols = 0;      // MatVec
    double c = 0.0;            // Scale
    std::size_t target = 0;    // SoftmaxXent
  };

  NodeId push(Node node);
  const Node& node(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<Vector> grads_;
  bool grads_valid_ = false;
};

}  // namespace vaproto
