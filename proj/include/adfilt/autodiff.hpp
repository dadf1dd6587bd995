#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "adfilt/tensor.hpp"

namespace adfilt::ad {

class Graph;

/// One node of the define-by-run computation graph.
struct Node {
  Tensor value;
  Tensor grad;  // allocated during backward; same shape as value
  bool requires_grad = false;
  std::vector<Node*> parents;
  // Propagates this node's grad into its parents' grads. Null for leaves
  // and for nodes whose subtree holds no trainable parameter.
  std::function<void(Node&)> backprop;
  const char* op = "leaf";
  std::size_t index = 0;  // creation order; parents always precede children
};

/// Lightweight handle into a Graph. Copyable; the Graph owns the node.
class Var {
public:
  Var() = default;
  Var(Graph* g, Node* n) : g_(g), n_(n) {}
  const Tensor& value() const { return n_->value; }
  const Tensor& grad() const;
  bool requires_grad() const { return n_->requires_grad; }
  Graph* graph() const { return g_; }
  Node* node() const { return n_; }
  const Tensor::Shape& shape() const { return n_->value.shape(); }

private:
  Graph* g_ = nullptr;
  Node* n_ = nullptr;
};

/// Owns the nodes of one forward pass. Rebuilt for every batch; confined to
/// one task at a time. Node values are immutable once created.
class Graph {
public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor v) { return make(std::move(v), false, "const"); }
  Var param(Tensor v) { return make(std::move(v), true, "param"); }

  /// Reverse pass from a scalar root. Resets all gradient accumulators,
  /// then fills node->grad for every node on a path from a parameter to
  /// the root. Throws ContractError if root is not scalar.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

  // Used by the op implementations.
  Var make(Tensor value, bool requires_grad, const char* op,
           std::vector<Node*> parents = {}, std::function<void(Node&)> backprop = nullptr);

private:
  std::deque<Node> nodes_;  // deque: stable addresses as the graph grows
};

// ---- forward ops ------------------------------------------------------
// Shapes follow standard definitions; every op validates operands and
// checks its output for NaN/Inf (NumericError) so bad values never
// propagate silently.

/// matmul supports (m,k)x(k,n), (m,k)x(B,k,n) and (B,m,k)x(k,n).
Var matmul(Var a, Var b);

/// x: (N,Cin,H,W), k: (Cout,Cin/groups,KH,KW); symmetric zero padding.
Var conv2d(Var x, Var k, int stride = 1, int groups = 1, int pad_h = 0, int pad_w = 0);

Var add(Var a, Var b);  // equal shapes, or b broadcast over leading axes of a
Var sub(Var a, Var b);  // equal shapes
Var mul(Var a, Var b);  // elementwise, equal shapes
Var scale(Var a, double s);
Var shift(Var a, double c);  // elementwise a + c
Var relu(Var a);
Var elu(Var a);     // alpha = 1
Var square(Var a);
Var logarithm(Var a);  // DomainError on non-positive input
Var mean(Var a);       // scalar
Var sum(Var a);        // scalar
Var mean(Var a, std::size_t axis);
Var sum(Var a, std::size_t axis);
Var flatten_batch(Var a);  // (N,...) -> (N,prod)
Var reshape(Var a, Tensor::Shape shape);
/// Non-overlapping average pooling over the last two axes of (N,C,H,W);
/// remainders are dropped.
Var avg_pool(Var x, std::size_t window_h, std::size_t window_w);
/// logits: (B,K) or (K); labels.size() == B (1 for the vector form).
/// Returns the scalar mean cross-entropy over the batch.
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);
Var mse(Var a, Var b);  // scalar mean of squared elementwise differences

// ---- non-graph helpers -------------------------------------------------

/// Row-wise softmax of a (B,K) or (K) tensor (numerically stable).
Tensor softmax(const Tensor& logits);

}  // namespace adfilt::ad
