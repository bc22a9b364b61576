#pragma once

// Tape-based reverse-mode automatic differentiation.
//
// A Graph records nodes in creation order, which is a valid topological
// order because every op's inputs already exist when the op is recorded.
// Backward() walks the tape once in reverse. Nodes that do not depend on any
// parameter are never visited.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "memqa/rng.hpp"
#include "memqa/tensor.hpp"

namespace memqa {

class Graph;

class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Graph* graph() const { return graph_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  // Receives the node's own output and the gradient flowing into it.
  using BackwardFn = std::function<void(Graph&, const Tensor& out, const Tensor& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var Constant(Tensor value);
  // One node per name: asking again for the same name returns the same Var,
  // so a parameter used twice accumulates both contributions.
  Var Parameter(const std::string& name, const Tensor& value);

  // Records an op. `backward` runs only if some input requires a gradient.
  Var Record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id_).value; }
  bool RequiresGrad(Var v) const { return nodes_.at(v.id_).requires_grad; }
  // Gradient buffer of `v`, zero-initialised on first access.
  Tensor& GradBuffer(Var v);
  // Gradient of `v` after Backward(); zeros if nothing reached it.
  Tensor Grad(Var v) const;

  // Seeds d(loss)/d(loss) = 1 and propagates. Throws ShapeError if `loss`
  // is not a single-element tensor.
  void Backward(Var loss);

  // Gradients for every parameter in `params`; parameters that were not
  // used, or that the loss does not depend on, get zeros.
  ParamStore ParamGrads(const ParamStore& params) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };
  // A deque keeps node references valid while later ops are recorded.
  std::deque<Node> nodes_;
  std::map<std::string, std::size_t> params_;
};

// Forward ops. All shapes are checked; a mismatch throws ShapeError naming
// the offending shapes.
namespace ops {

// x: [..., in], weight: [in, out], bias: [out] -> [..., out]
Var Affine(Var x, Var weight, Var bias);
Var Relu(Var x);
// Softmax over the last axis.
Var Softmax(Var x);
// Inverted dropout. Identity (same Var) when !train or rate == 0.
Var Dropout(Var x, double rate, bool train, RngStream& rng);
// x: [B, L, h], mask: B*L flags (true = real token) -> [B, h]. Masked rows
// never contribute; a sequence with no real token yields zeros.
Var MaxOverTime(Var x, std::span<const std::uint8_t> mask);
Var MeanOverTime(Var x, std::span<const std::uint8_t> mask);
// Valid 1-D convolution. x: [B, W, c], kernel: [k, c, n], bias: [n]
// -> [B, W-k+1, n].
Var Conv1d(Var x, Var kernel, Var bias);
// Concatenation along the last axis; leading dimensions must agree.
Var Concat(std::span<const Var> xs);
Var Concat(std::initializer_list<Var> xs);
Var Hadamard(Var a, Var b);
Var AbsDiff(Var a, Var b);
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Div(Var a, Var b);
Var Scale(Var x, double c);
Var AddScalar(Var x, double c);
// log(max(x, floor)); gradient is zero where the floor is active.
Var Log(Var x, double floor = 0.0);
Var Exp(Var x);
// Sum of all elements -> [1].
Var Sum(Var x);
Var Mean(Var x);
// sum_i weights[i] * x[i] -> [1].
Var WeightedSum(Var x, std::span<const double> weights);
// x: [B, C] -> [B] with out[b] = x[b, index[b]].
Var Pick(Var x, std::span<const std::size_t> index);
// Row-wise cosine similarity of [B, d] inputs -> [B]. Rows where either
// input has zero norm score 0 and pass no gradient.
Var Cosine(Var a, Var b);
// table: [V, c], ids -> [ids.size(), c].
Var GatherRows(Var table, std::span<const std::int32_t> ids);
Var Reshape(Var x, Shape shape);

}  // namespace ops
}  // namespace memqa
