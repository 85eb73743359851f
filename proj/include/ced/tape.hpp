#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ced/tensor.hpp"

namespace ced::nn {

// A named trainable (or frozen) tensor with a persistent gradient slot.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter(std::string n, Tensor init, bool train = true)
      : name(std::move(n)),
        value(std::move(init)),
        grad(Tensor::zeros(value.shape())),
        trainable(train) {}

  void zero_grad() { grad.fill(0.0); }
};

// Owns parameters by name; iteration order is the sorted name order, which
// keeps optimizer updates and checkpoints deterministic.
class ParamStore {
 public:
  Parameter& create(const std::string& name, Tensor init, bool trainable = true);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::vector<Parameter*> trainable();
  void zero_grads();
  std::size_t size() const { return params_.size(); }

 private:
  std::map<std::string, std::unique_ptr<Parameter>> params_;
};

class Tape;

// Cheap handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t index() const { return idx_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, std::uint32_t i) : tape_(t), idx_(i) {}
  Tape* tape_ = nullptr;
  std::uint32_t idx_ = 0;
};

// Records a forward computation and replays it in reverse for gradient
// accumulation. Nodes are appended in topological order by construction, so
// backward is one reverse scan. Using the same Var in several places
// accumulates the branch gradients additively. Every op checks shapes and
// rejects non-finite results.
class Tape {
 public:
  Var leaf(Tensor v);
  Var scalar(double v) { return leaf(Tensor::scalar(v)); }
  Var param(Parameter& p);

  // [m,k]x[k,n] -> [m,n]; [m,k]x[k] -> [m]
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var hinge(Var a);  // max(0,x); subgradient at 0 is 0
  Var log(Var a);
  Var log_sigmoid(Var a);  // log(sigmoid(x)) evaluated stably
  Var one_minus(Var a);    // 1 - x
  Var neg(Var a);
  Var scale(Var a, double c);
  Var concat(Var a, Var b);
  Var concat(std::span<const Var> xs);  // rank-1 inputs stacked in order
  Var max_all(Var a);                   // max over all entries -> scalar
  Var mean(Var a);                      // mean over all entries -> scalar
  Var dot(Var a, Var b);                // vector dot -> scalar

  // Gather columns of an embedding table: table [V,d], ids in [0,V) -> [d,n].
  Var embed(Var table, std::span<const int> ids);
  // Fused text-convolution unit: m [d,n], g [d,h], b [1] ->
  // max_i relu(<g, m[:, i:i+h-1]>_F + b) as a scalar. h <= n required.
  Var conv_relu_max(Var m, Var g, Var b);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;

  // Seeds d(root)=1 and sweeps the tape in reverse; gradients reaching
  // Parameter leaves are added into Parameter::grad.
  void backward(Var root);

  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kLeaf, kParam, kMatMul, kAdd, kSub, kMul, kSigmoid, kTanh, kRelu, kHinge,
    kLog, kLogSigmoid, kOneMinus, kNeg, kScale, kConcat, kMaxAll, kMean, kDot,
    kEmbed, kConvReluMax,
  };

  struct Node {
    Tensor value;
    Tensor grad;
    Op op = Op::kLeaf;
    std::int32_t a = -1;
    std::int32_t b = -1;
    std::int32_t c = -1;              // third parent (conv bias)
    std::vector<std::uint32_t> many;  // n-ary concat parents
    std::vector<std::int32_t> aux;    // embed ids / argmax bookkeeping
    double factor = 0.0;              // scale constant
    Parameter* param = nullptr;
  };

  Var push(Node n, const char* op_name);
  Node& at(Var v);
  const Node& at(Var v) const;
  void check_mine(Var v, const char* op_name) const;
  void backward_node(std::size_t i);

  std::vector<Node> nodes_;
};

}  // namespace ced::nn
