#include "ced/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace ced::nn {

Parameter& ParamStore::create(const std::string& name, Tensor init, bool trainable) {
  auto [it, inserted] = params_.emplace(name, nullptr);
  if (!inserted) throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
  it->second = std::make_unique<Parameter>(name, std::move(init), trainable);
  return *it->second;
}

Parameter& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
  return *it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
  return *it->second;
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& [k, v] : params_) out.push_back(v.get());
  return out;
}

std::vector<const Parameter*> ParamStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& [k, v] : params_) out.push_back(v.get());
  return out;
}

std::vector<Parameter*> ParamStore::trainable() {
  std::vector<Parameter*> out;
  for (auto& [k, v] : params_)
    if (v->trainable) out.push_back(v.get());
  return out;
}

void ParamStore::zero_grads() {
  for (auto& [k, v] : params_) v->zero_grad();
}

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("Var: value() on empty handle");
  return tape_->value(*this);
}

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape_str() +
                              " and " + b.shape_str());
}

double stable_log_sigmoid(double x) {
  // log(1/(1+exp(-x))) without overflow on either tail
  if (x < 0.0) return x - std::log1p(std::exp(x));
  return -std::log1p(std::exp(-x));
}

double sigmoid_value(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Var Tape::push(Node n, const char* op_name) {
  if (!n.value.all_finite())
    throw std::runtime_error(std::string(op_name) + ": non-finite result");
  n.grad = Tensor::zeros(n.value.shape());
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tape::Node& Tape::at(Var v) { return nodes_[v.idx_]; }
const Tape::Node& Tape::at(Var v) const { return nodes_[v.idx_]; }

void Tape::check_mine(Var v, const char* op_name) const {
  if (v.tape_ != this || v.idx_ >= nodes_.size())
    throw std::logic_error(std::string(op_name) + ": Var does not belong to this tape");
}

const Tensor& Tape::value(Var v) const {
  check_mine(v, "value");
  return at(v).value;
}

const Tensor& Tape::grad(Var v) const {
  check_mine(v, "grad");
  return at(v).grad;
}

void Tape::clear() { nodes_.clear(); }

Var Tape::leaf(Tensor v) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(v);
  return push(std::move(n), "leaf");
}

Var Tape::param(Parameter& p) {
  Node n;
  n.op = Op::kParam;
  n.value = p.value;
  n.param = &p;
  return push(std::move(n), "param");
}

Var Tape::matmul(Var a, Var b) {
  check_mine(a, "matmul");
  check_mine(b, "matmul");
  const Tensor& ta = at(a).value;
  const Tensor& tb = at(b).value;
  if (ta.ndim() != 2) shape_error("matmul", ta, tb);
  const std::size_t m = ta.rows(), k = ta.cols();
  Node n;
  n.op = Op::kMatMul;
  n.a = static_cast<std::int32_t>(a.idx_);
  n.b = static_cast<std::int32_t>(b.idx_);
  if (tb.ndim() == 1) {
    if (tb.numel() != k) shape_error("matmul", ta, tb);
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      const double* row = ta.data() + i * k;
      for (std::size_t j = 0; j < k; ++j) acc += row[j] * tb[j];
      out[i] = acc;
    }
    n.value = std::move(out);
  } else if (tb.ndim() == 2) {
    if (tb.rows() != k) shape_error("matmul", ta, tb);
    const std::size_t c = tb.cols();
    Tensor out({m, c});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        double acc = 0.0;
        for (std::size_t l = 0; l < k; ++l) acc += ta.at2(i, l) * tb.at2(l, j);
        out.at2(i, j) = acc;
      }
    n.value = std::move(out);
  } else {
    shape_error("matmul", ta, tb);
  }
  return push(std::move(n), "matmul");
}

Var Tape::add(Var a, Var b) {
  check_mine(a, "add");
  check_mine(b, "add");
  const Tensor& ta = at(a).value;
  const Tensor& tb = at(b).value;
  if (!ta.same_shape(tb)) shape_error("add", ta, tb);
  Node n;
  n.op = Op::kAdd;
  n.a = static_cast<std::int32_t>(a.idx_);
  n.b = static_cast<std::int32_t>(b.idx_);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = ta[i] + tb[i];
  n.value = std::move(out);
  return push(std::move(n), "add");
}

Var Tape::sub(Var a, Var b) {
  check_mine(a, "sub");
  check_mine(b, "sub");
  const Tensor& ta = at(a).value;
  const Tensor& tb = at(b).value;
  if (!ta.same_shape(tb)) shape_error("sub", ta, tb);
  Node n;
  n.op = Op::kSub;
  n.a = static_cast<std::int32_t>(a.idx_);
  n.b = static_cast<std::int32_t>(b.idx_);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = ta[i] - tb[i];
  n.value = std::move(out);
  return push(std::move(n), "sub");
}

Var Tape::mul(Var a, Var b) {
  check_mine(a, "mul");
  check_mine(b, "mul");
  const Tensor& ta = at(a).value;
  const Tensor& tb = at(b).value;
  if (!ta.same_shape(tb)) shape_error("mul", ta, tb);
  Node n;
  n.op = Op::kMul;
  n.a = static_cast<std::int32_t>(a.idx_);
  n.b = static_cast<std::int32_t>(b.idx_);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = ta[i] * tb[i];
  n.value = std::move(out);
  return push(std::move(n), "mul");
}

Var Tape::sigmoid(Var a) {
  check_mine(a, "sigmoid");
  const Tensor& ta = at(a).value;
  Node n;
  n.op = Op::kSigmoid;
  n.a = static_cast<std::int32_t>(a.idx_);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = sigmoid_value(ta[i]);
  n.value = std::move(out);
  return push(std::move(n), "sigmoid");
}

Var Tape::tanh(Var a) {
  check_mine(a, "tanh");
  const Tensor& ta = at(a).value;
  Node n;
  n.op = Op::kTanh;
  n.a = static_cast<std::int32_t>(a.idx_);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = std::tanh(ta[i]);
  n.value = std::move(out);
  return push(std::move(n), "tanh");
}

Var Tape::relu(Var a) {
  check_mine(a, "relu");
  const Tensor& ta = at(a).value;
  Node n;
  n.op = Op::kRelu;
  n.a = static_cast<std::int32_t>(a.idx_);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = ta[i] > 0.0 ? ta[i] : 0.0;
  n.value = std::move(out);
  return push(std::move(n), "relu");
}

Var Tape::hinge(Var a) {
  check_mine(a, "hinge");
  const Tensor& ta = at(a).value;
  Node n;
  n.op = Op::kHinge;
  n.a = static_cast<std::int32_t>(a.idx_);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = ta[i] > 0.0 ? ta[i] : 0.0;
  n.value = std::move(out);
  return push(std::move(n), "hinge");
}

Var Tape::log(Var a) {
  check_mine(a, "log");
  const Tensor& ta = at(a).value;
  Node n;
  n.op = Op::kLog;
  n.a = static_cast<std::int32_t>(a.idx_);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = std::log(ta[i]);
  n.value = std::move(out);
  return push(std::move(n), "log");
}

Var Tape::log_sigmoid(Var a) {
  check_mine(a, "log_sigmoid");
  const Tensor& ta = at(a).value;
  Node n;
  n.op = Op::kLogSigmoid;
  n.a = static_cast<std::int32_t>(a.idx_);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = stable_log_sigmoid(ta[i]);
  n.value = std::move(out);
  return push(std::move(n), "log_sigmoid");
}

Var Tape::one_minus(Var a) {
  check_mine(a, "one_minus");
  const Tensor& ta = at(a).value;
  Node n;
  n.op = Op::kOneMinus;
  n.a = static_cast<std::int32_t>(a.idx_);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = 1.0 - ta[i];
  n.value = std::move(out);
  return push(std::move(n), "one_minus");
}

Var Tape::neg(Var a) {
  check_mine(a, "neg");
  const Tensor& ta = at(a).value;
  Node n;
  n.op = Op::kNeg;
  n.a = static_cast<std::int32_t>(a.idx_);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = -ta[i];
  n.value = std::move(out);
  return push(std::move(n), "neg");
}

Var Tape::scale(Var a, double c) {
  check_mine(a, "scale");
  const Tensor& ta = at(a).value;
  Node n;
  n.op = Op::kScale;
  n.a = static_cast<std::int32_t>(a.idx_);
  n.factor = c;
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = c * ta[i];
  n.value = std::move(out);
  return push(std::move(n), "scale");
}

Var Tape::concat(Var a, Var b) {
  const Var xs[2] = {a, b};
  return concat(std::span<const Var>(xs, 2));
}

Var Tape::concat(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  std::size_t total = 0;
  for (Var x : xs) {
    check_mine(x, "concat");
    const Tensor& t = at(x).value;
    if (t.ndim() != 1)
      throw std::invalid_argument("concat: rank-1 inputs required, got " + t.shape_str());
    total += t.numel();
  }
  Node n;
  n.op = Op::kConcat;
  n.many.reserve(xs.size());
  Tensor out({total});
  std::size_t off = 0;
  for (Var x : xs) {
    const Tensor& t = at(x).value;
    for (std::size_t i = 0; i < t.numel(); ++i) out[off + i] = t[i];
    off += t.numel();
    n.many.push_back(x.idx_);
  }
  n.value = std::move(out);
  return push(std::move(n), "concat");
}

Var Tape::max_all(Var a) {
  check_mine(a, "max_all");
  const Tensor& ta = at(a).value;
  Node n;
  n.op = Op::kMaxAll;
  n.a = static_cast<std::int32_t>(a.idx_);
  std::size_t best = 0;
  for (std::size_t i = 1; i < ta.numel(); ++i)
    if (ta[i] > ta[best]) best = i;
  n.aux.push_back(static_cast<std::int32_t>(best));
  n.value = Tensor::scalar(ta[best]);
  return push(std::move(n), "max_all");
}

Var Tape::mean(Var a) {
  check_mine(a, "mean");
  const Tensor& ta = at(a).value;
  Node n;
  n.op = Op::kMean;
  n.a = static_cast<std::int32_t>(a.idx_);
  double acc = 0.0;
  for (std::size_t i = 0; i < ta.numel(); ++i) acc += ta[i];
  n.value = Tensor::scalar(acc / static_cast<double>(ta.numel()));
  return push(std::move(n), "mean");
}

Var Tape::dot(Var a, Var b) {
  check_mine(a, "dot");
  check_mine(b, "dot");
  const Tensor& ta = at(a).value;
  const Tensor& tb = at(b).value;
  if (ta.ndim() != 1 || tb.ndim() != 1 || ta.numel() != tb.numel()) shape_error("dot", ta, tb);
  Node n;
  n.op = Op::kDot;
  n.a = static_cast<std::int32_t>(a.idx_);
  n.b = static_cast<std::int32_t>(b.idx_);
  double acc = 0.0;
  for (std::size_t i = 0; i < ta.numel(); ++i) acc += ta[i] * tb[i];
  n.value = Tensor::scalar(acc);
  return push(std::move(n), "dot");
}

Var Tape::embed(Var table, std::span<const int> ids) {
  check_mine(table, "embed");
  const Tensor& tt = at(table).value;
  if (tt.ndim() != 2) throw std::invalid_argument("embed: table must be rank 2");
  if (ids.empty()) throw std::invalid_argument("embed: empty id list");
  const std::size_t v = tt.rows(), d = tt.cols(), len = ids.size();
  Node n;
  n.op = Op::kEmbed;
  n.a = static_cast<std::int32_t>(table.idx_);
  n.aux.assign(ids.begin(), ids.end());
  Tensor out({d, len});
  for (std::size_t j = 0; j < len; ++j) {
    const int id = ids[j];
    if (id < 0 || static_cast<std::size_t>(id) >= v)
      throw std::invalid_argument("embed: token id " + std::to_string(id) + " out of range [0," +
                                  std::to_string(v) + ")");
    for (std::size_t r = 0; r < d; ++r) out.at2(r, j) = tt.at2(static_cast<std::size_t>(id), r);
  }
  n.value = std::move(out);
  return push(std::move(n), "embed");
}

Var Tape::conv_relu_max(Var m, Var g, Var b) {
  check_mine(m, "conv_relu_max");
  check_mine(g, "conv_relu_max");
  check_mine(b, "conv_relu_max");
  const Tensor& tm = at(m).value;
  const Tensor& tg = at(g).value;
  const Tensor& tb = at(b).value;
  if (tm.ndim() != 2 || tg.ndim() != 2 || tm.rows() != tg.rows())
    shape_error("conv_relu_max", tm, tg);
  if (tb.numel() != 1) throw std::invalid_argument("conv_relu_max: bias must be a scalar");
  const std::size_t d = tm.rows(), len = tm.cols(), h = tg.cols();
  if (h > len)
    throw std::invalid_argument("conv_relu_max: window width " + std::to_string(h) +
                                " exceeds sequence length " + std::to_string(len));
  Node n;
  n.op = Op::kConvReluMax;
  n.a = static_cast<std::int32_t>(m.idx_);
  n.b = static_cast<std::int32_t>(g.idx_);
  n.c = static_cast<std::int32_t>(b.idx_);
  double best = 0.0;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i + h <= len; ++i) {
    double acc = tb[0];
    for (std::size_t r = 0; r < d; ++r) {
      const double* mrow = tm.data() + r * len + i;
      const double* grow = tg.data() + r * h;
      for (std::size_t c = 0; c < h; ++c) acc += grow[c] * mrow[c];
    }
    if (i == 0 || acc > best) {
      best = acc;
      best_i = i;
    }
  }
  n.aux.push_back(static_cast<std::int32_t>(best_i));
  n.value = Tensor::scalar(best > 0.0 ? best : 0.0);
  return push(std::move(n), "conv_relu_max");
}

void Tape::backward(Var root) {
  check_mine(root, "backward");
  if (at(root).value.numel() != 1)
    throw std::invalid_argument("backward: root must be a scalar");
  at(root).grad[0] = 1.0;
  for (std::size_t i = root.idx_ + 1; i-- > 0;) backward_node(i);
  for (Node& n : nodes_)
    if (n.op == Op::kParam && n.param != nullptr) {
      Tensor& pg = n.param->grad;
      for (std::size_t i = 0; i < pg.numel(); ++i) pg[i] += n.grad[i];
    }
}

void Tape::backward_node(std::size_t i) {
  Node& n = nodes_[i];
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::kLeaf:
    case Op::kParam:
      return;
    case Op::kMatMul: {
      Node& na = nodes_[n.a];
      Node& nb = nodes_[n.b];
      const std::size_t m = na.value.rows(), k = na.value.cols();
      if (nb.value.ndim() == 1) {
        for (std::size_t r = 0; r < m; ++r) {
          const double gr = g[r];
          if (gr == 0.0) continue;
          double* garow = na.grad.data() + r * k;
          const double* arow = na.value.data() + r * k;
          for (std::size_t j = 0; j < k; ++j) {
            garow[j] += gr * nb.value[j];
            nb.grad[j] += gr * arow[j];
          }
        }
      } else {
        const std::size_t c = nb.value.cols();
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            const double gij = g.at2(r, j);
            if (gij == 0.0) continue;
            for (std::size_t l = 0; l < k; ++l) {
              na.grad.at2(r, l) += gij * nb.value.at2(l, j);
              nb.grad.at2(l, j) += gij * na.value.at2(r, l);
            }
          }
      }
      return;
    }
    case Op::kAdd: {
      Node& na = nodes_[n.a];
      Node& nb = nodes_[n.b];
      for (std::size_t j = 0; j < g.numel(); ++j) {
        na.grad[j] += g[j];
        nb.grad[j] += g[j];
      }
      return;
    }
    case Op::kSub: {
      Node& na = nodes_[n.a];
      Node& nb = nodes_[n.b];
      for (std::size_t j = 0; j < g.numel(); ++j) {
        na.grad[j] += g[j];
        nb.grad[j] -= g[j];
      }
      return;
    }
    case Op::kMul: {
      Node& na = nodes_[n.a];
      Node& nb = nodes_[n.b];
      for (std::size_t j = 0; j < g.numel(); ++j) {
        na.grad[j] += g[j] * nb.value[j];
        nb.grad[j] += g[j] * na.value[j];
      }
      return;
    }
    case Op::kSigmoid: {
      Node& na = nodes_[n.a];
      for (std::size_t j = 0; j < g.numel(); ++j) {
        const double s = n.value[j];
        na.grad[j] += g[j] * s * (1.0 - s);
      }
      return;
    }
    case Op::kTanh: {
      Node& na = nodes_[n.a];
      for (std::size_t j = 0; j < g.numel(); ++j) {
        const double t = n.value[j];
        na.grad[j] += g[j] * (1.0 - t * t);
      }
      return;
    }
    case Op::kRelu:
    case Op::kHinge: {
      Node& na = nodes_[n.a];
      for (std::size_t j = 0; j < g.numel(); ++j)
        if (na.value[j] > 0.0) na.grad[j] += g[j];
      return;
    }
    case Op::kLog: {
      Node& na = nodes_[n.a];
      for (std::size_t j = 0; j < g.numel(); ++j) na.grad[j] += g[j] / na.value[j];
      return;
    }
    case Op::kLogSigmoid: {
      Node& na = nodes_[n.a];
      // d/dx log(sigmoid(x)) = 1 - sigmoid(x) = sigmoid(-x)
      for (std::size_t j = 0; j < g.numel(); ++j)
        na.grad[j] += g[j] * sigmoid_value(-na.value[j]);
      return;
    }
    case Op::kOneMinus: {
      Node& na = nodes_[n.a];
      for (std::size_t j = 0; j < g.numel(); ++j) na.grad[j] -= g[j];
      return;
    }
    case Op::kNeg: {
      Node& na = nodes_[n.a];
      for (std::size_t j = 0; j < g.numel(); ++j) na.grad[j] -= g[j];
      return;
    }
    case Op::kScale: {
      Node& na = nodes_[n.a];
      for (std::size_t j = 0; j < g.numel(); ++j) na.grad[j] += g[j] * n.factor;
      return;
    }
    case Op::kConcat: {
      std::size_t off = 0;
      for (std::uint32_t pid : n.many) {
        Node& np = nodes_[pid];
        for (std::size_t j = 0; j < np.value.numel(); ++j) np.grad[j] += g[off + j];
        off += np.value.numel();
      }
      return;
    }
    case Op::kMaxAll: {
      Node& na = nodes_[n.a];
      na.grad[static_cast<std::size_t>(n.aux[0])] += g[0];
      return;
    }
    case Op::kMean: {
      Node& na = nodes_[n.a];
      const double gi = g[0] / static_cast<double>(na.value.numel());
      for (std::size_t j = 0; j < na.value.numel(); ++j) na.grad[j] += gi;
      return;
    }
    case Op::kDot: {
      Node& na = nodes_[n.a];
      Node& nb = nodes_[n.b];
      const double g0 = g[0];
      for (std::size_t j = 0; j < na.value.numel(); ++j) {
        na.grad[j] += g0 * nb.value[j];
        nb.grad[j] += g0 * na.value[j];
      }
      return;
    }
    case Op::kEmbed: {
      Node& nt = nodes_[n.a];
      const std::size_t d = n.value.rows(), len = n.value.cols();
      for (std::size_t j = 0; j < len; ++j) {
        const auto id = static_cast<std::size_t>(n.aux[j]);
        for (std::size_t r = 0; r < d; ++r) nt.grad.at2(id, r) += g.at2(r, j);
      }
      return;
    }
    case Op::kConvReluMax: {
      if (n.value[0] <= 0.0) return;  // relu gate shut (or exactly at the kink)
      Node& nm = nodes_[n.a];
      Node& ng = nodes_[n.b];
      Node& nb = nodes_[n.c];
      const double g0 = g[0];
      const std::size_t d = nm.value.rows(), len = nm.value.cols(), h = ng.value.cols();
      const auto i0 = static_cast<std::size_t>(n.aux[0]);
      nb.grad[0] += g0;
      for (std::size_t r = 0; r < d; ++r) {
        const double* mrow = nm.value.data() + r * len + i0;
        double* gmrow = nm.grad.data() + r * len + i0;
        const double* grow = ng.value.data() + r * h;
        double* ggrow = ng.grad.data() + r * h;
        for (std::size_t c = 0; c < h; ++c) {
          ggrow[c] += g0 * mrow[c];
          gmrow[c] += g0 * grow[c];
        }
      }
      return;
    }
  }
}

}  // namespace ced::nn
