#include "ced/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace ced::encoder {

GruLayerVars bind_layer(nn::Tape& tape, const GruLayer& layer) {
  GruLayerVars v;
  v.ur = tape.param(*layer.ur);
  v.wr = tape.param(*layer.wr);
  v.uz = tape.param(*layer.uz);
  v.wz = tape.param(*layer.wz);
  v.uh = tape.param(*layer.uh);
  v.wh = tape.param(*layer.wh);
  v.use_bias = layer.use_bias;
  if (layer.use_bias) {
    v.br = tape.param(*layer.br);
    v.bz = tape.param(*layer.bz);
    v.bh = tape.param(*layer.bh);
  }
  return v;
}

nn::Var gru_cell(nn::Tape& tape, nn::Var x, nn::Var h_prev, const GruLayerVars& v) {
  nn::Var pre_r = tape.add(tape.matmul(v.ur, x), tape.matmul(v.wr, h_prev));
  if (v.use_bias) pre_r = tape.add(pre_r, v.br);
  const nn::Var r = tape.sigmoid(pre_r);

  nn::Var pre_z = tape.add(tape.matmul(v.uz, x), tape.matmul(v.wz, h_prev));
  if (v.use_bias) pre_z = tape.add(pre_z, v.bz);
  const nn::Var z = tape.sigmoid(pre_z);

  nn::Var pre_h = tape.add(tape.matmul(v.uh, x), tape.matmul(v.wh, tape.mul(h_prev, r)));
  if (v.use_bias) pre_h = tape.add(pre_h, v.bh);
  const nn::Var h_tilde = tape.tanh(pre_h);

  return tape.add(tape.mul(tape.one_minus(z), h_prev), tape.mul(z, h_tilde));
}

std::vector<nn::Var> encode(nn::Tape& tape, std::span<const nn::Var> xs, const GruStack& stack,
                            std::optional<nn::Var> om_feature) {
  if (xs.empty()) throw std::invalid_argument("encode: empty feature trace");
  const GruLayerVars v1 = bind_layer(tape, stack.l1);
  const GruLayerVars v2 = bind_layer(tape, stack.l2);
  nn::Var h1 = tape.leaf(nn::Tensor({stack.l1.hidden_dim}));
  nn::Var h2 = tape.leaf(nn::Tensor({stack.l2.hidden_dim}));
  std::vector<nn::Var> out;
  out.reserve(xs.size());
  for (const nn::Var& x : xs) {
    h1 = gru_cell(tape, x, h1, v1);
    h2 = gru_cell(tape, h1, h2, v2);
    out.push_back(om_feature ? tape.concat(h2, *om_feature) : h2);
  }
  return out;
}

namespace {

void matvec_into(const nn::Tensor& w, const nn::Tensor& x, nn::Tensor& out) {
  const std::size_t m = w.rows(), k = w.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* row = w.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
}

// pre = U x + W h (+ bias), with the same evaluation grouping as the tape path
nn::Tensor gate_pre(const nn::Tensor& u, const nn::Tensor& x, const nn::Tensor& w,
                    const nn::Tensor& h, const nn::Tensor* bias) {
  nn::Tensor a({u.rows()});
  nn::Tensor b({w.rows()});
  matvec_into(u, x, a);
  matvec_into(w, h, b);
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] += b[i];
  if (bias)
    for (std::size_t i = 0; i < a.numel(); ++i) a[i] += (*bias)[i];
  return a;
}

}  // namespace

nn::Tensor gru_cell_numeric(const nn::Tensor& x, const nn::Tensor& h_prev,
                            const GruLayer& layer) {
  const nn::Tensor* br = layer.use_bias ? &layer.br->value : nullptr;
  const nn::Tensor* bz = layer.use_bias ? &layer.bz->value : nullptr;
  const nn::Tensor* bh = layer.use_bias ? &layer.bh->value : nullptr;

  nn::Tensor r = gate_pre(layer.ur->value, x, layer.wr->value, h_prev, br);
  for (std::size_t i = 0; i < r.numel(); ++i) r[i] = 1.0 / (1.0 + std::exp(-r[i]));

  nn::Tensor z = gate_pre(layer.uz->value, x, layer.wz->value, h_prev, bz);
  for (std::size_t i = 0; i < z.numel(); ++i) z[i] = 1.0 / (1.0 + std::exp(-z[i]));

  nn::Tensor hr({h_prev.numel()});
  for (std::size_t i = 0; i < hr.numel(); ++i) hr[i] = h_prev[i] * r[i];
  nn::Tensor ht = gate_pre(layer.uh->value, x, layer.wh->value, hr, bh);
  for (std::size_t i = 0; i < ht.numel(); ++i) ht[i] = std::tanh(ht[i]);

  nn::Tensor h({h_prev.numel()});
  for (std::size_t i = 0; i < h.numel(); ++i)
    h[i] = (1.0 - z[i]) * h_prev[i] + z[i] * ht[i];
  return h;
}

EncoderState initial_state(const GruStack& stack) {
  EncoderState s;
  s.h1 = nn::Tensor({stack.l1.hidden_dim});
  s.h2 = nn::Tensor({stack.l2.hidden_dim});
  return s;
}

nn::Tensor encode_step(EncoderState& state, const nn::Tensor& x, const GruStack& stack,
                       const nn::Tensor* om_feature) {
  state.h1 = gru_cell_numeric(x, state.h1, stack.l1);
  state.h2 = gru_cell_numeric(state.h1, state.h2, stack.l2);
  if (!om_feature) return state.h2;
  nn::Tensor out({state.h2.numel() + om_feature->numel()});
  for (std::size_t i = 0; i < state.h2.numel(); ++i) out[i] = state.h2[i];
  for (std::size_t i = 0; i < om_feature->numel(); ++i) out[state.h2.numel() + i] = (*om_feature)[i];
  return out;
}

namespace {

nn::Tensor scaled_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, rng::Rng& rng) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
  nn::Tensor t({rows, cols});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

GruLayer make_layer(nn::ParamStore& store, const std::string& prefix, std::size_t in_dim,
                    std::size_t hidden_dim, bool use_bias, rng::Rng& rng) {
  GruLayer l;
  l.in_dim = in_dim;
  l.hidden_dim = hidden_dim;
  l.use_bias = use_bias;
  l.ur = &store.create(prefix + ".UR", scaled_uniform(hidden_dim, in_dim, in_dim, rng));
  l.wr = &store.create(prefix + ".WR", scaled_uniform(hidden_dim, hidden_dim, hidden_dim, rng));
  l.uz = &store.create(prefix + ".UZ", scaled_uniform(hidden_dim, in_dim, in_dim, rng));
  l.wz = &store.create(prefix + ".WZ", scaled_uniform(hidden_dim, hidden_dim, hidden_dim, rng));
  l.uh = &store.create(prefix + ".UH", scaled_uniform(hidden_dim, in_dim, in_dim, rng));
  l.wh = &store.create(prefix + ".WH", scaled_uniform(hidden_dim, hidden_dim, hidden_dim, rng));
  if (use_bias) {
    l.br = &store.create(prefix + ".br", nn::Tensor({hidden_dim}));
    l.bz = &store.create(prefix + ".bz", nn::Tensor({hidden_dim}));
    l.bh = &store.create(prefix + ".bh", nn::Tensor({hidden_dim}));
  }
  return l;
}

GruLayer bind_layer_params(nn::ParamStore& store, const std::string& prefix, std::size_t in_dim,
                           std::size_t hidden_dim, bool use_bias) {
  GruLayer l;
  l.in_dim = in_dim;
  l.hidden_dim = hidden_dim;
  l.use_bias = use_bias;
  l.ur = &store.get(prefix + ".UR");
  l.wr = &store.get(prefix + ".WR");
  l.uz = &store.get(prefix + ".UZ");
  l.wz = &store.get(prefix + ".WZ");
  l.uh = &store.get(prefix + ".UH");
  l.wh = &store.get(prefix + ".WH");
  if (use_bias) {
    l.br = &store.get(prefix + ".br");
    l.bz = &store.get(prefix + ".bz");
    l.bh = &store.get(prefix + ".bh");
  }
  return l;
}

}  // namespace

GruStack make_gru_stack(nn::ParamStore& store, std::size_t in_dim, std::size_t hidden_dim,
                        bool use_bias, rng::Rng& rng) {
  GruStack s;
  s.l1 = make_layer(store, "gru.l1", in_dim, hidden_dim, use_bias, rng);
  s.l2 = make_layer(store, "gru.l2", hidden_dim, hidden_dim, use_bias, rng);
  return s;
}

GruStack bind_gru_stack(nn::ParamStore& store, std::size_t in_dim, std::size_t hidden_dim,
                        bool use_bias) {
  GruStack s;
  s.l1 = bind_layer_params(store, "gru.l1", in_dim, hidden_dim, use_bias);
  s.l2 = bind_layer_params(store, "gru.l2", hidden_dim, hidden_dim, use_bias);
  return s;
}

}  // namespace ced::encoder
