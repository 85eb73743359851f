#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ced/rng.hpp"
#include "ced/tape.hpp"

namespace ced::encoder {

// One GRU layer's weights. Gate biases are standard practice and default on;
// they can be disabled to match the bias-free equations exactly.
struct GruLayer {
  nn::Parameter* ur = nullptr;
  nn::Parameter* wr = nullptr;
  nn::Parameter* uz = nullptr;
  nn::Parameter* wz = nullptr;
  nn::Parameter* uh = nullptr;
  nn::Parameter* wh = nullptr;
  nn::Parameter* br = nullptr;
  nn::Parameter* bz = nullptr;
  nn::Parameter* bh = nullptr;
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 0;
  bool use_bias = true;
};

struct GruStack {
  GruLayer l1;
  GruLayer l2;
  std::size_t hidden_dim() const { return l2.hidden_dim; }
};

// Parameter vars bound once per tape so gradients accumulate across steps.
struct GruLayerVars {
  nn::Var ur, wr, uz, wz, uh, wh, br, bz, bh;
  bool use_bias = false;
};

GruLayerVars bind_layer(nn::Tape& tape, const GruLayer& layer);

// r = sigmoid(UR x + WR h [+ br])
// z = sigmoid(UZ x + WZ h [+ bz])
// htilde = tanh(UH x + WH (h .* r) [+ bh])
// h' = (1 - z) .* h + z .* htilde
nn::Var gru_cell(nn::Tape& tape, nn::Var x, nn::Var h_prev, const GruLayerVars& v);

// Unrolls the 2-layer stack over the feature columns with h_0 = 0 and
// returns the top-layer state per step. When `om_feature` is given, each
// returned state is the concatenation h_i ++ r (gradients flow into r).
std::vector<nn::Var> encode(nn::Tape& tape, std::span<const nn::Var> xs, const GruStack& stack,
                            std::optional<nn::Var> om_feature);

// Numeric inference path mirroring gru_cell / encode step by step.
nn::Tensor gru_cell_numeric(const nn::Tensor& x, const nn::Tensor& h_prev, const GruLayer& layer);

struct EncoderState {
  nn::Tensor h1;
  nn::Tensor h2;
};

EncoderState initial_state(const GruStack& stack);
// Feeds one feature column; returns the (optionally OM-augmented) top state.
nn::Tensor encode_step(EncoderState& state, const nn::Tensor& x, const GruStack& stack,
                       const nn::Tensor* om_feature);

// Creates parameters "gru.l{1,2}.{UR,WR,UZ,WZ,UH,WH,br,bz,bh}" with
// uniform(+-1/sqrt(fan_in)) weights and zero biases.
GruStack make_gru_stack(nn::ParamStore& store, std::size_t in_dim, std::size_t hidden_dim,
                        bool use_bias, rng::Rng& rng);
GruStack bind_gru_stack(nn::ParamStore& store, std::size_t in_dim, std::size_t hidden_dim,
                        bool use_bias);

}  // namespace ced::encoder
