#pragma once

// Unimodal encoders into the shared d-dimensional space: affine maps for
// feature-vector modalities and a bidirectional GRU over the EEG sequence.

#include "hypermml/autograd.hpp"
#include "hypermml/params.hpp"

#include <random>
#include <span>
#include <string>

namespace hypermml {

class LinearEncoder {
 public:
  // Registers <prefix>w (in_dim x d) and <prefix>b (1 x d).
  LinearEncoder(const std::string& prefix, int in_dim, int d, ParamStore& params, std::mt19937_64& rng);

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  // x: B x in_dim -> B x d.
  ag::Var encode(const ag::Var& x) const;

  const ag::Var& weight() const { return w_; }
  const ag::Var& bias() const { return b_; }

 private:
  int in_dim_;
  int out_dim_;
  ag::Var w_, b_;
};

struct GruDirection {
  ag::Var w_ih, b_ih, w_hh, b_hh;  // C x 3H, 1 x 3H, H x 3H, 1 x 3H
};

class BiGruEncoder {
 public:
  // Hidden size d/2 per direction (d must be even); the concatenated final
  // states pass through <prefix>out_w (d x d) and <prefix>out_b.
  BiGruEncoder(const std::string& prefix, int features, int d, ParamStore& params, std::mt19937_64& rng);

  int hidden() const { return hidden_; }
  int out_dim() const { return out_dim_; }
  // Each sample is features x L (rows are channels, columns are time steps);
  // all samples share L. Returns B x d.
  ag::Var encode(std::span<const ag::Var> samples) const;

  const GruDirection& forward_dir() const { return fwd_; }
  const GruDirection& backward_dir() const { return bwd_; }

 private:
  int features_;
  int hidden_;
  int out_dim_;
  GruDirection fwd_, bwd_;
  ag::Var out_w_, out_b_;
};

}  // namespace hypermml
