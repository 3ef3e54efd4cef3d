#pragma once

// Adaptive EEG encoder: subject-specific channel mixing, a channel-token
// transformer, per-band DE/PSD mutual-cross attention, cross-band attention,
// adaptive band fusion with spectral reconstruction, and a final
// normalization / projection into the shared embedding space.

#include "hypermml/autograd.hpp"
#include "hypermml/params.hpp"
#include "hypermml/spectral.hpp"

#include <array>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hypermml {

struct AbemaConfig {
  int channels = 8;
  int samples = 128;
  double sampling_rate_hz = 128.0;
  int d_k = 64;
  int shared_dim = 64;  // d
  int transformer_depth = 1;
  int transformer_heads = 2;
  int transformer_model_dim = 64;
  double balance_alpha = 0.5;
  bool intra_mca = true;  // off: DE/PSD concatenated and linearly projected
  bool inter_mca = true;  // off: band features pass through unchanged
  // Unseen subjects at evaluation use an identity mixing matrix instead of
  // raising LookupError.
  bool unseen_subject_identity = true;
  spectral::BandEdges band_edges = spectral::default_band_edges();
};

using BandVars = std::array<ag::Var, spectral::kNumBands>;

// Band-limited signal plus its DE / PSD columns for one sample.
struct BandDecomposition {
  BandVars banded;  // C x L each
  BandVars de;      // C x 1 each
  BandVars psd;     // C x 1 each
};

struct AbemaSampleOutput {
  ag::Var transformed;  // E_t, C x L
  BandDecomposition bands;
  BandVars fused;         // F_b, 1 x d_k
  BandVars refined;       // F^_b, 1 x d_k
  ag::Var band_weights;   // 1 x 5
  ag::Var embedding;      // E_n, C x L
  ag::Var normalized;     // LN(E_n), C x L
  ag::Var projected;      // 1 x d
};

class Abema {
 public:
  // Registers parameters under subject_bank/, channel_tf/, intra_mca/,
  // inter_mca/ and fusion/.
  Abema(AbemaConfig config, const std::vector<std::string>& subjects, ParamStore& params, std::mt19937_64& rng);

  const AbemaConfig& config() const { return config_; }
  const spectral::BandMaskSet& masks() const { return masks_; }
  bool knows_subject(const std::string& subject) const { return subject_bank_.count(subject) != 0; }

  // M_s * E for one C x L sample.
  ag::Var subject_transform(const ag::Var& eeg, const std::string& subject) const;
  // Shape-preserving self-attention across channel tokens; depth 0 is the identity.
  ag::Var channel_transformer(const ag::Var& eeg) const;
  BandDecomposition decompose(const ag::Var& transformed) const;

  // de, psd: C x 1 for one sample; returns 1 x d_k.
  ag::Var intra_band_mca(spectral::Band band, const ag::Var& de, const ag::Var& psd) const;
  // Batched form: de, psd are B x C; returns B x d_k.
  ag::Var intra_band_mca_batch(spectral::Band band, const ag::Var& de, const ag::Var& psd) const;

  // Each input B x d_k; rows are independent samples.
  BandVars inter_band_mca(const BandVars& fused) const;
  // Softmax over the five scores w^T F^_b, per row. Returns B x 5.
  ag::Var band_importance(const BandVars& refined) const;
  // One sample: refined rows 1 x d_k, weights 1 x 5.
  ag::Var reconstruct_embedding(const BandVars& refined, const ag::Var& band_weights, const BandDecomposition& bands,
                                const ag::Var& transformed) const;
  // Joint layer norm over (C, L); projection of the per-channel time mean to d.
  std::pair<ag::Var, ag::Var> normalize_project(const ag::Var& embedding) const;

  AbemaSampleOutput forward(const Mat& eeg, const std::string& subject) const;

 private:
  struct TransformerLayer {
    ag::Var ln1_g, ln1_b, w_q, w_k, w_v, w_o, b_o, ln2_g, ln2_b, ff1_w, ff1_b, ff2_w, ff2_b;
  };
  struct IntraBand {
    ag::Var embed_d_w, embed_d_b, embed_p_w, embed_p_b;  // 1 x d_k scalar-token embeddings
    ag::Var w_qd, w_kp, w_vp, w_qp, w_kd, w_vd;          // d_k x d_k
    ag::Var w_cat, b_cat;                                // used when intra_mca is off
  };

  ag::Var transformer_layer(const ag::Var& h, const TransformerLayer& layer) const;
  ag::Var psd_token_input(const ag::Var& psd) const;

  AbemaConfig config_;
  spectral::BandMaskSet masks_;
  std::map<std::string, ag::Var> subject_bank_;
  ag::Var tf_embed_w_, tf_embed_b_, tf_out_w_, tf_out_b_;
  std::vector<TransformerLayer> tf_layers_;
  std::array<IntraBand, spectral::kNumBands> intra_;
  std::array<ag::Var, spectral::kNumBands> inter_q_;
  ag::Var inter_k_, inter_v_;  // 5 d_k x d_k, one d_k x d_k block per band
  ag::Var fusion_w_;           // d_k x 1
  ag::Var fusion_wr_;          // d_k x C
  ag::Var proj_w_, proj_b_;    // C x d, 1 x d
};

}  // namespace hypermml
