#include "hypermml/abema.hpp"

#include "hypermml/errors.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace hypermml {

using namespace ag;
using spectral::Band;
using spectral::kNumBands;

namespace {

Mat ones_row(Eigen::Index n) { return Mat::Ones(1, n); }
Mat zeros_row(Eigen::Index n) { return Mat::Zero(1, n); }

// Row-wise dot product of two B x k matrices: B x 1.
Var row_dot(const Var& a, const Var& b) { return row_sum(mul(a, b)); }

}  // namespace

Abema::Abema(AbemaConfig config, const std::vector<std::string>& subjects, ParamStore& params, std::mt19937_64& rng)
    : config_(std::move(config)) {
  const int C = config_.channels;
  const int L = config_.samples;
  const int dk = config_.d_k;
  const int dm = config_.transformer_model_dim;
  if (C < 1 || L < 2 || dk < 1 || config_.shared_dim < 1) throw ArgumentError("Abema: invalid dimensions");
  if (config_.transformer_depth < 0) throw ArgumentError("Abema: transformer depth must be >= 0");
  if (config_.transformer_depth > 0 && (config_.transformer_heads < 1 || dm % config_.transformer_heads != 0)) {
    throw ArgumentError("Abema: transformer_model_dim must be divisible by transformer_heads");
  }
  config_.balance_alpha = std::clamp(config_.balance_alpha, 0.0, 1.0);
  masks_ = spectral::band_masks(spectral::frequency_axis(L, config_.sampling_rate_hz), config_.band_edges);

  for (const auto& s : subjects) {
    if (!subject_bank_.count(s)) subject_bank_.emplace(s, params.add("subject_bank/" + s, Mat::Identity(C, C)));
  }

  if (config_.transformer_depth > 0) {
    tf_embed_w_ = params.add("channel_tf/embed_w", fan_in_uniform(L, dm, L, rng));
    tf_embed_b_ = params.add("channel_tf/embed_b", zeros_row(dm));
    for (int l = 0; l < config_.transformer_depth; ++l) {
      const std::string p = "channel_tf/layer" + std::to_string(l) + "/";
      TransformerLayer t;
      t.ln1_g = params.add(p + "ln1_g", ones_row(dm));
      t.ln1_b = params.add(p + "ln1_b", zeros_row(dm));
      t.w_q = params.add(p + "w_q", fan_in_uniform(dm, dm, dm, rng));
      t.w_k = params.add(p + "w_k", fan_in_uniform(dm, dm, dm, rng));
      t.w_v = params.add(p + "w_v", fan_in_uniform(dm, dm, dm, rng));
      t.w_o = params.add(p + "w_o", fan_in_uniform(dm, dm, dm, rng));
      t.b_o = params.add(p + "b_o", zeros_row(dm));
      t.ln2_g = params.add(p + "ln2_g", ones_row(dm));
      t.ln2_b = params.add(p + "ln2_b", zeros_row(dm));
      t.ff1_w = params.add(p + "ff1_w", fan_in_uniform(dm, 2 * dm, dm, rng));
      t.ff1_b = params.add(p + "ff1_b", zeros_row(2 * dm));
      t.ff2_w = params.add(p + "ff2_w", fan_in_uniform(2 * dm, dm, 2 * dm, rng));
      t.ff2_b = params.add(p + "ff2_b", zeros_row(dm));
      tf_layers_.push_back(std::move(t));
    }
    tf_out_w_ = params.add("channel_tf/out_w", fan_in_uniform(dm, L, dm, rng));
    tf_out_b_ = params.add("channel_tf/out_b", zeros_row(L));
  }

  for (std::size_t b = 0; b < kNumBands; ++b) {
    const std::string p = "intra_mca/" + std::string(spectral::band_name(spectral::kBands[b])) + "/";
    auto& ib = intra_[b];
    if (config_.intra_mca) {
      ib.embed_d_w = params.add(p + "embed_d_w", fan_in_uniform(1, dk, 1, rng));
      ib.embed_d_b = params.add(p + "embed_d_b", fan_in_uniform(1, dk, 1, rng));
      ib.embed_p_w = params.add(p + "embed_p_w", fan_in_uniform(1, dk, 1, rng));
      ib.embed_p_b = params.add(p + "embed_p_b", fan_in_uniform(1, dk, 1, rng));
      ib.w_qd = params.add(p + "w_qd", fan_in_uniform(dk, dk, dk, rng));
      ib.w_kp = params.add(p + "w_kp", fan_in_uniform(dk, dk, dk, rng));
      ib.w_vp = params.add(p + "w_vp", fan_in_uniform(dk, dk, dk, rng));
      ib.w_qp = params.add(p + "w_qp", fan_in_uniform(dk, dk, dk, rng));
      ib.w_kd = params.add(p + "w_kd", fan_in_uniform(dk, dk, dk, rng));
      ib.w_vd = params.add(p + "w_vd", fan_in_uniform(dk, dk, dk, rng));
    } else {
      ib.w_cat = params.add(p + "w_cat", fan_in_uniform(2 * C, dk, 2 * C, rng));
      ib.b_cat = params.add(p + "b_cat", zeros_row(dk));
    }
  }

  if (config_.inter_mca) {
    for (std::size_t b = 0; b < kNumBands; ++b) {
      inter_q_[b] = params.add("inter_mca/w_q_" + std::string(spectral::band_name(spectral::kBands[b])),
                               fan_in_uniform(dk, dk, dk, rng));
    }
    inter_k_ = params.add("inter_mca/w_k", fan_in_uniform(kNumBands * dk, dk, dk, rng));
    inter_v_ = params.add("inter_mca/w_v", fan_in_uniform(kNumBands * dk, dk, dk, rng));
  }

  fusion_w_ = params.add("fusion/w", fan_in_uniform(dk, 1, dk, rng));
  fusion_wr_ = params.add("fusion/w_r", fan_in_uniform(dk, C, dk, rng));
  proj_w_ = params.add("fusion/proj_w", fan_in_uniform(C, config_.shared_dim, C, rng));
  proj_b_ = params.add("fusion/proj_b", zeros_row(config_.shared_dim));
}

Var Abema::subject_transform(const Var& eeg, const std::string& subject) const {
  if (eeg.rows() != config_.channels) throw ShapeError("subject_transform: channel count mismatch");
  auto it = subject_bank_.find(subject);
  if (it == subject_bank_.end()) {
    if (config_.unseen_subject_identity) return eeg;
    throw LookupError("subject_transform: unknown subject " + subject);
  }
  return matmul(it->second, eeg);
}

Var Abema::transformer_layer(const Var& h, const TransformerLayer& t) const {
  const int heads = config_.transformer_heads;
  const int dm = config_.transformer_model_dim;
  const int dh = dm / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Var z = add_row(mul_row(layer_norm_rows(h), t.ln1_g), t.ln1_b);
  Var q = matmul(z, t.w_q);
  Var k = matmul(z, t.w_k);
  Var v = matmul(z, t.w_v);
  std::vector<Var> head_out;
  for (int i = 0; i < heads; ++i) {
    Var qh = slice_cols(q, i * dh, dh);
    Var kh = slice_cols(k, i * dh, dh);
    Var vh = slice_cols(v, i * dh, dh);
    Var attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
    head_out.push_back(matmul(attn, vh));
  }
  Var attn_out = add_row(matmul(concat_cols(head_out), t.w_o), t.b_o);
  Var h1 = add(h, attn_out);
  Var z2 = add_row(mul_row(layer_norm_rows(h1), t.ln2_g), t.ln2_b);
  Var ff = add_row(matmul(relu(add_row(matmul(z2, t.ff1_w), t.ff1_b)), t.ff2_w), t.ff2_b);
  return add(h1, ff);
}

Var Abema::channel_transformer(const Var& eeg) const {
  if (config_.transformer_depth == 0) return eeg;
  if (eeg.cols() != config_.samples) throw ShapeError("channel_transformer: sample count mismatch");
  // Each channel's series is one token; no positional encoding over channels.
  Var h = add_row(matmul(eeg, tf_embed_w_), tf_embed_b_);
  for (const auto& layer : tf_layers_) h = transformer_layer(h, layer);
  return add(eeg, add_row(matmul(h, tf_out_w_), tf_out_b_));
}

BandDecomposition Abema::decompose(const Var& transformed) const {
  BandDecomposition out;
  for (std::size_t b = 0; b < kNumBands; ++b) {
    out.banded[b] = band_filter(transformed, masks_.masks[b]);
    out.de[b] = ag::differential_entropy(out.banded[b]);
    out.psd[b] = band_psd(transformed, masks_.masks[b]);
  }
  return out;
}

Var Abema::psd_token_input(const Var& psd) const { return log1p(psd); }

Var Abema::intra_band_mca(Band band, const Var& de, const Var& psd) const {
  const auto& ib = intra_[static_cast<std::size_t>(band)];
  if (de.rows() != config_.channels || psd.rows() != config_.channels || de.cols() != 1 || psd.cols() != 1) {
    throw ShapeError("intra_band_mca: expected C x 1 DE and PSD columns");
  }
  const Var p = psd_token_input(psd);
  if (!config_.intra_mca) {
    std::array<Var, 2> parts = {transpose(de), transpose(p)};
    return add_row(matmul(concat_cols(parts), ib.w_cat), ib.b_cat);
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(config_.d_k));
  // Channels are the tokens: each scalar is embedded to d_k, then projected.
  const Var e_d = add_row(matmul(de, ib.embed_d_w), ib.embed_d_b);
  const Var e_p = add_row(matmul(p, ib.embed_p_w), ib.embed_p_b);
  const Var q_d = matmul(e_d, ib.w_qd);
  const Var k_p = matmul(e_p, ib.w_kp);
  const Var v_p = matmul(e_p, ib.w_vp);
  const Var q_p = matmul(e_p, ib.w_qp);
  const Var k_d = matmul(e_d, ib.w_kd);
  const Var v_d = matmul(e_d, ib.w_vd);
  const Var a_dp = matmul(softmax_rows(scale(matmul(q_d, transpose(k_p)), inv_sqrt)), v_p);
  const Var a_pd = matmul(softmax_rows(scale(matmul(q_p, transpose(k_d)), inv_sqrt)), v_d);
  return add(col_mean(a_dp), col_mean(a_pd));
}

Var Abema::intra_band_mca_batch(Band band, const Var& de, const Var& psd) const {
  if (de.rows() != psd.rows() || de.cols() != psd.cols()) throw ShapeError("intra_band_mca: DE/PSD shape mismatch");
  std::vector<Var> rows;
  for (Eigen::Index i = 0; i < de.rows(); ++i) {
    rows.push_back(intra_band_mca(band, transpose(slice_rows(de, i, 1)), transpose(slice_rows(psd, i, 1))));
  }
  return concat_rows(rows);
}

BandVars Abema::inter_band_mca(const BandVars& fused) const {
  for (const auto& f : fused) {
    if (!f.defined()) throw ArgumentError("inter_band_mca: missing band feature");
    if (f.cols() != config_.d_k || f.rows() != fused[0].rows()) throw ShapeError("inter_band_mca: shape mismatch");
  }
  if (!config_.inter_mca) return fused;
  const int dk = config_.d_k;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  // Band j contributes key/value F_j W[j], so F_all W = sum_j F_j W[j]; each
  // band query attends over the five band tokens of its own sample.
  BandVars keys, values;
  for (std::size_t j = 0; j < kNumBands; ++j) {
    keys[j] = matmul(fused[j], slice_rows(inter_k_, static_cast<Eigen::Index>(j) * dk, dk));
    values[j] = matmul(fused[j], slice_rows(inter_v_, static_cast<Eigen::Index>(j) * dk, dk));
  }
  BandVars out;
  for (std::size_t b = 0; b < kNumBands; ++b) {
    const Var q = matmul(fused[b], inter_q_[b]);
    std::vector<Var> scores;
    for (std::size_t j = 0; j < kNumBands; ++j) scores.push_back(row_dot(q, keys[j]));
    const Var w = softmax_rows(scale(concat_cols(scores), inv_sqrt));
    Var attended = mul_col(values[0], slice_cols(w, 0, 1));
    for (std::size_t j = 1; j < kNumBands; ++j) {
      attended = add(attended, mul_col(values[j], slice_cols(w, static_cast<Eigen::Index>(j), 1)));
    }
    out[b] = add(fused[b], attended);
  }
  return out;
}

Var Abema::band_importance(const BandVars& refined) const {
  std::vector<Var> scores;
  for (const auto& f : refined) scores.push_back(matmul(f, fusion_w_));
  return softmax_rows(concat_cols(scores));
}

Var Abema::reconstruct_embedding(const BandVars& refined, const Var& band_weights, const BandDecomposition& bands,
                                 const Var& transformed) const {
  const double alpha = config_.balance_alpha;
  // Per-channel gates modulate each band-limited signal; since the masks are
  // disjoint, irfft(sum_b a_b g_b * Gamma_b) = sum_b a_b g_b * x_b.
  Var recon;
  for (std::size_t b = 0; b < kNumBands; ++b) {
    const Var gate = sigmoid(matmul(refined[b], fusion_wr_));  // 1 x C
    const Var coeff = transpose(mul_scalar(gate, slice_cols(band_weights, static_cast<Eigen::Index>(b), 1)));
    const Var term = mul_col(bands.banded[b], coeff);
    recon = recon.defined() ? add(recon, term) : term;
  }
  return add(scale(layer_norm_all(recon), alpha), scale(transformed, 1.0 - alpha));
}

std::pair<Var, Var> Abema::normalize_project(const Var& embedding) const {
  const Var normalized = layer_norm_all(embedding);
  const Var time_mean = transpose(scale(row_sum(normalized), 1.0 / static_cast<double>(normalized.cols())));
  const Var projected = add_row(matmul(time_mean, proj_w_), proj_b_);
  return {normalized, projected};
}

AbemaSampleOutput Abema::forward(const Mat& eeg, const std::string& subject) const {
  if (eeg.rows() != config_.channels || eeg.cols() != config_.samples) {
    throw ShapeError("Abema::forward: expected " + std::to_string(config_.channels) + "x" +
                     std::to_string(config_.samples) + " EEG window");
  }
  AbemaSampleOutput out;
  const Var input = constant(eeg);
  out.transformed = channel_transformer(subject_transform(input, subject));
  out.bands = decompose(out.transformed);
  for (std::size_t b = 0; b < kNumBands; ++b) {
    out.fused[b] = intra_band_mca(spectral::kBands[b], out.bands.de[b], out.bands.psd[b]);
  }
  out.refined = inter_band_mca(out.fused);
  out.band_weights = band_importance(out.refined);
  out.embedding = reconstruct_embedding(out.refined, out.band_weights, out.bands, out.transformed);
  std::tie(out.normalized, out.projected) = normalize_project(out.embedding);
  return out;
}

}  // namespace hypermml
