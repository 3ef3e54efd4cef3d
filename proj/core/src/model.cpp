#include "hypermml/model.hpp"

#include "hypermml/errors.hpp"

#include <algorithm>
#include <map>

namespace hypermml {

using namespace ag;

Modality parse_modality(const std::string& name, const std::vector<std::string>& slot_names) {
  if (name == "eeg") return Modality::eeg;
  if (name == "audio") return Modality::audio;
  if (name == "video") return Modality::video;
  for (std::size_t i = 0; i < slot_names.size() && i < kMaxModalities; ++i) {
    if (slot_names[i] == name) return static_cast<Modality>(i);
  }
  throw ArgumentError("unknown modality: " + name);
}

std::string modality_name(Modality m) {
  switch (m) {
    case Modality::eeg: return "eeg";
    case Modality::audio: return "audio";
    case Modality::video: return "video";
  }
  return "?";
}

bool ModelConfig::uses(Modality m) const { return std::find(modalities.begin(), modalities.end(), m) != modalities.end(); }

ModelDims ModelDims::from(const Dataset& dataset) {
  const auto& m = dataset.manifest;
  ModelDims d{m.channels, m.samples, m.sampling_rate_hz, m.audio_dim, m.video_dim, m.num_classes, 1, m.subjects};
  std::map<std::pair<std::string, std::string>, int> lengths;
  for (const auto& e : m.segment_index) {
    int& n = lengths[{e.subject_id, e.dialogue_id}];
    n = std::max(n, e.position + 1);
  }
  for (const auto& [k, n] : lengths) d.max_segments = std::max(d.max_segments, n);
  return d;
}

HyperMml::HyperMml(ModelConfig config, ModelDims dims, std::uint64_t seed)
    : config_(std::move(config)), dims_(std::move(dims)) {
  if (config_.modalities.empty()) throw ArgumentError("HyperMml: at least one modality is required");
  std::sort(config_.modalities.begin(), config_.modalities.end());
  config_.modalities.erase(std::unique(config_.modalities.begin(), config_.modalities.end()), config_.modalities.end());
  if (dims_.num_classes < 2) throw ConfigError("HyperMml: need at least two classes");
  std::mt19937_64 rng(seed);

  if (config_.uses(Modality::eeg)) {
    AbemaConfig ac;
    ac.channels = dims_.channels;
    ac.samples = dims_.samples;
    ac.sampling_rate_hz = dims_.sampling_rate_hz;
    ac.d_k = config_.d_k;
    ac.shared_dim = config_.d;
    ac.transformer_depth = config_.transformer_depth;
    ac.transformer_heads = config_.transformer_heads;
    ac.transformer_model_dim = config_.transformer_model_dim;
    ac.balance_alpha = config_.balance_alpha;
    ac.intra_mca = config_.intra_mca;
    ac.inter_mca = config_.inter_mca;
    ac.unseen_subject_identity = config_.unseen_subject_identity;
    abema_ = std::make_unique<Abema>(ac, dims_.subjects, params_, rng);
    eeg_encoder_ = std::make_unique<BiGruEncoder>("encoders/eeg/", dims_.channels, config_.d, params_, rng);
  }
  if (config_.uses(Modality::audio)) {
    audio_encoder_ = std::make_unique<LinearEncoder>("encoders/audio/", dims_.audio_dim, config_.d, params_, rng);
  }
  if (config_.uses(Modality::video)) {
    video_encoder_ = std::make_unique<LinearEncoder>("encoders/video/", dims_.video_dim, config_.d, params_, rng);
  }
  HypergraphConfig hc;
  hc.modalities = static_cast<int>(config_.modalities.size());
  hc.max_segments = std::max(1, dims_.max_segments);
  hc.layers = config_.hypergraph_layers;
  hc.dim = config_.d;
  hc.layer_transform = config_.hypergraph_layer_transform;
  hc.node_weights = config_.node_weights;
  hc.hyperedge_weights = config_.hyperedge_weights;
  hypergraph_ = std::make_unique<HypergraphFusion>(hc, params_, rng);
  classifier_ = std::make_unique<ClassifierHead>(hc.modalities * config_.d, config_.hidden_width(), dims_.num_classes,
                                                 params_, rng);
}

BatchOutput HyperMml::forward(const Dataset& dataset, const std::vector<DialogueGroup>& dialogues,
                              std::mt19937_64* rng) const {
  BatchOutput out;
  for (const auto& g : dialogues) {
    for (std::size_t idx : g.segments) {
      if (idx >= dataset.segments.size()) throw ArgumentError("HyperMml::forward: segment index out of range");
      out.segments.push_back(idx);
      out.labels.push_back(dataset.segments[idx].label.class_index);
    }
  }
  const Eigen::Index S = static_cast<Eigen::Index>(out.segments.size());
  if (S == 0) throw ArgumentError("HyperMml::forward: empty batch");

  const bool train = rng != nullptr;
  auto maybe_dropout = [&](const Var& v) { return train && config_.dropout > 0 ? dropout(v, config_.dropout, *rng) : v; };

  for (Modality m : config_.modalities) {
    Var emb;
    if (m == Modality::eeg) {
      std::vector<Var> normalized;
      std::vector<Var> projected;
      out.band_weights.resize(S, static_cast<Eigen::Index>(spectral::kNumBands));
      for (Eigen::Index i = 0; i < S; ++i) {
        const auto& seg = dataset.segments[out.segments[static_cast<std::size_t>(i)]];
        auto a = abema_->forward(seg.eeg, seg.subject_id);
        out.band_weights.row(i) = a.band_weights.value().row(0);
        normalized.push_back(std::move(a.normalized));
        projected.push_back(std::move(a.projected));
      }
      emb = add(eeg_encoder_->encode(normalized), concat_rows(projected));
    } else {
      const bool audio = m == Modality::audio;
      const int dim = audio ? dims_.audio_dim : dims_.video_dim;
      Mat x(S, dim);
      for (Eigen::Index i = 0; i < S; ++i) {
        const auto& seg = dataset.segments[out.segments[static_cast<std::size_t>(i)]];
        const Vec& v = audio ? seg.audio : seg.video;
        if (v.size() != dim) throw ConfigError("HyperMml::forward: feature dimension mismatch");
        x.row(i) = v.transpose();
      }
      emb = (audio ? audio_encoder_ : video_encoder_)->encode(constant(std::move(x)));
    }
    out.embeddings.push_back(maybe_dropout(emb));
  }

  // Node (i, x) of a dialogue is row x*S + s of the stacked embeddings.
  const Var stacked = concat_rows(out.embeddings);
  const int M = static_cast<int>(config_.modalities.size());
  std::vector<Var> fused;
  Eigen::Index offset = 0;
  for (const auto& g : dialogues) {
    const int n = static_cast<int>(g.segments.size());
    std::vector<Eigen::Index> rows;
    rows.reserve(static_cast<std::size_t>(n * M));
    for (int i = 0; i < n; ++i) {
      for (int x = 0; x < M; ++x) rows.push_back(x * S + offset + i);
    }
    fused.push_back(hypergraph_->forward(select_rows(stacked, std::move(rows)), n));
    offset += n;
  }
  out.fused = concat_rows(fused);
  out.logits = classifier_->logits(out.fused, config_.dropout, train ? rng : nullptr);
  return out;
}

}  // namespace hypermml
