#pragma once

// The full pipeline: EEG encoder + BiGRU, affine audio / video encoders,
// per-dialogue hypergraph fusion and the classification head.

#include "hypermml/abema.hpp"
#include "hypermml/classifier.hpp"
#include "hypermml/data_model.hpp"
#include "hypermml/encoders.hpp"
#include "hypermml/hypergraph.hpp"
#include "hypermml/params.hpp"

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hypermml {

enum class Modality { eeg = 0, audio = 1, video = 2 };
inline constexpr int kMaxModalities = 3;

// Accepts canonical names (eeg, audio, video) or the dataset's own slot
// names (e.g. gsr, eye). Throws ArgumentError for unknown names.
Modality parse_modality(const std::string& name, const std::vector<std::string>& slot_names = {});
std::string modality_name(Modality m);

struct ModelConfig {
  int d = 64;
  int d_k = 64;
  int transformer_depth = 1;
  int transformer_heads = 2;
  int transformer_model_dim = 64;
  double balance_alpha = 0.5;
  bool intra_mca = true;
  bool inter_mca = true;
  bool unseen_subject_identity = true;
  int hypergraph_layers = 2;
  bool hypergraph_layer_transform = false;
  bool node_weights = true;
  bool hyperedge_weights = true;
  int classifier_hidden = 0;  // 0: 3d/2
  double dropout = 0.5;
  std::vector<Modality> modalities = {Modality::eeg, Modality::audio, Modality::video};

  int hidden_width() const { return classifier_hidden > 0 ? classifier_hidden : (3 * d) / 2; }
  bool uses(Modality m) const;
};

// Sizes taken from a dataset manifest.
struct ModelDims {
  int channels = 0;
  int samples = 0;
  double sampling_rate_hz = 0.0;
  int audio_dim = 0;
  int video_dim = 0;
  int num_classes = 0;
  int max_segments = 0;
  std::vector<std::string> subjects;

  static ModelDims from(const Dataset& dataset);
  bool operator==(const ModelDims&) const = default;
};

struct BatchOutput {
  ag::Var logits;                          // S x K, rows follow `segments`
  ag::Var fused;                           // S x (M d)
  std::vector<ag::Var> embeddings;         // per used modality, S x d (before fusion)
  Mat band_weights;                        // S x 5 (empty without EEG)
  std::vector<std::size_t> segments;       // dataset indices
  std::vector<int> labels;
};

class HyperMml {
 public:
  HyperMml(ModelConfig config, ModelDims dims, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ModelDims& dims() const { return dims_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const Abema* abema() const { return abema_.get(); }
  const HypergraphFusion& hypergraph() const { return *hypergraph_; }
  const ClassifierHead& classifier() const { return *classifier_; }

  // Dropout is active iff rng is given.
  BatchOutput forward(const Dataset& dataset, const std::vector<DialogueGroup>& dialogues,
                      std::mt19937_64* rng = nullptr) const;

 private:
  ModelConfig config_;
  ModelDims dims_;
  ParamStore params_;
  std::unique_ptr<Abema> abema_;
  std::unique_ptr<BiGruEncoder> eeg_encoder_;
  std::unique_ptr<LinearEncoder> audio_encoder_;
  std::unique_ptr<LinearEncoder> video_encoder_;
  std::unique_ptr<HypergraphFusion> hypergraph_;
  std::unique_ptr<ClassifierHead> classifier_;
};

}  // namespace hypermml
