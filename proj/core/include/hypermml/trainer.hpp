#pragma once

// Training loop, checkpoints, evaluation reports and ablation runs.

#include "hypermml/classifier.hpp"
#include "hypermml/data_model.hpp"
#include "hypermml/model.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hypermml {

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 1e-4;
  int epochs = 40;
  int batch_size = 16;  // dialogues per step
  double lambda = kDefaultL2;
  std::uint64_t seed = 42;
  std::string split = "all";  // "all" or "subject=<id>"
  double test_fraction = kDefaultTestFraction;
  int eval_every = 1;  // 0 disables per-epoch evaluation
  std::string data_dir;
};

// Unknown keys raise ConfigError. Missing keys keep their defaults.
std::string to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);

// Ablation switches: no_intra_mca, no_inter_mca, no_node_weights,
// no_hyperedge_weights, and modality subsets such as "eeg" or "audio+video".
// "full" leaves the config unchanged; flags combine with '+'.
ModelConfig apply_variant(ModelConfig base, const std::string& variant, const std::vector<std::string>& slot_names = {});

// "all" -> every subject; "subject=<id>" -> that subject only; "full" puts
// every segment on the test side (train side empty).
Split resolve_split(const Dataset& dataset, const std::string& spec, double test_fraction, std::uint64_t seed);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = -1.0;  // -1 when not evaluated this epoch
  double train_f1 = -1.0;
  double test_acc = -1.0;
  double test_f1 = -1.0;

  bool operator==(const EpochRecord&) const = default;
};

std::string to_json_line(const EpochRecord& r);

struct NamedMat {
  std::string name;
  Mat value;
};

struct Checkpoint {
  TrainConfig config;
  ModelDims dims;
  std::vector<NamedMat> params;  // float32-representable values
  long long optimizer_steps = 0;
  std::vector<Mat> adam_m, adam_v;
  int epoch = 0;
  std::vector<EpochRecord> history;

  // Builds a model carrying these parameter values.
  HyperMml instantiate() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

struct SubjectRow {
  std::string subject;
  long segments = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::string dataset;
  std::string split;
  std::vector<std::string> class_names;
  Metrics overall;
  std::vector<SubjectRow> subjects;
  std::vector<std::size_t> segments;
  std::vector<int> predicted;
  std::vector<int> truth;
};

std::string to_json(const EvalReport& report);
EvalReport eval_report_from_json(const std::string& text);

struct TrainResult {
  Checkpoint checkpoint;
  Split split;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Throws NumericError naming the first non-finite tensor when training diverges.
TrainResult train(const TrainConfig& config, const Dataset& dataset, const EpochCallback& on_epoch = {});

// Dropout off, no parameter mutation. Throws ConfigError when the dataset
// dimensions differ from the checkpoint.
EvalReport evaluate(const Checkpoint& ckpt, const Dataset& dataset, std::span<const std::size_t> segments,
                    const std::string& split_name = "");
EvalReport evaluate(const HyperMml& model, const Dataset& dataset, std::span<const std::size_t> segments,
                    const std::string& split_name = "");

struct AblationRow {
  std::string variant;
  double accuracy = 0.0;  // mean over seeds on the held-out side
  double f1 = 0.0;
  std::vector<double> per_seed_accuracy;
};

struct AblationReport {
  std::vector<AblationRow> rows;
};

AblationReport run_ablation(const TrainConfig& base, const Dataset& dataset, const std::vector<std::string>& variants,
                            const std::vector<std::uint64_t>& seeds);

std::string to_json(const AblationReport& report);
AblationReport ablation_report_from_json(const std::string& text);

}  // namespace hypermml
