#include "hypermml/trainer.hpp"

#include "hypermml/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace hypermml {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LookupError("cannot write " + path.string());
  out << text;
}

json config_json(const TrainConfig& c) {
  const auto& m = c.model;
  json mods = json::array();
  for (Modality x : m.modalities) mods.push_back(modality_name(x));
  return {
      {"learning_rate", c.learning_rate},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"dropout", m.dropout},
      {"lambda", c.lambda},
      {"seed", c.seed},
      {"split", c.split},
      {"test_fraction", c.test_fraction},
      {"eval_every", c.eval_every},
      {"data_dir", c.data_dir},
      {"d", m.d},
      {"d_k", m.d_k},
      {"alpha", m.balance_alpha},
      {"transformer_depth", m.transformer_depth},
      {"transformer_heads", m.transformer_heads},
      {"transformer_model_dim", m.transformer_model_dim},
      {"intra_mca", m.intra_mca},
      {"inter_mca", m.inter_mca},
      {"unseen_subject_identity", m.unseen_subject_identity},
      {"hypergraph_layers", m.hypergraph_layers},
      {"hypergraph_layer_transform", m.hypergraph_layer_transform},
      {"node_weights", m.node_weights},
      {"hyperedge_weights", m.hyperedge_weights},
      {"classifier_hidden", m.classifier_hidden},
      {"modalities", mods},
  };
}

TrainConfig config_from(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig c;
  auto& m = c.model;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "dropout") m.dropout = v.get<double>();
      else if (key == "lambda") c.lambda = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "split") c.split = v.get<std::string>();
      else if (key == "test_fraction") c.test_fraction = v.get<double>();
      else if (key == "eval_every") c.eval_every = v.get<int>();
      else if (key == "data_dir") c.data_dir = v.get<std::string>();
      else if (key == "d") m.d = v.get<int>();
      else if (key == "d_k") m.d_k = v.get<int>();
      else if (key == "alpha") m.balance_alpha = v.get<double>();
      else if (key == "transformer_depth") m.transformer_depth = v.get<int>();
      else if (key == "transformer_heads") m.transformer_heads = v.get<int>();
      else if (key == "transformer_model_dim") m.transformer_model_dim = v.get<int>();
      else if (key == "intra_mca") m.intra_mca = v.get<bool>();
      else if (key == "inter_mca") m.inter_mca = v.get<bool>();
      else if (key == "unseen_subject_identity") m.unseen_subject_identity = v.get<bool>();
      else if (key == "hypergraph_layers") m.hypergraph_layers = v.get<int>();
      else if (key == "hypergraph_layer_transform") m.hypergraph_layer_transform = v.get<bool>();
      else if (key == "node_weights") m.node_weights = v.get<bool>();
      else if (key == "hyperedge_weights") m.hyperedge_weights = v.get<bool>();
      else if (key == "classifier_hidden") m.classifier_hidden = v.get<int>();
      else if (key == "modalities") {
        m.modalities.clear();
        for (const auto& name : v) m.modalities.push_back(parse_modality(name.get<std::string>()));
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

void check_config(const TrainConfig& c) {
  if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(c.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (!(c.model.dropout >= 0 && c.model.dropout < 1)) throw ConfigError("dropout must lie in [0, 1)");
  if (c.lambda < 0) throw ConfigError("lambda must be >= 0");
  if (c.model.d < 2 || c.model.d % 2 != 0) throw ConfigError("d must be even and >= 2");
  if (c.model.modalities.empty()) throw ConfigError("modalities must not be empty");
}

json dims_json(const ModelDims& d) {
  return {{"channels", d.channels},       {"samples", d.samples},     {"sampling_rate_hz", d.sampling_rate_hz},
          {"audio_dim", d.audio_dim},     {"video_dim", d.video_dim}, {"num_classes", d.num_classes},
          {"max_segments", d.max_segments}, {"subjects", d.subjects}};
}

ModelDims dims_from(const json& j) {
  ModelDims d;
  d.channels = j.at("channels").get<int>();
  d.samples = j.at("samples").get<int>();
  d.sampling_rate_hz = j.at("sampling_rate_hz").get<double>();
  d.audio_dim = j.at("audio_dim").get<int>();
  d.video_dim = j.at("video_dim").get<int>();
  d.num_classes = j.at("num_classes").get<int>();
  d.max_segments = j.at("max_segments").get<int>();
  d.subjects = j.at("subjects").get<std::vector<std::string>>();
  return d;
}

json record_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},       {"train_loss", r.train_loss}, {"train_acc", r.train_acc},
          {"train_f1", r.train_f1}, {"test_acc", r.test_acc},     {"test_f1", r.test_f1}};
}

EpochRecord record_from(const json& j) {
  return {j.at("epoch").get<int>(),      j.at("train_loss").get<double>(), j.at("train_acc").get<double>(),
          j.at("train_f1").get<double>(), j.at("test_acc").get<double>(),  j.at("test_f1").get<double>()};
}

json metrics_json(const Metrics& m) {
  return {{"accuracy", m.accuracy},   {"weighted_f1", m.weighted_f1}, {"macro_f1", m.macro_f1},
          {"per_class_f1", m.per_class_f1}, {"support", m.support}, {"confusion", m.confusion},
          {"total", m.total}};
}

Metrics metrics_from(const json& j) {
  Metrics m = metrics_from_confusion(j.at("confusion").get<std::vector<std::vector<long>>>());
  return m;
}

Mat round_f32(const Mat& m) { return m.cast<float>().cast<double>(); }

std::vector<double> flatten(const std::vector<Mat>& mats) {
  std::vector<double> out;
  for (const auto& m : mats) out.insert(out.end(), m.data(), m.data() + m.size());
  return out;
}

void check_dims(const ModelDims& ck, const Dataset& dataset) {
  const auto& m = dataset.manifest;
  if (ck.channels != m.channels || ck.samples != m.samples || ck.audio_dim != m.audio_dim ||
      ck.video_dim != m.video_dim || ck.num_classes != m.num_classes) {
    throw ConfigError("checkpoint dimensions do not match the dataset (C, L, d_a, d_v or class count)");
  }
  if (std::abs(ck.sampling_rate_hz - m.sampling_rate_hz) > 1e-9) {
    throw ConfigError("checkpoint sampling rate does not match the dataset");
  }
}

// Fisher-Yates on uniform01 so the order is the same on every standard library.
void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

std::string first_non_finite(const BatchOutput& out, const ParamStore& params) {
  for (const auto& p : params.entries()) {
    if (!p.var.value().allFinite()) return "parameter " + p.name;
  }
  for (std::size_t i = 0; i < out.embeddings.size(); ++i) {
    if (!out.embeddings[i].value().allFinite()) return "embedding[" + std::to_string(i) + "]";
  }
  if (!out.fused.value().allFinite()) return "fused hypergraph features";
  if (!out.logits.value().allFinite()) return "logits";
  return "loss";
}

}  // namespace

std::string to_json(const TrainConfig& config) { return config_json(config).dump(2); }

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from(j);
}

TrainConfig load_train_config(const fs::path& path) { return train_config_from_json(read_text(path)); }

ModelConfig apply_variant(ModelConfig base, const std::string& variant, const std::vector<std::string>& slot_names) {
  if (variant == "full" || variant.empty()) return base;
  std::vector<Modality> subset;
  std::stringstream ss(variant);
  std::string flag;
  while (std::getline(ss, flag, '+')) {
    if (flag == "no_intra_mca") base.intra_mca = false;
    else if (flag == "no_inter_mca") base.inter_mca = false;
    else if (flag == "no_node_weights") base.node_weights = false;
    else if (flag == "no_hyperedge_weights") base.hyperedge_weights = false;
    else {
      try {
        subset.push_back(parse_modality(flag, slot_names));
      } catch (const ArgumentError&) {
        throw ArgumentError("unknown ablation flag: " + flag);
      }
    }
  }
  if (!subset.empty()) base.modalities = subset;
  return base;
}

Split resolve_split(const Dataset& dataset, const std::string& spec, double test_fraction, std::uint64_t seed) {
  if (spec == "all") return split_all_subjects(dataset, test_fraction, seed);
  if (spec == "full") return {{}, all_segment_indices(dataset), seed};
  const std::string prefix = "subject=";
  if (spec.rfind(prefix, 0) == 0) return split_subject_wise(dataset, spec.substr(prefix.size()), test_fraction, seed);
  throw ArgumentError("unknown split spec: " + spec + " (expected all, full or subject=<id>)");
}

std::string to_json_line(const EpochRecord& r) { return record_json(r).dump(); }

HyperMml Checkpoint::instantiate() const {
  HyperMml model(config.model, dims, config.seed);
  const auto& entries = model.params().entries();
  if (entries.size() != params.size()) throw ConfigError("checkpoint parameter set does not match the configuration");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& p = params[i];
    auto var = entries[i].var;
    if (entries[i].name != p.name || var.rows() != p.value.rows() || var.cols() != p.value.cols()) {
      throw ConfigError("checkpoint parameter mismatch at " + p.name);
    }
    var.mutable_value() = p.value;
  }
  return model;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  fs::create_directories(dir);
  json meta;
  meta["format"] = "hypermml-checkpoint";
  meta["version"] = 1;
  meta["config"] = config_json(ckpt.config);
  meta["dims"] = dims_json(ckpt.dims);
  meta["epoch"] = ckpt.epoch;
  json names = json::array();
  std::vector<Mat> values;
  for (const auto& p : ckpt.params) {
    names.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
    values.push_back(p.value);
  }
  meta["params"] = names;
  meta["optimizer"] = {{"type", "adam"}, {"steps", ckpt.optimizer_steps}, {"file", "optimizer.f32"}};
  json hist = json::array();
  for (const auto& r : ckpt.history) hist.push_back(record_json(r));
  meta["history"] = hist;
  write_f32(dir / "params.f32", flatten(values));
  std::vector<Mat> moments = ckpt.adam_m;
  moments.insert(moments.end(), ckpt.adam_v.begin(), ckpt.adam_v.end());
  write_f32(dir / "optimizer.f32", flatten(moments));
  write_text(dir / "meta.json", meta.dump(2));
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / "meta.json")) throw LookupError("no checkpoint at " + dir.string());
  Checkpoint ck;
  std::vector<double> flat;
  std::vector<double> moments;
  try {
    const json meta = json::parse(read_text(dir / "meta.json"));
    if (meta.at("format") != "hypermml-checkpoint") throw ConfigError("not a checkpoint: " + dir.string());
    ck.config = config_from(meta.at("config"));
    ck.dims = dims_from(meta.at("dims"));
    ck.epoch = meta.at("epoch").get<int>();
    ck.optimizer_steps = meta.at("optimizer").at("steps").get<long long>();
    for (const auto& r : meta.at("history")) ck.history.push_back(record_from(r));
    flat = read_f32(dir / "params.f32");
    moments = fs::exists(dir / "optimizer.f32") ? read_f32(dir / "optimizer.f32") : std::vector<double>{};
    std::size_t off = 0;
    for (const auto& p : meta.at("params")) {
      const auto rows = p.at("rows").get<Eigen::Index>();
      const auto cols = p.at("cols").get<Eigen::Index>();
      const auto n = static_cast<std::size_t>(rows * cols);
      if (off + n > flat.size()) throw ShapeError("params.f32 is shorter than meta.json declares");
      ck.params.push_back({p.at("name").get<std::string>(), Eigen::Map<const Mat>(flat.data() + off, rows, cols)});
      off += n;
    }
    if (off != flat.size()) throw ShapeError("params.f32 is longer than meta.json declares");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint meta.json: ") + e.what());
  }
  if (moments.size() == 2 * flat.size()) {
    std::size_t off = 0;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& p : ck.params) {
        Mat m = Eigen::Map<const Mat>(moments.data() + off, p.value.rows(), p.value.cols());
        (pass == 0 ? ck.adam_m : ck.adam_v).push_back(std::move(m));
        off += static_cast<std::size_t>(p.value.size());
      }
    }
  }
  return ck;
}

EvalReport evaluate(const HyperMml& model, const Dataset& dataset, std::span<const std::size_t> segments,
                    const std::string& split_name) {
  if (segments.empty()) throw ArgumentError("evaluate: no segments to evaluate");
  ag::NoGradGuard guard;
  const auto groups = group_dialogues(dataset, segments);
  EvalReport report;
  report.dataset = dataset.manifest.name;
  report.split = split_name;
  report.class_names = dataset.manifest.class_names;
  constexpr std::size_t kChunk = 16;
  for (std::size_t start = 0; start < groups.size(); start += kChunk) {
    const std::vector<DialogueGroup> chunk(groups.begin() + static_cast<std::ptrdiff_t>(start),
                                           groups.begin() + static_cast<std::ptrdiff_t>(std::min(groups.size(), start + kChunk)));
    const BatchOutput out = model.forward(dataset, chunk);
    const auto pred = argmax_rows(out.logits.value());
    report.segments.insert(report.segments.end(), out.segments.begin(), out.segments.end());
    report.predicted.insert(report.predicted.end(), pred.begin(), pred.end());
    report.truth.insert(report.truth.end(), out.labels.begin(), out.labels.end());
  }
  const int k = dataset.manifest.num_classes;
  report.overall = compute_metrics(report.predicted, report.truth, k);
  std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> by_subject;
  for (std::size_t i = 0; i < report.segments.size(); ++i) {
    auto& [p, t] = by_subject[dataset.segments[report.segments[i]].subject_id];
    p.push_back(report.predicted[i]);
    t.push_back(report.truth[i]);
  }
  for (const auto& s : dataset.manifest.subjects) {
    auto it = by_subject.find(s);
    if (it == by_subject.end()) continue;
    const Metrics m = compute_metrics(it->second.first, it->second.second, k);
    report.subjects.push_back({s, m.total, m.accuracy, m.weighted_f1});
  }
  return report;
}

EvalReport evaluate(const Checkpoint& ckpt, const Dataset& dataset, std::span<const std::size_t> segments,
                    const std::string& split_name) {
  check_dims(ckpt.dims, dataset);
  const HyperMml model = ckpt.instantiate();
  return evaluate(model, dataset, segments, split_name);
}

TrainResult train(const TrainConfig& config, const Dataset& dataset, const EpochCallback& on_epoch) {
  check_config(config);
  TrainResult result;
  result.split = resolve_split(dataset, config.split, config.test_fraction, config.seed);
  if (result.split.train.empty()) throw ArgumentError("train: the split has no training segments");

  HyperMml model(config.model, ModelDims::from(dataset), config.seed);
  Adam adam(model.params(), AdamOptions{config.learning_rate});
  const auto groups = group_dialogues(dataset, result.split.train);
  const auto theta = model.params().vars();
  std::mt19937_64 rng(config.seed ^ 0xD1B54A32D192ED03ULL);

  auto& ck = result.checkpoint;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      std::vector<DialogueGroup> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + static_cast<std::size_t>(config.batch_size)); ++i) {
        batch.push_back(groups[order[i]]);
      }
      const BatchOutput out = model.forward(dataset, batch, &rng);
      const ag::Var loss = regularized_loss(out.logits, out.labels, theta, config.lambda);
      if (!std::isfinite(loss.item())) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": non-finite " +
                           first_non_finite(out, model.params()));
      }
      ag::backward(loss);
      for (const auto& p : model.params().entries()) {
        if (!p.var.grad().allFinite()) {
          throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": non-finite gradient of " +
                             p.name);
        }
      }
      adam.step();
      model.params().zero_grad();
      loss_sum += loss.item() * static_cast<double>(out.labels.size());
      seen += out.labels.size();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    if (config.eval_every > 0 && (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      const EvalReport tr = evaluate(model, dataset, result.split.train);
      rec.train_acc = tr.overall.accuracy;
      rec.train_f1 = tr.overall.weighted_f1;
      if (!result.split.test.empty()) {
        const EvalReport te = evaluate(model, dataset, result.split.test);
        rec.test_acc = te.overall.accuracy;
        rec.test_f1 = te.overall.weighted_f1;
      }
    }
    ck.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  ck.config = config;
  ck.dims = model.dims();
  ck.epoch = config.epochs;
  for (const auto& p : model.params().entries()) ck.params.push_back({p.name, round_f32(p.var.value())});
  ck.optimizer_steps = adam.steps();
  ck.adam_m = adam.first_moments();
  ck.adam_v = adam.second_moments();
  return result;
}

std::string to_json(const EvalReport& r) {
  json subjects = json::array();
  for (const auto& s : r.subjects) {
    subjects.push_back({{"subject", s.subject}, {"segments", s.segments}, {"acc", s.accuracy}, {"f1", s.f1}});
  }
  json j = {{"format", "hypermml-report"},
            {"dataset", r.dataset},
            {"split", r.split},
            {"class_names", r.class_names},
            {"overall", metrics_json(r.overall)},
            {"subjects", subjects},
            {"segments", r.segments},
            {"predicted", r.predicted},
            {"truth", r.truth}};
  return j.dump(2);
}

EvalReport eval_report_from_json(const std::string& text) {
  EvalReport r;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "hypermml-report") throw ConfigError("not an evaluation report");
    r.dataset = j.at("dataset").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.class_names = j.at("class_names").get<std::vector<std::string>>();
    r.overall = metrics_from(j.at("overall"));
    for (const auto& s : j.at("subjects")) {
      r.subjects.push_back({s.at("subject").get<std::string>(), s.at("segments").get<long>(), s.at("acc").get<double>(),
                            s.at("f1").get<double>()});
    }
    r.segments = j.at("segments").get<std::vector<std::size_t>>();
    r.predicted = j.at("predicted").get<std::vector<int>>();
    r.truth = j.at("truth").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return r;
}

AblationReport run_ablation(const TrainConfig& base, const Dataset& dataset, const std::vector<std::string>& variants,
                            const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ArgumentError("run_ablation: at least one seed is required");
  AblationReport report;
  for (const auto& v : variants) {
    TrainConfig cfg = base;
    cfg.model = apply_variant(base.model, v, dataset.manifest.modality_names);
    cfg.eval_every = 0;
    AblationRow row;
    row.variant = v;
    for (std::uint64_t seed : seeds) {
      cfg.seed = seed;
      const TrainResult res = train(cfg, dataset);
      const EvalReport ev = evaluate(res.checkpoint, dataset, res.split.test, cfg.split);
      row.per_seed_accuracy.push_back(ev.overall.accuracy);
      row.accuracy += ev.overall.accuracy / static_cast<double>(seeds.size());
      row.f1 += ev.overall.weighted_f1 / static_cast<double>(seeds.size());
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string to_json(const AblationReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"variant", r.variant}, {"acc", r.accuracy}, {"f1", r.f1}, {"per_seed_acc", r.per_seed_accuracy}});
  }
  return json{{"format", "hypermml-ablation"}, {"rows", rows}}.dump(2);
}

AblationReport ablation_report_from_json(const std::string& text) {
  AblationReport r;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "hypermml-ablation") throw ConfigError("not an ablation report");
    for (const auto& row : j.at("rows")) {
      r.rows.push_back({row.at("variant").get<std::string>(), row.at("acc").get<double>(), row.at("f1").get<double>(),
                        row.at("per_seed_acc").get<std::vector<double>>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed ablation report: ") + e.what());
  }
  return r;
}

}  // namespace hypermml
