#include "hypermml/data_model.hpp"

#include "hypermml/errors.hpp"
#include "hypermml/params.hpp"
#include "hypermml/spectral.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <unordered_map>

namespace hypermml {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool same_matrix(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same_vector(const Vec& a, const Vec& b) { return a.size() == b.size() && (a.size() == 0 || a == b); }

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

std::string segment_stem(const std::string& subject, const std::string& dialogue, int position) {
  return "segments/" + subject + "/" + dialogue + "/" + std::to_string(position);
}

EmotionLabel make_label(int index, const std::vector<std::string>& names) {
  if (index < 0 || index >= static_cast<int>(names.size())) {
    throw ArgumentError("label " + std::to_string(index) + " outside class list");
  }
  return {index, names[static_cast<std::size_t>(index)]};
}

const Vec& pick_features(const std::vector<Vec>& features, std::size_t i, std::size_t count, const char* what) {
  if (features.size() == 1) return features[0];
  if (features.size() == count) return features[i];
  throw ShapeError(std::string(what) + ": expected 1 or " + std::to_string(count) + " feature vectors, got " +
                   std::to_string(features.size()));
}

}  // namespace

bool ConversationSegment::operator==(const ConversationSegment& o) const {
  return subject_id == o.subject_id && dialogue_id == o.dialogue_id && position == o.position &&
         label == o.label && same_matrix(eeg, o.eeg) && same_vector(audio, o.audio) &&
         same_vector(video, o.video);
}

// ---------------------------------------------------------------------------

std::vector<Mat> segment_utterance(const Mat& signal, double delta_t_s, double rate_hz) {
  if (!(delta_t_s > 0.0) || !(rate_hz > 0.0)) {
    throw ArgumentError("segment_utterance: delta_t and rate must be positive");
  }
  const double samples = delta_t_s * rate_hz;
  const auto L = static_cast<Eigen::Index>(std::llround(samples));
  if (L < 1) throw ArgumentError("segment_utterance: window shorter than one sample");
  const Eigen::Index count = signal.cols() / L;
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index k = 0; k < count; ++k) out.emplace_back(signal.middleCols(k * L, L));
  return out;
}

std::vector<Mat> window_trial_overlapping(const Mat& trial, Eigen::Index window_len, int num_windows) {
  if (num_windows < 1) throw ArgumentError("window_trial_overlapping: num_windows must be >= 1");
  if (window_len < 1) throw ArgumentError("window_trial_overlapping: window_len must be >= 1");
  const Eigen::Index T = trial.cols();
  if (window_len > T) throw ArgumentError("window_trial_overlapping: window longer than trial");
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(num_windows));
  for (int k = 0; k < num_windows; ++k) {
    Eigen::Index start = 0;
    if (num_windows > 1) {
      start = static_cast<Eigen::Index>(std::llround(static_cast<double>(k) * static_cast<double>(T - window_len) /
                                                     static_cast<double>(num_windows - 1)));
    }
    out.emplace_back(trial.middleCols(start, window_len));
  }
  return out;
}

// ---------------------------------------------------------------------------

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.num_subjects < 1 || spec.dialogues_per_subject < 1 || spec.segments_per_dialogue < 1 ||
      spec.num_classes < 1 || spec.channels < 1 || spec.samples < 2 || spec.audio_dim < 1 ||
      spec.video_dim < 1) {
    throw ArgumentError("make_synthetic_dataset: all counts must be >= 1 (samples >= 2)");
  }
  if (!(spec.class_separation >= 0.0)) throw ArgumentError("make_synthetic_dataset: class_separation must be >= 0");
  if (!(spec.sampling_rate_hz > 0.0)) throw ArgumentError("make_synthetic_dataset: sampling rate must be positive");

  std::vector<std::string> class_names = spec.class_names;
  if (class_names.empty()) {
    for (int k = 0; k < spec.num_classes; ++k) class_names.push_back("class_" + std::to_string(k));
  }
  if (static_cast<int>(class_names.size()) != spec.num_classes) {
    throw ArgumentError("make_synthetic_dataset: class_names length differs from num_classes");
  }

  std::mt19937_64 rng(spec.seed);
  const int K = spec.num_classes;
  const int C = spec.channels;
  const int L = spec.samples;
  const double sep = spec.class_separation;

  // Per-class band amplitude profile and feature-cluster centres.
  std::vector<std::array<double, spectral::kNumBands>> band_amp(static_cast<std::size_t>(K));
  for (auto& amps : band_amp) {
    for (auto& a : amps) a = std::exp(0.2 * sep * standard_normal(rng));
  }
  auto class_means = [&](int dim) {
    std::vector<Vec> means;
    for (int k = 0; k < K; ++k) {
      Vec u(dim);
      for (int i = 0; i < dim; ++i) u(i) = standard_normal(rng);
      const double n = u.norm();
      means.push_back(n > 0.0 ? Vec(u * (sep / n)) : Vec(Vec::Zero(dim)));
    }
    return means;
  };
  const std::vector<Vec> audio_means = class_means(spec.audio_dim);
  const std::vector<Vec> video_means = class_means(spec.video_dim);

  const auto freq = spectral::frequency_axis(L, spec.sampling_rate_hz);
  const auto masks = spectral::band_masks(freq);
  // Spectral gain per class and bin; out-of-band bins keep a weak floor.
  std::vector<std::vector<double>> gain(static_cast<std::size_t>(K), std::vector<double>(freq.size(), 0.3));
  for (int k = 0; k < K; ++k) {
    for (std::size_t b = 0; b < spectral::kNumBands; ++b) {
      for (std::size_t f = 0; f < freq.size(); ++f) {
        if (masks.masks[b][f] > 0.0) gain[static_cast<std::size_t>(k)][f] = band_amp[static_cast<std::size_t>(k)][b];
      }
    }
  }

  std::vector<ConversationSegment> segments;
  for (int s = 0; s < spec.num_subjects; ++s) {
    const std::string subject = "S" + std::to_string(s + 1);
    Mat mixing = Mat::Identity(C, C);
    for (int i = 0; i < C * C; ++i) mixing.data()[i] += 0.2 * standard_normal(rng) / std::sqrt(double(C));

    for (int d = 0; d < spec.dialogues_per_subject; ++d) {
      const std::string dialogue = "D" + std::to_string(d + 1);
      const int label = (s * spec.dialogues_per_subject + d) % K;
      for (int p = 0; p < spec.segments_per_dialogue; ++p) {
        ConversationSegment seg;
        seg.subject_id = subject;
        seg.dialogue_id = dialogue;
        seg.position = p;
        seg.label = {label, class_names[static_cast<std::size_t>(label)]};

        Mat noise(C, L);
        for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = standard_normal(rng);
        CMat coeffs = spectral::rfft_rows(noise);
        coeffs = spectral::apply_mask(coeffs, gain[static_cast<std::size_t>(label)]);
        Mat eeg = mixing * spectral::irfft_rows(coeffs, L);
        seg.eeg = (eeg * 10.0).unaryExpr(&round_f32);

        seg.audio = Vec(spec.audio_dim);
        for (int i = 0; i < spec.audio_dim; ++i) {
          seg.audio(i) = round_f32(audio_means[static_cast<std::size_t>(label)](i) + standard_normal(rng));
        }
        seg.video = Vec(spec.video_dim);
        for (int i = 0; i < spec.video_dim; ++i) {
          seg.video(i) = round_f32(video_means[static_cast<std::size_t>(label)](i) + standard_normal(rng));
        }
        segments.push_back(std::move(seg));
      }
    }
  }
  return assemble_dataset(spec.name, spec.sampling_rate_hz, class_names, std::move(segments));
}

std::vector<std::string> eav_class_names() { return {"Neutral", "Anger", "Happy", "Sad", "Calm"}; }

std::vector<std::string> affec_class_names() { return {"Low", "Medium", "High"}; }

SyntheticSpec eav_stub_spec(int samples, double sampling_rate_hz, int dialogues_per_subject) {
  SyntheticSpec spec;
  spec.name = "eav-stub";
  spec.num_subjects = 42;
  spec.dialogues_per_subject = dialogues_per_subject;
  spec.segments_per_dialogue = 4;
  spec.num_classes = 5;
  spec.class_names = eav_class_names();
  spec.channels = 30;
  spec.samples = samples;
  spec.sampling_rate_hz = sampling_rate_hz;
  spec.audio_dim = 16;
  spec.video_dim = 16;
  return spec;
}

std::vector<ConversationSegment> adapt_eav_trial(const RawTrial& trial, double rate_hz,
                                                 const std::vector<std::string>& class_names,
                                                 double segment_seconds) {
  const auto windows = segment_utterance(trial.eeg, segment_seconds, rate_hz);
  std::vector<ConversationSegment> out;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    ConversationSegment seg;
    seg.subject_id = trial.subject_id;
    seg.dialogue_id = trial.dialogue_id;
    seg.position = static_cast<int>(i);
    seg.eeg = windows[i];
    seg.audio = pick_features(trial.audio, i, windows.size(), "adapt_eav_trial audio");
    seg.video = pick_features(trial.video, i, windows.size(), "adapt_eav_trial video");
    seg.label = make_label(trial.label, class_names);
    out.push_back(std::move(seg));
  }
  return out;
}

std::vector<ConversationSegment> adapt_affec_trial(const RawTrial& trial, Eigen::Index window_len,
                                                   const std::vector<std::string>& class_names, int num_windows) {
  const auto windows = window_trial_overlapping(trial.eeg, window_len, num_windows);
  std::vector<ConversationSegment> out;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    ConversationSegment seg;
    seg.subject_id = trial.subject_id;
    seg.dialogue_id = trial.dialogue_id;
    seg.position = static_cast<int>(i);
    seg.eeg = windows[i];
    seg.audio = pick_features(trial.audio, i, windows.size(), "adapt_affec_trial gsr");
    seg.video = pick_features(trial.video, i, windows.size(), "adapt_affec_trial eye");
    seg.label = make_label(trial.label, class_names);
    out.push_back(std::move(seg));
  }
  return out;
}

Dataset assemble_dataset(std::string name, double sampling_rate_hz, std::vector<std::string> class_names,
                         std::vector<ConversationSegment> segments, std::vector<std::string> modality_names) {
  if (segments.empty()) throw ArgumentError("assemble_dataset: no segments");
  Dataset ds;
  auto& m = ds.manifest;
  m.name = std::move(name);
  m.sampling_rate_hz = sampling_rate_hz;
  m.channels = static_cast<int>(segments[0].eeg.rows());
  m.samples = static_cast<int>(segments[0].eeg.cols());
  m.audio_dim = static_cast<int>(segments[0].audio.size());
  m.video_dim = static_cast<int>(segments[0].video.size());
  m.num_classes = static_cast<int>(class_names.size());
  m.class_names = std::move(class_names);
  m.modality_names = std::move(modality_names);
  std::set<std::string> seen;
  for (const auto& seg : segments) {
    if (seen.insert(seg.subject_id).second) m.subjects.push_back(seg.subject_id);
    const std::string stem = segment_stem(seg.subject_id, seg.dialogue_id, seg.position);
    m.segment_index.push_back(SegmentEntry{seg.subject_id, seg.dialogue_id, seg.position, seg.label.class_index,
                                           stem + ".eeg.f32", stem + ".aud.f32", stem + ".vid.f32"});
  }
  ds.segments = std::move(segments);
  validate(ds);
  return ds;
}

// ---------------------------------------------------------------------------

void validate(const Dataset& ds) {
  const auto& m = ds.manifest;
  if (!(m.sampling_rate_hz > 0.0)) throw ConfigError("manifest: sampling_rate_hz must be positive");
  if (m.channels < 1 || m.samples < 1 || m.audio_dim < 1 || m.video_dim < 1 || m.num_classes < 1) {
    throw ConfigError("manifest: dimensions must be positive");
  }
  if (static_cast<int>(m.class_names.size()) != m.num_classes) {
    throw ConfigError("manifest: class_names length differs from num_classes");
  }
  if (m.modality_names.size() != 3) throw ConfigError("manifest: exactly three modality names expected");
  if (ds.segments.size() != m.segment_index.size()) throw ConfigError("dataset: segment count mismatch");

  std::map<std::pair<std::string, std::string>, std::vector<int>> positions;
  for (std::size_t i = 0; i < ds.segments.size(); ++i) {
    const auto& s = ds.segments[i];
    const auto& e = m.segment_index[i];
    if (s.subject_id != e.subject_id || s.dialogue_id != e.dialogue_id || s.position != e.position ||
        s.label.class_index != e.label) {
      throw ConfigError("dataset: segment " + std::to_string(i) + " disagrees with its manifest entry");
    }
    if (s.eeg.rows() != m.channels || s.eeg.cols() != m.samples) {
      throw ShapeError("segment " + e.eeg_file + ": eeg is " + std::to_string(s.eeg.rows()) + "x" +
                       std::to_string(s.eeg.cols()) + ", manifest declares " + std::to_string(m.channels) + "x" +
                       std::to_string(m.samples));
    }
    if (s.audio.size() != m.audio_dim || s.video.size() != m.video_dim) {
      throw ShapeError("segment " + e.eeg_file + ": audio/video length differs from manifest");
    }
    if (!s.eeg.allFinite() || !s.audio.allFinite() || !s.video.allFinite()) {
      throw NumericError("segment " + e.eeg_file + ": non-finite values");
    }
    if (s.label.class_index < 0 || s.label.class_index >= m.num_classes) {
      throw ConfigError("segment " + e.eeg_file + ": label out of range");
    }
    if (std::find(m.subjects.begin(), m.subjects.end(), s.subject_id) == m.subjects.end()) {
      throw ConfigError("segment " + e.eeg_file + ": subject not listed in manifest");
    }
    positions[{s.subject_id, s.dialogue_id}].push_back(s.position);
  }
  for (auto& [key, pos] : positions) {
    std::sort(pos.begin(), pos.end());
    for (std::size_t i = 0; i < pos.size(); ++i) {
      if (pos[i] != static_cast<int>(i)) {
        throw ConfigError("dialogue " + key.first + "/" + key.second + ": positions are not contiguous from 0");
      }
    }
  }
}

std::vector<std::size_t> all_segment_indices(const Dataset& dataset) {
  std::vector<std::size_t> idx(dataset.segments.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

std::vector<DialogueGroup> group_dialogues(const Dataset& dataset, std::span<const std::size_t> subset) {
  std::vector<DialogueGroup> groups;
  std::map<std::pair<std::string, std::string>, std::size_t> where;
  for (std::size_t i : subset) {
    const auto& s = dataset.segments.at(i);
    auto key = std::make_pair(s.subject_id, s.dialogue_id);
    auto it = where.find(key);
    if (it == where.end()) {
      where.emplace(key, groups.size());
      groups.push_back(DialogueGroup{s.subject_id, s.dialogue_id, {i}});
    } else {
      groups[it->second].segments.push_back(i);
    }
  }
  for (auto& g : groups) {
    std::sort(g.segments.begin(), g.segments.end(), [&](std::size_t a, std::size_t b) {
      return dataset.segments[a].position < dataset.segments[b].position;
    });
  }
  return groups;
}

// ---------------------------------------------------------------------------

Split split_subject_wise(const Dataset& dataset, const std::string& subject_id, double test_fraction,
                         std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ArgumentError("split_subject_wise: test_fraction must lie in (0, 1)");
  }
  const auto& subjects = dataset.manifest.subjects;
  if (std::find(subjects.begin(), subjects.end(), subject_id) == subjects.end()) {
    throw LookupError("split_subject_wise: unknown subject " + subject_id);
  }
  std::mt19937_64 rng(seed);

  std::vector<std::size_t> own;
  for (std::size_t i = 0; i < dataset.segments.size(); ++i) {
    if (dataset.segments[i].subject_id == subject_id) own.push_back(i);
  }
  const auto dialogues = group_dialogues(dataset, own);

  const int K = dataset.manifest.num_classes;
  std::vector<std::vector<std::size_t>> pure(static_cast<std::size_t>(K));   // dialogue ids per class
  std::vector<std::vector<std::size_t>> loose(static_cast<std::size_t>(K));  // segments from mixed dialogues
  std::vector<std::size_t> class_count(static_cast<std::size_t>(K), 0);
  for (std::size_t d = 0; d < dialogues.size(); ++d) {
    const auto& segs = dialogues[d].segments;
    const int first = dataset.segments[segs[0]].label.class_index;
    bool uniform = true;
    for (std::size_t i : segs) {
      const int y = dataset.segments[i].label.class_index;
      ++class_count[static_cast<std::size_t>(y)];
      uniform = uniform && y == first;
    }
    if (uniform) {
      pure[static_cast<std::size_t>(first)].push_back(d);
    } else {
      for (std::size_t i : segs) loose[static_cast<std::size_t>(dataset.segments[i].label.class_index)].push_back(i);
    }
  }

  Split split;
  split.seed = seed;
  for (int k = 0; k < K; ++k) {
    const std::size_t n = class_count[static_cast<std::size_t>(k)];
    if (n == 0) continue;
    if (n < 2) {
      throw ArgumentError("split_subject_wise: class " + std::to_string(k) + " of subject " + subject_id +
                          " has fewer than 2 segments");
    }
    auto target = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    target = std::clamp<std::size_t>(target, 1, n - 1);

    auto units = pure[static_cast<std::size_t>(k)];
    std::shuffle(units.begin(), units.end(), rng);
    auto extra = loose[static_cast<std::size_t>(k)];
    std::shuffle(extra.begin(), extra.end(), rng);

    // Whole dialogues first, as long as they do not overshoot the target.
    std::vector<std::size_t> test;
    std::vector<std::size_t> rest;  // segments still eligible for the test side
    for (std::size_t d : units) {
      const auto& segs = dialogues[d].segments;
      if (test.size() + segs.size() <= target) {
        test.insert(test.end(), segs.begin(), segs.end());
      } else {
        rest.insert(rest.end(), segs.begin(), segs.end());
      }
    }
    // Shortfall: loose segments, then segments cut from whole dialogues.
    rest.insert(rest.begin(), extra.begin(), extra.end());
    std::size_t r = 0;
    while (test.size() < target && r < rest.size()) test.push_back(rest[r++]);
    std::set<std::size_t> in_test(test.begin(), test.end());
    for (std::size_t d : units) {
      for (std::size_t i : dialogues[d].segments) {
        if (!in_test.count(i)) split.train.push_back(i);
      }
    }
    for (std::size_t i : extra) {
      if (!in_test.count(i)) split.train.push_back(i);
    }
    split.test.insert(split.test.end(), test.begin(), test.end());
  }
  if (split.train.empty() || split.test.empty()) {
    throw ArgumentError("split_subject_wise: subject " + subject_id + " has too few segments to split");
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Split split_all_subjects(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  Split out;
  out.seed = seed;
  for (std::size_t s = 0; s < dataset.manifest.subjects.size(); ++s) {
    const Split one = split_subject_wise(dataset, dataset.manifest.subjects[s], test_fraction,
                                         seed + 0x9E3779B97F4A7C15ULL * (s + 1));
    out.train.insert(out.train.end(), one.train.begin(), one.train.end());
    out.test.insert(out.test.end(), one.test.begin(), one.test.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// ---------------------------------------------------------------------------

void write_f32(const fs::path& path, std::span<const double> values) {
  fs::create_directories(path.parent_path());
  std::vector<char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    if constexpr (std::endian::native == std::endian::big) {
      bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
    }
    std::memcpy(bytes.data() + 4 * i, &bits, 4);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LookupError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<double> read_f32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("missing file " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0) throw ShapeError(path.string() + ": size is not a multiple of 4 bytes");
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) {
      bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
    }
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  validate(dataset);
  const auto& m = dataset.manifest;
  json j;
  j["format"] = "hypermml-dataset";
  j["version"] = 1;
  j["name"] = m.name;
  j["sampling_rate_hz"] = m.sampling_rate_hz;
  j["channels"] = m.channels;
  j["samples"] = m.samples;
  j["audio_dim"] = m.audio_dim;
  j["video_dim"] = m.video_dim;
  j["num_classes"] = m.num_classes;
  j["class_names"] = m.class_names;
  j["modality_names"] = m.modality_names;
  j["subjects"] = m.subjects;
  json segs = json::array();
  for (std::size_t i = 0; i < m.segment_index.size(); ++i) {
    const auto& e = m.segment_index[i];
    const auto& s = dataset.segments[i];
    segs.push_back({{"subject", e.subject_id},
                    {"dialogue", e.dialogue_id},
                    {"position", e.position},
                    {"label", e.label},
                    {"eeg", e.eeg_file},
                    {"audio", e.audio_file},
                    {"video", e.video_file}});
    write_f32(dir / e.eeg_file, std::span<const double>(s.eeg.data(), static_cast<std::size_t>(s.eeg.size())));
    write_f32(dir / e.audio_file, std::span<const double>(s.audio.data(), static_cast<std::size_t>(s.audio.size())));
    write_f32(dir / e.video_file, std::span<const double>(s.video.data(), static_cast<std::size_t>(s.video.size())));
  }
  j["segments"] = std::move(segs);
  fs::create_directories(dir);
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw LookupError("cannot write " + (dir / "manifest.json").string());
  out << j.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw LookupError("missing manifest " + manifest_path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(manifest_path.string() + ": " + e.what());
  }

  Dataset ds;
  auto& m = ds.manifest;
  try {
    if (j.value("format", std::string()) != "hypermml-dataset") throw ConfigError("manifest: unexpected format tag");
    m.name = j.at("name").get<std::string>();
    m.sampling_rate_hz = j.at("sampling_rate_hz").get<double>();
    m.channels = j.at("channels").get<int>();
    m.samples = j.at("samples").get<int>();
    m.audio_dim = j.at("audio_dim").get<int>();
    m.video_dim = j.at("video_dim").get<int>();
    m.num_classes = j.at("num_classes").get<int>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (j.contains("modality_names")) m.modality_names = j.at("modality_names").get<std::vector<std::string>>();
    m.subjects = j.at("subjects").get<std::vector<std::string>>();
    for (const auto& s : j.at("segments")) {
      m.segment_index.push_back(SegmentEntry{s.at("subject").get<std::string>(), s.at("dialogue").get<std::string>(),
                                             s.at("position").get<int>(), s.at("label").get<int>(),
                                             s.at("eeg").get<std::string>(), s.at("audio").get<std::string>(),
                                             s.at("video").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(manifest_path.string() + ": schema mismatch: " + e.what());
  }
  if (static_cast<int>(m.class_names.size()) != m.num_classes) {
    throw ConfigError("manifest: class_names length differs from num_classes");
  }

  const auto C = static_cast<std::size_t>(m.channels);
  const auto L = static_cast<std::size_t>(m.samples);
  for (const auto& e : m.segment_index) {
    ConversationSegment seg;
    seg.subject_id = e.subject_id;
    seg.dialogue_id = e.dialogue_id;
    seg.position = e.position;
    if (e.label < 0 || e.label >= m.num_classes) throw ConfigError("manifest: label out of range in " + e.eeg_file);
    seg.label = {e.label, m.class_names[static_cast<std::size_t>(e.label)]};

    const auto eeg = read_f32(dir / e.eeg_file);
    if (eeg.size() != C * L) {
      throw ShapeError(e.eeg_file + ": holds " + std::to_string(eeg.size()) + " values, manifest declares " +
                       std::to_string(C) + "x" + std::to_string(L));
    }
    seg.eeg = Eigen::Map<const Mat>(eeg.data(), m.channels, m.samples);
    const auto aud = read_f32(dir / e.audio_file);
    if (aud.size() != static_cast<std::size_t>(m.audio_dim)) throw ShapeError(e.audio_file + ": length mismatch");
    seg.audio = Eigen::Map<const Vec>(aud.data(), m.audio_dim);
    const auto vid = read_f32(dir / e.video_file);
    if (vid.size() != static_cast<std::size_t>(m.video_dim)) throw ShapeError(e.video_file + ": length mismatch");
    seg.video = Eigen::Map<const Vec>(vid.data(), m.video_dim);
    ds.segments.push_back(std::move(seg));
  }
  validate(ds);
  return ds;
}

}  // namespace hypermml
