#pragma once

// Segments, datasets, on-disk manifests, subject-wise splits and the
// segmentation protocols used to cut recordings into conversation segments.

#include "hypermml/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hypermml {

struct EmotionLabel {
  int class_index = 0;
  std::string class_name;

  bool operator==(const EmotionLabel&) const = default;
};

// One fixed-length slice of a dialogue with all three modalities.
struct ConversationSegment {
  std::string subject_id;
  std::string dialogue_id;
  int position = 0;
  Mat eeg;    // C x L
  Vec audio;  // d_a (GSR features in AFFEC layout)
  Vec video;  // d_v (eye-tracking features in AFFEC layout)
  EmotionLabel label;

  bool operator==(const ConversationSegment& o) const;
};

struct SegmentEntry {
  std::string subject_id;
  std::string dialogue_id;
  int position = 0;
  int label = 0;
  std::string eeg_file;  // relative to the dataset directory
  std::string audio_file;
  std::string video_file;

  bool operator==(const SegmentEntry&) const = default;
};

struct DatasetManifest {
  std::string name;
  double sampling_rate_hz = 0.0;
  int channels = 0;     // C
  int samples = 0;      // L
  int audio_dim = 0;    // d_a
  int video_dim = 0;    // d_v
  int num_classes = 0;
  std::vector<std::string> class_names;
  std::vector<std::string> modality_names = {"eeg", "audio", "video"};
  std::vector<std::string> subjects;
  std::vector<SegmentEntry> segment_index;

  bool operator==(const DatasetManifest&) const = default;
};

// Manifest plus loaded payloads; segments[i] corresponds to segment_index[i].
struct Dataset {
  DatasetManifest manifest;
  std::vector<ConversationSegment> segments;

  bool operator==(const Dataset&) const = default;
};

// Segment references are indices into Dataset::segments.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;

  bool operator==(const Split&) const = default;
};

// Segments of one dialogue (within some subset), ordered by position.
struct DialogueGroup {
  std::string subject_id;
  std::string dialogue_id;
  std::vector<std::size_t> segments;
};

// ---- segmentation ----------------------------------------------------------

// Non-overlapping windows of round(delta_t_s * rate_hz) samples in temporal
// order; the tail shorter than one window is dropped.
std::vector<Mat> segment_utterance(const Mat& signal, double delta_t_s, double rate_hz);

// num_windows windows with evenly spaced starts
// round(k * (T - window_len) / (num_windows - 1)).
std::vector<Mat> window_trial_overlapping(const Mat& trial, Eigen::Index window_len, int num_windows);

// ---- synthetic data ----------------------------------------------------------

struct SyntheticSpec {
  int num_subjects = 1;
  int dialogues_per_subject = 60;
  int segments_per_dialogue = 4;
  int num_classes = 3;
  int channels = 8;
  int samples = 128;
  int audio_dim = 16;
  int video_dim = 16;
  double sampling_rate_hz = 128.0;
  double class_separation = 5.0;
  std::uint64_t seed = 42;
  std::string name = "synthetic";
  std::vector<std::string> class_names;  // defaults to class_0..class_{K-1}
};

// Class-conditioned generator. Each dialogue carries one label (balanced
// round-robin over classes). EEG is band-limited noise whose per-band
// amplitude depends on the class, mixed by a per-subject channel matrix;
// audio/video are Gaussian clusters around class means of norm
// class_separation. Values are rounded to float32 so disk round-trips are
// exact.
Dataset make_synthetic_dataset(const SyntheticSpec& spec);

// ---- dataset adapters ----------------------------------------------------------

// Five EAV emotion classes.
std::vector<std::string> eav_class_names();
// Three-level AFFEC arousal / valence categories.
std::vector<std::string> affec_class_names();

// Stand-in with the EAV layout (42 subjects, 30 channels, 5 classes). Small
// sample length keeps dry runs fast.
SyntheticSpec eav_stub_spec(int samples = 64, double sampling_rate_hz = 128.0, int dialogues_per_subject = 5);

// One recorded trial before segmentation. Feature vectors may be given once
// (shared by every segment) or once per produced segment.
struct RawTrial {
  std::string subject_id;
  std::string dialogue_id;
  Mat eeg;  // C x T
  std::vector<Vec> audio;
  std::vector<Vec> video;
  int label = 0;
};

// EAV: a speaking stream cut into consecutive segment_seconds windows
// (20 s at 5 s gives positions 0..3).
std::vector<ConversationSegment> adapt_eav_trial(const RawTrial& trial, double rate_hz,
                                                 const std::vector<std::string>& class_names,
                                                 double segment_seconds = 5.0);

// AFFEC: each trial expanded into num_windows overlapping windows that
// inherit its label. audio/video slots carry GSR / eye-tracking features.
std::vector<ConversationSegment> adapt_affec_trial(const RawTrial& trial, Eigen::Index window_len,
                                                   const std::vector<std::string>& class_names,
                                                   int num_windows = 5);

// Builds a manifest + payload from adapted segments; file names follow the
// standard layout.
Dataset assemble_dataset(std::string name, double sampling_rate_hz, std::vector<std::string> class_names,
                         std::vector<ConversationSegment> segments,
                         std::vector<std::string> modality_names = {"eeg", "audio", "video"});

// ---- splits ----------------------------------------------------------

inline constexpr double kDefaultTestFraction = 0.3;

// Stratified by class within one subject. Whole dialogues go to one side
// when that keeps each class within one segment of its target; otherwise
// the class falls back to segment-level sampling.
Split split_subject_wise(const Dataset& dataset, const std::string& subject_id,
                         double test_fraction = kDefaultTestFraction, std::uint64_t seed = 42);

// Union of per-subject splits over every subject.
Split split_all_subjects(const Dataset& dataset, double test_fraction = kDefaultTestFraction,
                         std::uint64_t seed = 42);

// Groups a subset of segments into dialogues, in first-appearance order.
std::vector<DialogueGroup> group_dialogues(const Dataset& dataset, std::span<const std::size_t> subset);

std::vector<std::size_t> all_segment_indices(const Dataset& dataset);

// ---- persistence ----------------------------------------------------------

// manifest.json + segments/<subject>/<dialogue>/<position>.{eeg,aud,vid}.f32
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

// Little-endian float32 blobs.
void write_f32(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f32(const std::filesystem::path& path);

// Checks every type invariant; throws ShapeError / NumericError / ConfigError.
void validate(const Dataset& dataset);

}  // namespace hypermml
