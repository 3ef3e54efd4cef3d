#include "hypermml/data_model.hpp"
#include "hypermml/errors.hpp"

#include "test_util.hpp"

#include <Eigen/Cholesky>
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

using namespace hypermml;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hypermml_test_" + name);
  fs::remove_all(p);
  return p;
}

Mat ramp(Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = double(i);
  return m;
}

// Least-squares one-vs-rest linear probe; returns training accuracy.
double linear_probe_accuracy(const Mat& x, const std::vector<int>& y, int k) {
  Mat a(x.rows(), x.cols() + 1);
  a << x, Mat::Ones(x.rows(), 1);
  Mat t = Mat::Zero(x.rows(), k);
  for (std::size_t i = 0; i < y.size(); ++i) t(Eigen::Index(i), y[i]) = 1.0;
  const Mat w = (a.transpose() * a + 1e-6 * Mat::Identity(a.cols(), a.cols())).ldlt().solve(a.transpose() * t);
  const Mat s = a * w;
  int correct = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index best;
    s.row(i).maxCoeff(&best);
    correct += int(best) == y[std::size_t(i)];
  }
  return double(correct) / double(y.size());
}

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.num_subjects = 2;
  s.dialogues_per_subject = 12;
  s.segments_per_dialogue = 3;
  s.channels = 4;
  s.samples = 32;
  s.audio_dim = 5;
  s.video_dim = 3;
  return s;
}

}  // namespace

TEST(Segmentation, EavStreamGivesFourWindows) {
  const Mat x = ramp(2, 10000);
  const auto w = segment_utterance(x, 5.0, 500.0);
  ASSERT_EQ(w.size(), 4u);
  for (const auto& m : w) EXPECT_EQ(m.cols(), 2500);
}

TEST(Segmentation, ExactAndFractionalLengths) {
  const Mat x = ramp(3, 40);
  const auto one = segment_utterance(x, 4.0, 10.0);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], x);
  const Mat y = ramp(3, 100);
  const auto two = segment_utterance(y, 4.0, 10.0);
  EXPECT_EQ(two.size(), 2u);
  EXPECT_TRUE(segment_utterance(ramp(1, 10), 4.0, 10.0).empty());
}

TEST(Segmentation, LosslessUpToDroppedTail) {
  const Mat x = ramp(2, 1037);
  const auto w = segment_utterance(x, 1.0, 100.0);
  Mat joined(2, Eigen::Index(w.size()) * 100);
  for (std::size_t i = 0; i < w.size(); ++i) joined.middleCols(Eigen::Index(i) * 100, 100) = w[i];
  EXPECT_EQ(joined, x.leftCols(joined.cols()));
}

TEST(Segmentation, InvalidArguments) {
  EXPECT_THROW(segment_utterance(ramp(1, 10), 0.0, 10.0), ArgumentError);
  EXPECT_THROW(segment_utterance(ramp(1, 10), 1.0, -5.0), ArgumentError);
}

TEST(OverlappingWindows, EvenlySpacedStarts) {
  const Mat x = ramp(1, 100);
  const auto w = window_trial_overlapping(x, 60, 5);
  ASSERT_EQ(w.size(), 5u);
  const std::vector<double> starts = {0, 10, 20, 30, 40};
  for (std::size_t k = 0; k < w.size(); ++k) {
    EXPECT_EQ(w[k].cols(), 60);
    EXPECT_EQ(w[k](0, 0), starts[k]);
    EXPECT_LE(w[k](0, 59), 99.0);
  }
  const auto single = window_trial_overlapping(x, 30, 1);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0](0, 0), 0.0);
  EXPECT_THROW(window_trial_overlapping(x, 101, 2), ArgumentError);
}

TEST(Synthetic, DeterministicAndBalanced) {
  const auto a = make_synthetic_dataset(small_spec());
  const auto b = make_synthetic_dataset(small_spec());
  EXPECT_TRUE(a == b);
  std::map<int, int> counts;
  for (const auto& s : a.segments) ++counts[s.label.class_index];
  ASSERT_EQ(counts.size(), 3u);
  for (auto [k, n] : counts) EXPECT_EQ(n, counts.begin()->second);
  EXPECT_NO_THROW(validate(a));

  auto other = small_spec();
  other.seed = 43;
  EXPECT_FALSE(make_synthetic_dataset(other) == a);
}

TEST(Synthetic, SavedManifestsAreByteIdentical) {
  const auto d1 = temp_dir("bytes1"), d2 = temp_dir("bytes2");
  save_dataset(make_synthetic_dataset(small_spec()), d1);
  save_dataset(make_synthetic_dataset(small_spec()), d2);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(d1 / "manifest.json"), slurp(d2 / "manifest.json"));
  EXPECT_EQ(slurp(d1 / "segments/S1/D1/0.eeg.f32"), slurp(d2 / "segments/S1/D1/0.eeg.f32"));
}

TEST(Synthetic, SeparableAudioPassesLinearProbe) {
  SyntheticSpec s;
  s.class_separation = 5.0;
  const auto ds = make_synthetic_dataset(s);
  Mat x(Eigen::Index(ds.segments.size()), s.audio_dim);
  std::vector<int> y;
  for (std::size_t i = 0; i < ds.segments.size(); ++i) {
    x.row(Eigen::Index(i)) = ds.segments[i].audio.transpose();
    y.push_back(ds.segments[i].label.class_index);
  }
  EXPECT_GT(linear_probe_accuracy(x, y, 3), 0.9);
}

TEST(Synthetic, ZeroSeparationHasNoClassSignal) {
  SyntheticSpec s;
  s.class_separation = 0.0;
  s.dialogues_per_subject = 150;
  const auto ds = make_synthetic_dataset(s);
  std::vector<Vec> means(3, Vec::Zero(s.audio_dim));
  std::vector<int> n(3, 0);
  for (const auto& seg : ds.segments) {
    means[std::size_t(seg.label.class_index)] += seg.audio;
    ++n[std::size_t(seg.label.class_index)];
  }
  for (int k = 0; k < 3; ++k) means[std::size_t(k)] /= n[std::size_t(k)];
  // 200 draws per class: class means differ only by sampling noise.
  EXPECT_LT((means[0] - means[1]).norm(), 1.0);
  EXPECT_LT((means[1] - means[2]).norm(), 1.0);
}

TEST(Synthetic, InvalidArguments) {
  auto s = small_spec();
  s.num_classes = 0;
  EXPECT_THROW(make_synthetic_dataset(s), ArgumentError);
  s = small_spec();
  s.class_separation = -1;
  EXPECT_THROW(make_synthetic_dataset(s), ArgumentError);
}

TEST(Split, ArithmeticOnFourHundredSegments) {
  SyntheticSpec s;
  s.dialogues_per_subject = 100;
  s.segments_per_dialogue = 4;
  s.num_classes = 4;
  s.samples = 16;
  s.channels = 2;
  const auto ds = make_synthetic_dataset(s);
  ASSERT_EQ(ds.segments.size(), 400u);
  const Split sp = split_subject_wise(ds, "S1", 0.3, 7);
  EXPECT_EQ(sp.train.size(), 280u);
  EXPECT_EQ(sp.test.size(), 120u);
}

TEST(Split, DisjointStratifiedDeterministic) {
  const auto ds = make_synthetic_dataset(small_spec());
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Split a = split_subject_wise(ds, "S2", 0.3, seed);
    EXPECT_EQ(a, split_subject_wise(ds, "S2", 0.3, seed));
    std::set<std::size_t> tr(a.train.begin(), a.train.end());
    for (auto i : a.test) EXPECT_EQ(tr.count(i), 0u);
    EXPECT_FALSE(a.train.empty());
    EXPECT_FALSE(a.test.empty());
    std::map<int, int> n, t;
    for (auto i : a.train) EXPECT_EQ(ds.segments[i].subject_id, "S2");
    for (auto i : a.train) ++n[ds.segments[i].label.class_index];
    for (auto i : a.test) ++t[ds.segments[i].label.class_index];
    for (int k = 0; k < 3; ++k) {
      EXPECT_GT(n[k], 0);
      const double total = n[k] + t[k];
      EXPECT_LE(std::abs(t[k] - 0.3 * total), 1.0);
    }
  }
}

TEST(Split, KeepsWholeDialoguesWhenPossible) {
  const auto ds = make_synthetic_dataset(small_spec());
  const Split a = split_subject_wise(ds, "S1", 0.25, 5);
  std::map<std::string, std::set<int>> side;
  for (auto i : a.train) side[ds.segments[i].dialogue_id].insert(0);
  for (auto i : a.test) side[ds.segments[i].dialogue_id].insert(1);
  // 4 dialogues of 3 segments per class, 25% test: one whole dialogue each.
  for (const auto& [d, s] : side) EXPECT_EQ(s.size(), 1u) << d;
}

TEST(Split, Errors) {
  const auto ds = make_synthetic_dataset(small_spec());
  EXPECT_THROW(split_subject_wise(ds, "nobody", 0.3, 1), LookupError);
  EXPECT_THROW(split_subject_wise(ds, "S1", 0.0, 1), ArgumentError);
  auto tiny = small_spec();
  tiny.num_subjects = 1;
  tiny.dialogues_per_subject = 3;
  tiny.segments_per_dialogue = 1;
  EXPECT_THROW(split_subject_wise(make_synthetic_dataset(tiny), "S1", 0.3, 1), ArgumentError);
}

TEST(Split, AllSubjectsIsUnionOfSubjectSplits) {
  const auto ds = make_synthetic_dataset(small_spec());
  const Split all = split_all_subjects(ds, 0.3, 9);
  EXPECT_EQ(all.train.size() + all.test.size(), ds.segments.size());
}

TEST(Persistence, RoundTrip) {
  const auto dir = temp_dir("roundtrip");
  const auto ds = make_synthetic_dataset(small_spec());
  save_dataset(ds, dir);
  const auto back = load_dataset(dir);
  EXPECT_TRUE(back.manifest == ds.manifest);
  EXPECT_TRUE(back == ds);
}

TEST(Persistence, PayloadShapeMismatchDetected) {
  const auto dir = temp_dir("shape");
  auto spec = eav_stub_spec(16);
  spec.num_subjects = 1;
  spec.dialogues_per_subject = 5;
  const auto ds = make_synthetic_dataset(spec);
  save_dataset(ds, dir);
  // 31 rows of samples where the header declares 30 channels.
  const auto& e = ds.manifest.segment_index[0];
  std::vector<double> extra(std::size_t(31 * 16), 0.5);
  write_f32(dir / e.eeg_file, extra);
  EXPECT_THROW(load_dataset(dir), ShapeError);
}

TEST(Persistence, MissingFilesAndSchemaErrors) {
  EXPECT_THROW(load_dataset(temp_dir("missing")), LookupError);
  const auto dir = temp_dir("schema");
  fs::create_directories(dir);
  std::ofstream(dir / "manifest.json") << "{\"format\": \"something-else\"}";
  EXPECT_THROW(load_dataset(dir), ConfigError);
  const auto dir2 = temp_dir("gone");
  save_dataset(make_synthetic_dataset(small_spec()), dir2);
  fs::remove(dir2 / "segments/S1/D1/0.aud.f32");
  EXPECT_THROW(load_dataset(dir2), LookupError);
}

TEST(Adapters, EavLayoutDimensions) {
  const auto spec = eav_stub_spec();
  EXPECT_EQ(spec.num_subjects, 42);
  EXPECT_EQ(spec.channels, 30);
  EXPECT_EQ(spec.num_classes, 5);
  EXPECT_EQ(eav_class_names(), (std::vector<std::string>{"Neutral", "Anger", "Happy", "Sad", "Calm"}));
}

TEST(Adapters, EavTrialBecomesFourPositions) {
  RawTrial t;
  t.subject_id = "7";
  t.dialogue_id = "trial12";
  t.eeg = ramp(30, 20 * 100);
  t.audio = {Vec::Ones(4)};
  t.video = {Vec::Zero(2)};
  t.label = 2;
  const auto segs = adapt_eav_trial(t, 100.0, eav_class_names());
  ASSERT_EQ(segs.size(), 4u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(segs[std::size_t(i)].position, i);
    EXPECT_EQ(segs[std::size_t(i)].eeg.cols(), 500);
    EXPECT_EQ(segs[std::size_t(i)].label.class_name, "Happy");
  }
  const auto ds = assemble_dataset("eav", 100.0, eav_class_names(), segs);
  EXPECT_NO_THROW(validate(ds));
  EXPECT_EQ(ds.manifest.channels, 30);
}

TEST(Adapters, AffecTrialExpandsFiveFold) {
  RawTrial t;
  t.subject_id = "p1";
  t.dialogue_id = "t1";
  t.eeg = ramp(4, 100);
  t.audio = {Vec::Ones(3)};
  t.video = {Vec::Ones(2)};
  t.label = 1;
  const auto segs = adapt_affec_trial(t, 60, affec_class_names());
  ASSERT_EQ(segs.size(), 5u);
  for (const auto& s : segs) EXPECT_EQ(s.label.class_index, 1);
  EXPECT_EQ(segs[4].eeg(0, 0), 40.0);
}

TEST(Validation, RejectsNonFiniteEeg) {
  auto ds = make_synthetic_dataset(small_spec());
  ds.segments[3].eeg(0, 0) = std::nan("");
  EXPECT_THROW(validate(ds), NumericError);
}
