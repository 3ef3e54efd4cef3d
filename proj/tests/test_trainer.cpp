#include "hypermml/errors.hpp"
#include "hypermml/gradcheck.hpp"
#include "hypermml/report.hpp"
#include "hypermml/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace hypermml;
namespace fs = std::filesystem;

namespace {

const Dataset& tiny_dataset() {
  static const Dataset ds = [] {
    SyntheticSpec s;
    s.num_subjects = 2;
    s.dialogues_per_subject = 6;
    s.segments_per_dialogue = 3;
    s.channels = 4;
    s.samples = 32;
    s.sampling_rate_hz = 64.0;
    s.audio_dim = 5;
    s.video_dim = 4;
    return make_synthetic_dataset(s);
  }();
  return ds;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 4;
  c.model.d = 8;
  c.model.d_k = 4;
  c.model.transformer_model_dim = 8;
  c.learning_rate = 1e-3;
  return c;
}

}  // namespace

TEST(TrainConfig, DefaultsMatchPublishedSettings) {
  const TrainConfig c;
  EXPECT_EQ(c.learning_rate, 1e-4);
  EXPECT_EQ(c.epochs, 40);
  EXPECT_EQ(c.batch_size, 16);
  EXPECT_EQ(c.model.dropout, 0.5);
  EXPECT_EQ(c.lambda, 1e-5);
  EXPECT_EQ(c.seed, 42u);
  const TrainConfig back = train_config_from_json(to_json(c));
  EXPECT_EQ(back.learning_rate, 1e-4);
  EXPECT_EQ(back.epochs, 40);
  EXPECT_EQ(back.model.dropout, 0.5);
}

TEST(TrainConfig, JsonRoundTripAndErrors) {
  TrainConfig c = tiny_config();
  c.model.intra_mca = false;
  c.model.modalities = {Modality::audio, Modality::video};
  c.split = "subject=S1";
  const TrainConfig back = train_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(train_config_from_json("{\"epochs\": 3}").batch_size, 16);
  EXPECT_THROW(train_config_from_json("{\"epoch\": 3}"), ConfigError);
  EXPECT_THROW(train_config_from_json("{\"epochs\": \"x\"}"), ConfigError);
  EXPECT_THROW(train_config_from_json("[1, 2"), ConfigError);
  EXPECT_THROW(train_config_from_json("{\"modalities\": [\"smell\"]}"), ConfigError);
}

TEST(Variants, FlagsAndModalitySubsets) {
  const ModelConfig base;
  const ModelConfig both = apply_variant(base, "no_intra_mca+no_inter_mca");
  EXPECT_FALSE(both.intra_mca);
  EXPECT_FALSE(both.inter_mca);
  EXPECT_TRUE(both.node_weights);
  const ModelConfig off = apply_variant(base, "no_node_weights+no_hyperedge_weights");
  EXPECT_FALSE(off.node_weights);
  EXPECT_FALSE(off.hyperedge_weights);
  EXPECT_EQ(apply_variant(base, "eeg").modalities, std::vector<Modality>{Modality::eeg});
  EXPECT_EQ(apply_variant(base, "gsr", {"eeg", "gsr", "eye"}).modalities, std::vector<Modality>{Modality::audio});
  EXPECT_EQ(apply_variant(base, "full").modalities.size(), 3u);
  EXPECT_THROW(apply_variant(base, "no_everything"), ArgumentError);
}

TEST(Splits, SpecParsing) {
  const auto& ds = tiny_dataset();
  const Split full = resolve_split(ds, "full", 0.3, 1);
  EXPECT_TRUE(full.train.empty());
  EXPECT_EQ(full.test.size(), ds.segments.size());
  const Split one = resolve_split(ds, "subject=S2", 0.3, 1);
  for (auto i : one.train) EXPECT_EQ(ds.segments[i].subject_id, "S2");
  EXPECT_THROW(resolve_split(ds, "half", 0.3, 1), ArgumentError);
  EXPECT_THROW(resolve_split(ds, "subject=S9", 0.3, 1), LookupError);
}

TEST(Model, InitialLossNearLogK) {
  const auto& ds = tiny_dataset();
  const TrainConfig c = tiny_config();
  HyperMml model(c.model, ModelDims::from(ds), 5);
  const auto all = all_segment_indices(ds);
  const auto groups = group_dialogues(ds, all);
  const auto out = model.forward(ds, groups);
  const double loss = regularized_loss(out.logits, out.labels, {}, 0.0).item();
  EXPECT_NEAR(loss, std::log(3.0), 0.15 * std::log(3.0));
  EXPECT_EQ(out.fused.cols(), 3 * 8);
  EXPECT_EQ(out.band_weights.rows(), std::ptrdiff_t(all.size()));
}

TEST(Model, SingleModalityUsesDegenerateHypergraph) {
  const auto& ds = tiny_dataset();
  TrainConfig c = tiny_config();
  c.model = apply_variant(c.model, "video");
  HyperMml model(c.model, ModelDims::from(ds), 5);
  EXPECT_EQ(model.abema(), nullptr);
  EXPECT_EQ(model.hypergraph().config().modalities, 1);
  const auto all = all_segment_indices(ds);
  const auto out = model.forward(ds, group_dialogues(ds, all));
  EXPECT_EQ(out.fused.cols(), 8);
}

TEST(Training, DeterministicHistory) {
  const auto& ds = tiny_dataset();
  const auto a = train(tiny_config(), ds);
  const auto b = train(tiny_config(), ds);
  ASSERT_EQ(a.checkpoint.history.size(), 2u);
  EXPECT_EQ(a.checkpoint.history, b.checkpoint.history);
  EXPECT_EQ(a.split, b.split);
  for (std::size_t i = 0; i < a.checkpoint.params.size(); ++i) {
    EXPECT_EQ(a.checkpoint.params[i].value, b.checkpoint.params[i].value);
  }
  auto other = tiny_config();
  other.seed = 43;
  EXPECT_NE(train(other, ds).checkpoint.history, a.checkpoint.history);
}

TEST(Training, CheckpointEchoesConfig) {
  const auto& ds = tiny_dataset();
  const auto r = train(tiny_config(), ds);
  const auto& ck = r.checkpoint;
  EXPECT_EQ(ck.config.epochs, 2);
  EXPECT_EQ(ck.config.model.dropout, 0.5);
  EXPECT_EQ(ck.epoch, 2);
  EXPECT_GT(ck.optimizer_steps, 0);
  EXPECT_EQ(ck.adam_m.size(), ck.params.size());
  for (const auto& p : ck.params) {
    EXPECT_EQ(p.value, p.value.cast<float>().cast<double>()) << p.name;
  }
}

TEST(Training, CheckpointRoundTripReproducesEvaluation) {
  const auto& ds = tiny_dataset();
  const auto r = train(tiny_config(), ds);
  const fs::path dir = fs::temp_directory_path() / "hypermml_test_ckpt";
  fs::remove_all(dir);
  save_checkpoint(r.checkpoint, dir);
  const Checkpoint back = load_checkpoint(dir);
  EXPECT_EQ(back.history, r.checkpoint.history);
  EXPECT_EQ(to_json(back.config), to_json(r.checkpoint.config));
  EXPECT_TRUE(back.dims == r.checkpoint.dims);
  const EvalReport a = evaluate(r.checkpoint, ds, r.split.test, "test");
  const EvalReport b = evaluate(back, ds, r.split.test, "test");
  EXPECT_EQ(to_json(a), to_json(b));
  const EvalReport c = evaluate(back, ds, r.split.test, "test");
  EXPECT_EQ(to_json(b), to_json(c));
  EXPECT_THROW(load_checkpoint(dir / "nothing"), LookupError);
}

TEST(Evaluation, ReportShapeAndSubjectRows) {
  const auto& ds = tiny_dataset();
  const auto r = train(tiny_config(), ds);
  const auto all = all_segment_indices(ds);
  const EvalReport rep = evaluate(r.checkpoint, ds, all, "full");
  ASSERT_EQ(rep.subjects.size(), 2u);
  EXPECT_EQ(rep.subjects[0].segments + rep.subjects[1].segments, long(all.size()));
  // Equal subject sizes: the subject average equals the overall accuracy.
  EXPECT_NEAR(subject_average(rep.subjects).first, rep.overall.accuracy, 1e-12);
  const EvalReport back = eval_report_from_json(to_json(rep));
  EXPECT_EQ(back.predicted, rep.predicted);
  EXPECT_EQ(back.overall.weighted_f1, rep.overall.weighted_f1);
  const std::string table = format_subject_table(rep.subjects, 2);
  EXPECT_NE(table.find("Subject"), std::string::npos);
  EXPECT_NE(table.find("Average"), std::string::npos);
  EXPECT_NE(confusion_svg(rep).find("<svg"), std::string::npos);
}

TEST(Evaluation, DimensionMismatchIsConfigError) {
  const auto& ds = tiny_dataset();
  const auto r = train(tiny_config(), ds);
  SyntheticSpec s;
  s.num_subjects = 1;
  s.dialogues_per_subject = 3;
  s.channels = 6;
  s.samples = 32;
  s.sampling_rate_hz = 64.0;
  const Dataset other = make_synthetic_dataset(s);
  const auto idx = all_segment_indices(other);
  EXPECT_THROW(evaluate(r.checkpoint, other, idx), ConfigError);
}

TEST(Training, InvalidConfigRejected) {
  auto c = tiny_config();
  c.batch_size = 0;
  EXPECT_THROW(train(c, tiny_dataset()), ConfigError);
  c = tiny_config();
  c.split = "full";
  EXPECT_THROW(train(c, tiny_dataset()), ArgumentError);
}

TEST(Training, DivergenceNamesTensor) {
  auto c = tiny_config();
  c.learning_rate = 1e300;
  c.epochs = 3;
  try {
    train(c, tiny_dataset());
    FAIL() << "expected divergence";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
  }
}

TEST(Ablation, ReportRoundTrip) {
  auto c = tiny_config();
  c.epochs = 1;
  c.eval_every = 0;
  const auto rep = run_ablation(c, tiny_dataset(), {"full", "no_intra_mca"}, {1, 2});
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[1].per_seed_accuracy.size(), 2u);
  const auto back = ablation_report_from_json(to_json(rep));
  EXPECT_EQ(back.rows[1].variant, "no_intra_mca");
  EXPECT_EQ(back.rows[0].accuracy, rep.rows[0].accuracy);
  EXPECT_NE(format_ablation_table(rep).find("no_intra_mca"), std::string::npos);
}

class GradCheck : public ::testing::TestWithParam<std::string> {};

TEST_P(GradCheck, WithinTolerance) {
  const auto rep = gradient_check(GetParam());
  EXPECT_FALSE(rep.groups.empty());
  for (const auto& g : rep.groups) {
    EXPECT_LT(g.rel_error, g.affine ? kAffineGradTolerance : kGradTolerance) << g.name;
  }
  EXPECT_TRUE(rep.passed());
}

INSTANTIATE_TEST_SUITE_P(Modules, GradCheck, ::testing::Values("abema", "encoders", "hypergraph", "classifier"));

TEST(GradCheckHarness, UnknownModule) { EXPECT_THROW(gradient_check("optimizer"), ArgumentError); }
