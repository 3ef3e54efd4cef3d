// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fail.

#include "hypermml/abema.hpp"
#include "hypermml/classifier.hpp"
#include "hypermml/errors.hpp"
#include "hypermml/gradcheck.hpp"
#include "hypermml/hypergraph.hpp"
#include "hypermml/report.hpp"
#include "hypermml/spectral.hpp"
#include "hypermml/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace hypermml;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Mat randn(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  return m;
}

// Full-spectrum energy from one-sided coefficients.
double onesided_energy(const CMat& x, Eigen::Index L) {
  double e = 0.0;
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      const bool unique = k == 0 || (L % 2 == 0 && k == L / 2);
      e += (unique ? 1.0 : 2.0) * std::norm(x(c, k));
    }
  }
  return e / static_cast<double>(L);
}

Outcome spectral_identities() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  double worst_rt = 0.0, worst_parseval = 0.0;
  for (Eigen::Index L : {16, 100, 128, 250, 500, 1000, 1250, 2500}) {
    const Mat x = randn(4, L, rng);
    const auto spec = spectral::forward_fft(x, 100.0);
    const Mat back = spectral::inverse_fft(spec);
    worst_rt = std::max(worst_rt, (back - x).norm() / x.norm());
    const double time_energy = x.squaredNorm();
    worst_parseval = std::max(worst_parseval, std::abs(onesided_energy(spec.coeffs, L) - time_energy) / time_energy);
  }
  long bins = 0, bad = 0;
  for (double rate : {100.0, 250.0, 500.0}) {
    for (Eigen::Index L : {Eigen::Index(rate), Eigen::Index(2 * rate), Eigen::Index(5 * rate), Eigen::Index(1000)}) {
      const auto axis = spectral::frequency_axis(L, rate);
      const auto masks = spectral::band_masks(axis);
      for (std::size_t k = 0; k < axis.size(); ++k) {
        if (!(axis[k] > 0.5 && axis[k] <= 50.0)) continue;
        int hits = 0;
        for (const auto& m : masks.masks) hits += m[k] != 0.0;
        ++bins;
        bad += hits != 1;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst_rt < 1e-5 && worst_parseval < 1e-4 && bad == 0 && secs < 10.0,
          fmt("round-trip %.2e, Parseval %.2e, %g bins with %g not covered exactly once", worst_rt,
              worst_parseval, double(bins), double(bad)) +
              fmt(" (%.2fs)", secs)};
}

Outcome de_psd_oracles() {
  std::mt19937_64 rng(2);
  Mat x = randn(1, 4096, rng);
  x.array() -= x.mean();
  x /= std::sqrt(x.squaredNorm() / double(x.cols()));
  const double de1 = spectral::differential_entropy(x)(0);
  const double closed = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  const Mat y = x * std::sqrt(1.0 / (2.0 * std::numbers::pi * std::numbers::e));
  const double de0 = spectral::differential_entropy(y)(0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Mat s = randn(3, 256, rng);
    const double k = 0.1 + 5.0 * uniform01(rng);
    const auto a = spectral::extract_band_features(s, 128.0);
    const auto b = spectral::extract_band_features(k * s, 128.0);
    for (std::size_t band = 0; band < spectral::kNumBands; ++band) {
      worst = std::max(worst, ((b[band].psd - k * k * a[band].psd).norm() / (k * k * a[band].psd.norm())));
    }
  }
  const bool de_ok = std::abs(de1 - closed) < 1e-6 && std::abs(de1 - 1.41894) < 5e-6 && std::abs(de0) < 1e-9;
  return {de_ok && worst < 1e-6, fmt("DE(1) = %.8f, DE(1/2pi e) = %.2e, PSD k^2 rel. error %.2e", de1, de0, worst)};
}

Outcome identity_composition() {
  AbemaConfig c;
  c.channels = 8;
  c.samples = 128;
  c.sampling_rate_hz = 128.0;
  c.transformer_depth = 0;
  c.balance_alpha = 0.0;
  ParamStore ps;
  std::mt19937_64 rng(3);
  Abema abema(c, {"S1"}, ps, rng);
  long mismatches = 0;
  for (int i = 0; i < 10; ++i) {
    const Mat x = randn(8, 128, rng);
    const Mat e = abema.forward(x, "S1").embedding.value();
    for (Eigen::Index k = 0; k < x.size(); ++k) mismatches += e.data()[k] != x.data()[k];
  }
  return {mismatches == 0, fmt("%g entries differ from the input over 10 windows", double(mismatches))};
}

Outcome batch_invariance() {
  const Dataset ds = make_synthetic_dataset(SyntheticSpec{});
  ModelConfig mc;
  const HyperMml model(mc, ModelDims::from(ds), 4);
  std::mt19937_64 rng(4);
  auto single = [&](std::size_t idx) {
    const auto& s = ds.segments[idx];
    return DialogueGroup{s.subject_id, s.dialogue_id, {idx}};
  };
  ag::NoGradGuard guard;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t target = rng() % ds.segments.size();
    std::vector<DialogueGroup> batch;
    std::set<std::size_t> used = {target};
    while (batch.size() < 15) {
      const std::size_t other = rng() % ds.segments.size();
      if (used.insert(other).second) batch.push_back(single(other));
    }
    const std::size_t slot = rng() % 16;
    batch.insert(batch.begin() + std::ptrdiff_t(slot), single(target));
    const auto alone = model.forward(ds, {single(target)});
    const auto inside = model.forward(ds, batch);
    const Eigen::Index row = Eigen::Index(slot);
    worst = std::max(worst, (alone.logits.value().row(0) - inside.logits.value().row(row)).cwiseAbs().maxCoeff());
    worst = std::max(worst, (alone.fused.value().row(0) - inside.fused.value().row(row)).cwiseAbs().maxCoeff());
    for (std::size_t m = 0; m < alone.embeddings.size(); ++m) {
      worst = std::max(worst, (alone.embeddings[m].value().row(0) - inside.embeddings[m].value().row(row))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
  }
  return {worst < 1e-5, fmt("max abs difference %.2e over 20 segments in batches of 16", worst)};
}

Outcome hypergraph_structure() {
  bool ok = true;
  for (int n = 1; n <= 6; ++n) {
    const auto s = build_hypergraph(n);
    ok &= s.num_nodes() == 3 * n && s.num_edges() == n + 3;
    for (int j = 0; j < s.num_edges(); ++j) {
      const auto size = s.edges[std::size_t(j)].size();
      ok &= s.kinds[std::size_t(j)] == EdgeKind::intra ? size == 3 : size == std::size_t(n);
    }
    for (int v = 0; v < s.num_nodes(); ++v) ok &= s.degree(v) == 2;
  }
  const auto inc = weighted_incidence(build_hypergraph(1), HyperWeights::uniform(1, 3));
  const Mat out = hypergraph_convolve((Mat(3, 1) << 1, 2, 3).finished(), inc, 1);
  const Mat expect = (Mat(3, 1) << 1.5, 2.0, 2.5).finished();
  const double err = (out - expect).cwiseAbs().maxCoeff();
  return {ok && err < 1e-9, std::string(ok ? "counts ok" : "count mismatch") + fmt(", [1,2,3] -> [%.4f, %.4f, %.4f]",
                                                                                   out(0, 0), out(1, 0), out(2, 0))};
}

Outcome propagation_oracle() {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + int(rng() % 4);
    const int d = 1 + int(rng() % 3);
    const auto s = build_hypergraph(n);
    auto pos = [&](int k) {
      Vec v(k);
      for (int i = 0; i < k; ++i) v(i) = 0.1 + 3.0 * uniform01(rng);
      return v;
    };
    const HyperWeights w{pos(3), pos(3), pos(n), pos(3)};
    const Mat v = randn(3 * n, d, rng);
    const Mat matrix_form = hypergraph_convolve(v, weighted_incidence(s, w), 1, Activation::identity);
    // Node -> edge aggregation, then edge -> node.
    std::vector<Eigen::RowVectorXd> edge_msg;
    std::vector<double> edge_w;
    auto h = [&](int node, int e) { return e < n ? w.alpha_s(node % 3) : w.alpha_t(node % 3); };
    for (int e = 0; e < s.num_edges(); ++e) {
      Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(d);
      double de = 0.0;
      for (int node : s.edges[std::size_t(e)]) {
        m += h(node, e) * v.row(node);
        de += h(node, e);
      }
      edge_msg.push_back(m / de);
      edge_w.push_back(e < n ? w.beta_s(e) : w.beta_t(e - n));
    }
    Mat loop = Mat::Zero(3 * n, d);
    for (int node = 0; node < 3 * n; ++node) {
      double dv = 0.0;
      for (int e = 0; e < s.num_edges(); ++e) {
        const auto& members = s.edges[std::size_t(e)];
        if (std::find(members.begin(), members.end(), node) == members.end()) continue;
        loop.row(node) += h(node, e) * edge_w[std::size_t(e)] * edge_msg[std::size_t(e)];
        dv += h(node, e) * edge_w[std::size_t(e)];
      }
      loop.row(node) /= dv;
    }
    worst = std::max(worst, (matrix_form - loop).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-6, fmt("max abs difference %.2e over 50 instances", worst)};
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::ostringstream detail;
  for (const auto& m : gradcheck_modules()) {
    const auto rep = gradient_check(m);
    double worst = 0.0, worst_affine = 0.0;
    for (const auto& g : rep.groups) {
      (g.affine ? worst_affine : worst) = std::max(g.affine ? worst_affine : worst, g.rel_error);
      ok &= g.rel_error < (g.affine ? kAffineGradTolerance : kGradTolerance);
    }
    detail << m << " " << fmt("%.1e", worst);
    if (worst_affine > 0) detail << fmt(" (affine %.1e)", worst_affine);
    detail << ", ";
  }
  const double secs = seconds_since(t0);
  detail << fmt("%.1fs", secs);
  return {ok && secs < 120.0, detail.str()};
}

Outcome simplex_invariants() {
  AbemaConfig c;
  c.channels = 4;
  c.samples = 32;
  c.d_k = 8;
  ParamStore ps;
  std::mt19937_64 rng(8);
  Abema abema(c, {}, ps, rng);
  BandVars bands;
  for (auto& b : bands) b = ag::constant(3.0 * randn(1000, 8, rng));
  const Mat bw = abema.band_importance(bands).value();
  ClassifierHead head(12, 18, 5, ps, rng);
  const Mat p = head.classify(3.0 * randn(1000, 12, rng)).probabilities;
  const double dev = std::max((bw.rowwise().sum().array() - 1.0).abs().maxCoeff(),
                              (p.rowwise().sum().array() - 1.0).abs().maxCoeff());
  const bool nonneg = bw.minCoeff() >= 0.0 && p.minCoeff() >= 0.0;
  ps.get("fusion/w").mutable_value().setZero();
  ps.get("classifier/w_o").mutable_value().setZero();
  const Mat uw = abema.band_importance(bands).value();
  const Mat up = head.classify(randn(10, 12, rng)).probabilities;
  const bool exact = (uw.array() == 1.0 / 5.0).all() && (up.array() == 1.0 / 5.0).all();
  return {dev < 1e-6 && nonneg && exact,
          fmt("max |row sum - 1| %.2e over 2 x 1000 rows; uniform cases exact: ", dev) + (exact ? "yes" : "no")};
}

Outcome metrics_oracle() {
  const std::vector<int> y = {0, 0, 1, 1}, p = {0, 1, 1, 1};
  const Metrics m = compute_metrics(p, y, 2);
  const Metrics perfect = compute_metrics(y, y, 2);
  const bool ok = std::abs(m.accuracy - 0.75) < 5e-5 && std::abs(m.weighted_f1 - 0.7333) < 5e-5 &&
                  perfect.accuracy == 1.0 && perfect.weighted_f1 == 1.0;
  return {ok, fmt("acc %.4f, weighted F1 %.4f; perfect acc %.1f F1 %.1f", m.accuracy, m.weighted_f1,
                  perfect.accuracy, perfect.weighted_f1)};
}

Outcome learning_sanity() {
  SyntheticSpec sep;
  sep.class_separation = 5.0;
  const Dataset ds = make_synthetic_dataset(sep);
  TrainConfig c;
  c.epochs = 200;
  c.eval_every = 20;
  const auto t0 = Clock::now();
  const auto r = train(c, ds);
  const double secs = seconds_since(t0);
  const auto& last = r.checkpoint.history.back();

  // Null data: one held-out split has 72 segments in 18 dialogues, so a
  // single run's accuracy has a standard deviation near 11 points. Average
  // over three independent data and training seeds.
  double null_sum = 0.0;
  std::ostringstream per_seed;
  for (std::uint64_t s : {1, 2, 3}) {
    SyntheticSpec null_spec;
    null_spec.class_separation = 0.0;
    null_spec.seed = s;
    TrainConfig nc = c;
    nc.seed = s;
    nc.eval_every = 0;
    const Dataset null_ds = make_synthetic_dataset(null_spec);
    const auto nr = train(nc, null_ds);
    const double acc = evaluate(nr.checkpoint, null_ds, nr.split.test).overall.accuracy;
    null_sum += acc;
    per_seed << fmt("%.1f%% ", 100 * acc);
  }
  const double null_mean = null_sum / 3.0;
  const bool ok = last.train_acc >= 0.95 && last.test_acc >= 0.85 && secs < 300.0 && std::abs(null_mean - 1.0 / 3.0) <= 0.10;
  return {ok, fmt("sep=5: train %.1f%%, held-out %.1f%% after 200 epochs in %.0fs; ", 100 * last.train_acc,
                  100 * last.test_acc, secs) +
                  fmt("sep=0: mean held-out %.1f%% (", 100 * null_mean) + per_seed.str() + ")"};
}

Outcome determinism_persistence() {
  SyntheticSpec s;
  s.dialogues_per_subject = 24;
  const Dataset ds = make_synthetic_dataset(s);
  TrainConfig c;
  c.epochs = 3;
  const auto a = train(c, ds);
  const auto b = train(c, ds);
  const bool same_history = a.checkpoint.history == b.checkpoint.history;
  const fs::path dir = fs::temp_directory_path() / "hypermml_acceptance_ckpt";
  fs::remove_all(dir);
  save_checkpoint(a.checkpoint, dir);
  const Checkpoint back = load_checkpoint(dir);
  const std::string before = to_json(evaluate(a.checkpoint, ds, a.split.test, "test"));
  const std::string after = to_json(evaluate(back, ds, a.split.test, "test"));
  fs::remove_all(dir);
  return {same_history && before == after,
          std::string("history ") + (same_history ? "identical" : "differs") + ", reloaded report " +
              (before == after ? "identical" : "differs")};
}

Outcome ablation_direction() {
  SyntheticSpec s;
  s.class_separation = 5.0;
  const Dataset ds = make_synthetic_dataset(s);
  TrainConfig c;
  c.eval_every = 0;
  const std::string off = "no_intra_mca+no_inter_mca+no_node_weights+no_hyperedge_weights";
  const auto rep = run_ablation(c, ds, {"full", off}, {1, 2, 3});
  const double full = rep.rows[0].accuracy, reduced = rep.rows[1].accuracy;
  return {reduced <= full, fmt("%g epochs, 3 seeds: full %.2f%%, all attention and weights off %.2f%%", c.epochs,
                               100 * full, 100 * reduced)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome adapter_dry_run() {
#ifndef HYPERMML_CLI_PATH
  return {false, "command-line tool not built"};
#else
  const fs::path work = fs::temp_directory_path() / "hypermml_acceptance_eav";
  fs::remove_all(work);
  fs::create_directories(work);
  std::ofstream(work / "config.json") << "{\"d\": 16, \"d_k\": 8, \"transformer_model_dim\": 16, \"epochs\": 2}\n";
  const std::string cli = HYPERMML_CLI_PATH;
  const std::string w = work.string();
  auto run = [&](const std::string& args, const std::string& log) {
    return std::system(("\"" + cli + "\" " + args + " > \"" + w + "/" + log + "\" 2>&1").c_str());
  };
  int rc = run("synth --out " + w + "/data --layout eav", "synth.log");
  if (rc == 0) rc = run("train --config " + w + "/config.json --data " + w + "/data --out " + w + "/run --quiet", "train.log");
  if (rc == 0) rc = run("eval --ckpt " + w + "/run --data " + w + "/data", "eval.log");
  if (rc == 0) rc = run("report --runs " + w + "/run --out " + w + "/table.txt", "report.log");
  if (rc != 0) return {false, "command failed, see " + w};
  const Dataset ds = load_dataset(work / "data");
  const EvalReport rep = eval_report_from_json(slurp(work / "run" / "report.json"));
  const std::string table = slurp(work / "table.txt");
  std::set<std::string> listed;
  for (const auto& row : rep.subjects) listed.insert(row.subject);
  bool rows_present = true;
  for (const auto& s : ds.manifest.subjects) rows_present &= table.find(s + " ") != std::string::npos;
  const bool shape = ds.manifest.subjects.size() == 42 && ds.manifest.channels == 30 && ds.manifest.num_classes == 5;
  const bool ok = shape && listed.size() == 42 && rows_present && table.find("Subject | Acc") != std::string::npos &&
                  table.find("Average") != std::string::npos;
  if (ok) fs::remove_all(work);
  return {ok, fmt("%g subjects, %g channels, %g classes; table lists %g subject rows", double(ds.manifest.subjects.size()),
                  double(ds.manifest.channels), double(ds.manifest.num_classes), double(listed.size()))};
#endif
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "spectral identities", spectral_identities},
      {2, "DE/PSD oracles", de_psd_oracles},
      {3, "identity composition", identity_composition},
      {4, "batch invariance", batch_invariance},
      {5, "hypergraph structure", hypergraph_structure},
      {6, "propagation oracle", propagation_oracle},
      {7, "gradient checks", gradient_checks},
      {8, "softmax/simplex invariants", simplex_invariants},
      {9, "metrics oracle", metrics_oracle},
      {10, "learning sanity", learning_sanity},
      {11, "determinism & persistence", determinism_persistence},
      {12, "ablation direction", ablation_direction},
      {13, "dataset-adapter dry run", adapter_dry_run},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
