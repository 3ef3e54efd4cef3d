// hypermml command-line tool. Exit codes: 0 ok, 1 runtime failure, 2 usage.

#include "png_writer.hpp"

#include "hypermml/data_model.hpp"
#include "hypermml/errors.hpp"
#include "hypermml/gradcheck.hpp"
#include "hypermml/report.hpp"
#include "hypermml/spectral.hpp"
#include "hypermml/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace hypermml;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw UsageError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw UsageError("cannot write " + p.string());
  out << text;
}

void require_dir(const fs::path& p, const char* what) {
  if (!fs::is_directory(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Prints the table from the serialized report, never from in-memory metrics.
void print_report(const std::string& json_text) {
  const EvalReport r = eval_report_from_json(json_text);
  std::cout << format_subject_table(r.subjects);
  std::cout << "overall acc " << std::fixed << std::setprecision(2) << 100.0 * r.overall.accuracy << "  weighted F1 "
            << 100.0 * r.overall.weighted_f1 << "  macro F1 " << 100.0 * r.overall.macro_f1 << "\n";
}

struct SynthArgs {
  std::string out;
  int subjects = 1;
  int classes = 3;
  double sep = 5.0;
  std::uint64_t seed = 42;
  int dialogues = 60;
  int segments = 4;
  int channels = 8;
  int samples = 128;
  double rate = 128.0;
  int audio_dim = 16;
  int video_dim = 16;
  std::string layout = "synthetic";
};

int run_synth(const SynthArgs& a) {
  SyntheticSpec spec;
  if (a.layout == "eav") {
    spec = eav_stub_spec();
  } else if (a.layout != "synthetic") {
    throw UsageError("unknown layout " + a.layout + " (synthetic or eav)");
  } else {
    spec.num_subjects = a.subjects;
    spec.num_classes = a.classes;
    spec.dialogues_per_subject = a.dialogues;
    spec.segments_per_dialogue = a.segments;
    spec.channels = a.channels;
    spec.samples = a.samples;
    spec.sampling_rate_hz = a.rate;
    spec.audio_dim = a.audio_dim;
    spec.video_dim = a.video_dim;
  }
  spec.class_separation = a.sep;
  spec.seed = a.seed;
  const Dataset ds = make_synthetic_dataset(spec);
  save_dataset(ds, a.out);
  std::cout << "wrote " << ds.segments.size() << " segments (" << ds.manifest.subjects.size() << " subjects, "
            << ds.manifest.num_classes << " classes) to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string config, data, out, split, variant;
  std::uint64_t seed = 42;
  bool seed_set = false;
  int epochs = -1;
  double lr = -1;
  int batch = -1;
  bool quiet = false;
};

TrainConfig resolve_config(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config.empty()) cfg = train_config_from_json(read_file(a.config));
  if (a.seed_set) cfg.seed = a.seed;
  if (a.epochs >= 0) cfg.epochs = a.epochs;
  if (a.lr > 0) cfg.learning_rate = a.lr;
  if (a.batch > 0) cfg.batch_size = a.batch;
  if (!a.split.empty()) cfg.split = a.split;
  cfg.data_dir = a.data;
  return cfg;
}

int run_train(const TrainArgs& a) {
  require_dir(a.data, "dataset");
  TrainConfig cfg = resolve_config(a);
  const Dataset ds = load_dataset(a.data);
  if (!a.variant.empty()) cfg.model = apply_variant(cfg.model, a.variant, ds.manifest.modality_names);
  fs::create_directories(a.out);
  std::ofstream hist(fs::path(a.out) / "history.jsonl", std::ios::trunc);
  const TrainResult res = train(cfg, ds, [&](const EpochRecord& r) {
    hist << to_json_line(r) << "\n";
    hist.flush();
    if (!a.quiet) {
      std::printf("epoch %3d  loss %.4f", r.epoch, r.train_loss);
      if (r.train_acc >= 0) std::printf("  train acc %.4f", r.train_acc);
      if (r.test_acc >= 0) std::printf("  test acc %.4f  test F1 %.4f", r.test_acc, r.test_f1);
      std::printf("\n");
      std::fflush(stdout);
    }
  });
  save_checkpoint(res.checkpoint, a.out);
  write_file(fs::path(a.out) / "config.json", to_json(cfg) + "\n");
  if (!res.split.test.empty()) {
    const std::string json = to_json(evaluate(res.checkpoint, ds, res.split.test, cfg.split));
    write_file(fs::path(a.out) / "report.json", json + "\n");
    print_report(json);
  }
  std::cout << "checkpoint written to " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt, data, split, out, side = "test";
};

int run_eval(const EvalArgs& a) {
  require_dir(a.ckpt, "checkpoint");
  require_dir(a.data, "dataset");
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const Dataset ds = load_dataset(a.data);
  const std::string spec = a.split.empty() ? ck.config.split : a.split;
  const Split split = resolve_split(ds, spec, ck.config.test_fraction, ck.config.seed);
  if (a.side != "test" && a.side != "train") throw UsageError("--side must be test or train");
  const auto& indices = a.side == "train" ? split.train : split.test;
  const std::string json = to_json(evaluate(ck, ds, indices, spec));
  write_file(a.out.empty() ? fs::path(a.ckpt) / "report.json" : fs::path(a.out), json + "\n");
  print_report(json);
  return 0;
}

int run_report(const std::vector<std::string>& runs, int columns, const std::string& out) {
  std::vector<SubjectRow> rows;
  AblationReport ablation;
  std::ostringstream text;
  for (const auto& dir : runs) {
    require_dir(dir, "run directory");
    const fs::path rep = fs::path(dir) / "report.json";
    const fs::path abl = fs::path(dir) / "ablation.json";
    if (!fs::exists(rep) && !fs::exists(abl)) throw UsageError("no report.json or ablation.json in " + dir);
    if (fs::exists(rep)) {
      const EvalReport r = eval_report_from_json(read_file(rep));
      rows.insert(rows.end(), r.subjects.begin(), r.subjects.end());
    }
    if (fs::exists(abl)) {
      const AblationReport a = ablation_report_from_json(read_file(abl));
      ablation.rows.insert(ablation.rows.end(), a.rows.begin(), a.rows.end());
    }
  }
  if (!rows.empty()) text << format_subject_table(rows, columns);
  if (!ablation.rows.empty()) text << (rows.empty() ? "" : "\n") << format_ablation_table(ablation);
  std::cout << text.str();
  if (!out.empty()) write_file(out, text.str());
  return 0;
}

int run_plot(const std::string& report, const std::string& out) {
  const EvalReport r = eval_report_from_json(read_file(report));
  const auto ext = fs::path(out).extension().string();
  if (ext == ".svg") {
    write_file(out, confusion_svg(r));
  } else if (ext == ".png") {
    write_confusion_png(out, r.overall.confusion);
  } else {
    throw UsageError("--out must end in .svg or .png");
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

int run_export(const std::string& ckpt_dir, const std::string& data, const std::string& split_spec,
               const std::string& out) {
  require_dir(ckpt_dir, "checkpoint");
  require_dir(data, "dataset");
  const Checkpoint ck = load_checkpoint(ckpt_dir);
  const Dataset ds = load_dataset(data);
  const Split split = resolve_split(ds, split_spec, ck.config.test_fraction, ck.config.seed);
  const HyperMml model = ck.instantiate();
  ag::NoGradGuard guard;
  const auto groups = group_dialogues(ds, split.test);
  std::ofstream csv(out, std::ios::trunc);
  if (!csv) throw UsageError("cannot write " + out);
  csv << std::setprecision(9);
  const int d = model.config().d;
  csv << "subject,dialogue,position,label,predicted";
  for (Modality m : model.config().modalities) {
    for (int i = 0; i < d; ++i) csv << "," << modality_name(m) << "_" << i;
  }
  const int fused_dim = d * static_cast<int>(model.config().modalities.size());
  for (int i = 0; i < fused_dim; ++i) csv << ",fused_" << i;
  csv << "\n";
  for (std::size_t start = 0; start < groups.size(); start += 16) {
    const std::vector<DialogueGroup> chunk(groups.begin() + static_cast<std::ptrdiff_t>(start),
                                           groups.begin() + static_cast<std::ptrdiff_t>(std::min(groups.size(), start + 16)));
    const BatchOutput o = model.forward(ds, chunk);
    const auto pred = argmax_rows(o.logits.value());
    for (std::size_t r = 0; r < o.segments.size(); ++r) {
      const auto& s = ds.segments[o.segments[r]];
      const auto row = static_cast<Eigen::Index>(r);
      csv << s.subject_id << "," << s.dialogue_id << "," << s.position << "," << s.label.class_index << ","
          << pred[r];
      for (const auto& e : o.embeddings) {
        for (Eigen::Index i = 0; i < e.cols(); ++i) csv << "," << e.value()(row, i);
      }
      for (Eigen::Index i = 0; i < o.fused.cols(); ++i) csv << "," << o.fused.value()(row, i);
      csv << "\n";
    }
  }
  std::cout << "wrote embeddings for " << split.test.size() << " segments to " << out << "\n";
  return 0;
}

int run_features(const std::string& data, const std::string& out) {
  require_dir(data, "dataset");
  const Dataset ds = load_dataset(data);
  std::ofstream csv(out, std::ios::trunc);
  if (!csv) throw UsageError("cannot write " + out);
  csv << std::setprecision(9) << "subject,dialogue,position,channel,band,de,psd\n";
  for (const auto& s : ds.segments) {
    const auto feats = spectral::extract_band_features(s.eeg, ds.manifest.sampling_rate_hz);
    for (const auto& f : feats) {
      for (Eigen::Index c = 0; c < f.de.size(); ++c) {
        csv << s.subject_id << "," << s.dialogue_id << "," << s.position << "," << c << ","
            << spectral::band_name(f.band) << "," << f.de(c) << "," << f.psd(c) << "\n";
      }
    }
  }
  std::cout << "wrote band features for " << ds.segments.size() << " segments to " << out << "\n";
  return 0;
}

int run_gradcheck(const std::string& module, std::uint64_t seed) {
  std::vector<std::string> modules = module == "all" ? gradcheck_modules() : std::vector<std::string>{module};
  bool ok = true;
  for (const auto& m : modules) {
    const GradCheckReport r = gradient_check(m, seed);
    for (const auto& g : r.groups) {
      std::printf("%-12s %-40s %.3e%s\n", m.c_str(), g.name.c_str(), g.rel_error, g.affine ? "  (affine)" : "");
    }
    std::printf("%s max relative error %.3e  %s\n", m.c_str(), r.worst, r.passed() ? "ok" : "ABOVE TOLERANCE");
    ok = ok && r.passed();
  }
  return ok ? 0 : 1;
}

int run_ablate(const TrainArgs& a, const std::string& variants, const std::string& seeds) {
  require_dir(a.data, "dataset");
  const TrainConfig cfg = resolve_config(a);
  const Dataset ds = load_dataset(a.data);
  std::vector<std::uint64_t> seed_list;
  for (const auto& s : split_list(seeds)) seed_list.push_back(std::stoull(s));
  const AblationReport rep = run_ablation(cfg, ds, split_list(variants), seed_list);
  fs::create_directories(a.out);
  write_file(fs::path(a.out) / "ablation.json", to_json(rep) + "\n");
  std::cout << format_ablation_table(ablation_report_from_json(to_json(rep)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal EEG / audio / video emotion recognition with hypergraph fusion"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic dataset");
  s->add_option("--out", synth.out, "output dataset directory")->required();
  s->add_option("--subjects", synth.subjects, "number of subjects");
  s->add_option("--classes", synth.classes, "number of classes");
  s->add_option("--sep", synth.sep, "class separation");
  s->add_option("--seed", synth.seed, "random seed");
  s->add_option("--dialogues", synth.dialogues, "dialogues per subject");
  s->add_option("--segments", synth.segments, "segments per dialogue");
  s->add_option("--channels", synth.channels, "EEG channels");
  s->add_option("--samples", synth.samples, "samples per segment");
  s->add_option("--rate", synth.rate, "sampling rate in Hz");
  s->add_option("--audio-dim", synth.audio_dim, "audio feature length");
  s->add_option("--video-dim", synth.video_dim, "video feature length");
  s->add_option("--layout", synth.layout, "synthetic or eav (42 subjects, 30 channels, 5 classes)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model and write a checkpoint");
  t->add_option("--config", tr.config, "JSON config file");
  t->add_option("--data", tr.data, "dataset directory")->required();
  t->add_option("--out", tr.out, "checkpoint directory")->required();
  t->add_option("--seed", tr.seed, "random seed (default 42)");
  t->add_option("--epochs", tr.epochs, "override epochs");
  t->add_option("--lr", tr.lr, "override learning rate");
  t->add_option("--batch-size", tr.batch, "override dialogues per batch");
  t->add_option("--split", tr.split, "all or subject=<id>");
  t->add_option("--variant", tr.variant, "ablation flags joined with '+'");
  t->add_flag("--quiet", tr.quiet, "no per-epoch output");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  e->add_option("--ckpt", ev.ckpt, "checkpoint directory")->required();
  e->add_option("--data", ev.data, "dataset directory")->required();
  e->add_option("--split", ev.split, "all, full or subject=<id> (default: the training split)");
  e->add_option("--side", ev.side, "test or train side of the split");
  e->add_option("--out", ev.out, "report JSON path (default <ckpt>/report.json)");

  std::vector<std::string> runs;
  int columns = 3;
  std::string report_out;
  auto* r = app.add_subcommand("report", "aggregate run reports into tables");
  r->add_option("--runs", runs, "run directories holding report.json / ablation.json")->required();
  r->add_option("--columns", columns, "side-by-side subject column groups");
  r->add_option("--out", report_out, "also write the tables to this file");

  std::string plot_report, plot_out;
  auto* p = app.add_subcommand("plot-confusion", "render a confusion matrix");
  p->add_option("--report", plot_report, "report JSON")->required();
  p->add_option("--out", plot_out, "output .svg or .png")->required();

  std::string exp_ckpt, exp_data, exp_split = "full", exp_out;
  auto* x = app.add_subcommand("export-embeddings", "dump per-segment embeddings as CSV");
  x->add_option("--ckpt", exp_ckpt, "checkpoint directory")->required();
  x->add_option("--data", exp_data, "dataset directory")->required();
  x->add_option("--split", exp_split, "segments to export (test side of the split; default full)");
  x->add_option("--out", exp_out, "output CSV")->required();

  std::string feat_data, feat_out;
  auto* f = app.add_subcommand("features", "dump per-band DE / PSD as CSV");
  f->add_option("--data", feat_data, "dataset directory")->required();
  f->add_option("--out", feat_out, "output CSV")->required();

  std::string gc_module = "all";
  std::uint64_t gc_seed = 42;
  auto* g = app.add_subcommand("gradcheck", "finite-difference gradient check");
  g->add_option("--module", gc_module, "abema, encoders, hypergraph, classifier or all");
  g->add_option("--seed", gc_seed, "random seed");

  TrainArgs ab;
  std::string ab_variants = "full,no_intra_mca,no_inter_mca,no_node_weights,no_hyperedge_weights", ab_seeds = "42";
  auto* a = app.add_subcommand("ablate", "train ablation variants and write ablation.json");
  a->add_option("--config", ab.config, "JSON config file");
  a->add_option("--data", ab.data, "dataset directory")->required();
  a->add_option("--out", ab.out, "output directory")->required();
  a->add_option("--variants", ab_variants, "comma-separated variants");
  a->add_option("--seeds", ab_seeds, "comma-separated seeds");
  a->add_option("--epochs", ab.epochs, "override epochs");
  a->add_option("--split", ab.split, "all or subject=<id>");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::cerr << "error: usage: " << ex.what() << "\n";
    return 2;
  }
  tr.seed_set = t->count("--seed") > 0;

  try {
    if (*s) return run_synth(synth);
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*r) return run_report(runs, columns, report_out);
    if (*p) return run_plot(plot_report, plot_out);
    if (*x) return run_export(exp_ckpt, exp_data, exp_split, exp_out);
    if (*f) return run_features(feat_data, feat_out);
    if (*g) return run_gradcheck(gc_module, gc_seed);
    if (*a) return run_ablate(ab, ab_variants, ab_seeds);
  } catch (const UsageError& ex) {
    std::cerr << "error: usage: " << ex.what() << "\n";
    return 2;
  } catch (const ArgumentError& ex) {
    std::cerr << "error: argument: " << ex.what() << "\n";
    return 2;
  } catch (const ConfigError& ex) {
    std::cerr << "error: config: " << ex.what() << "\n";
    return 2;
  } catch (const LookupError& ex) {
    std::cerr << "error: lookup: " << ex.what() << "\n";
    return 2;
  } catch (const ShapeError& ex) {
    std::cerr << "error: shape: " << ex.what() << "\n";
    return 2;
  } catch (const NumericError& ex) {
    std::cerr << "error: numeric: " << ex.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "error: runtime: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}
