#include "hypermml/gradcheck.hpp"

#include "hypermml/abema.hpp"
#include "hypermml/classifier.hpp"
#include "hypermml/encoders.hpp"
#include "hypermml/errors.hpp"
#include "hypermml/hypergraph.hpp"

#include <chrono>
#include <cmath>

namespace hypermml {

using namespace ag;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * standard_normal(rng);
  return m;
}

// Fixed random linear read-out of several outputs.
class Projection {
 public:
  explicit Projection(std::uint64_t seed) : rng_(seed) {}

  Var operator()(const std::vector<Var>& outs) {
    if (weights_.empty()) {
      for (const auto& o : outs) weights_.push_back(random_mat(o.rows(), o.cols(), rng_));
    }
    Var total;
    for (std::size_t i = 0; i < outs.size(); ++i) {
      Var t = sum(mul(outs[i], constant(weights_[i])));
      total = total.defined() ? add(total, t) : t;
    }
    return total;
  }

 private:
  std::mt19937_64 rng_;
  std::vector<Mat> weights_;
};

void finish(GradCheckReport& r) {
  for (const auto& g : r.groups) r.worst = std::max(r.worst, g.rel_error);
}

void abema_case(GradCheckReport& report, bool intra, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AbemaConfig cfg;
  cfg.channels = 4;
  cfg.samples = 16;
  cfg.sampling_rate_hz = 60.0;  // 3.75 Hz bins: every band gets at least one bin
  cfg.d_k = 8;
  cfg.shared_dim = 6;
  cfg.transformer_depth = 1;
  cfg.transformer_heads = 2;
  cfg.transformer_model_dim = 8;
  cfg.intra_mca = intra;
  ParamStore params;
  const std::vector<std::string> subjects = {"s0", "s1"};
  Abema abema(cfg, subjects, params, rng);
  for (const auto& s : subjects) {
    params.get("subject_bank/" + s).mutable_value() += random_mat(cfg.channels, cfg.channels, rng, 0.1);
  }
  const std::vector<Mat> inputs = {random_mat(cfg.channels, cfg.samples, rng),
                                   random_mat(cfg.channels, cfg.samples, rng)};
  Projection proj(seed + 1);
  auto loss = [&] {
    std::vector<Var> outs;
    for (std::size_t b = 0; b < inputs.size(); ++b) {
      const auto o = abema.forward(inputs[b], subjects[b]);
      outs.push_back(o.embedding);
      outs.push_back(o.projected);
      outs.push_back(o.band_weights);
    }
    return proj(outs);
  };
  auto affine = [](const std::string& n) { return n == "fusion/proj_b"; };
  for (auto g : check_gradients(params, loss, affine)) {
    if (!intra) g.name = "[no_intra] " + g.name;
    report.groups.push_back(std::move(g));
  }
}

void encoders_case(GradCheckReport& report, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore params;
  LinearEncoder audio("encoders/audio/", 5, 6, params, rng);
  BiGruEncoder eeg("encoders/eeg/", 3, 4, params, rng);
  const Mat x = random_mat(3, 5, rng);
  const std::vector<Var> seq = {constant(random_mat(3, 5, rng)), constant(random_mat(3, 5, rng))};
  Projection proj(seed + 1);
  auto loss = [&] { return proj({audio.encode(constant(x)), eeg.encode(seq)}); };
  auto affine = [](const std::string& n) { return n.rfind("encoders/audio/", 0) == 0 || n == "encoders/eeg/out_b"; };
  report.groups = check_gradients(params, loss, affine);
}

void hypergraph_case(GradCheckReport& report, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore params;
  HypergraphConfig cfg;
  cfg.modalities = 3;
  cfg.max_segments = 3;
  cfg.dim = 3;
  cfg.layers = 2;
  cfg.layer_transform = true;
  HypergraphFusion fusion(cfg, params, rng);
  for (const auto& p : params.entries()) {
    if (p.name.find("alpha") != std::string::npos || p.name.find("beta") != std::string::npos) {
      auto v = p.var;
      v.mutable_value() += random_mat(v.rows(), v.cols(), rng, 0.5);
    }
  }
  const int n = 2;
  const Var nodes = constant(random_mat(n * cfg.modalities, cfg.dim, rng));
  Projection proj(seed + 1);
  auto loss = [&] { return proj({fusion.forward(nodes, n)}); };
  report.groups = check_gradients(params, loss);
}

void classifier_case(GradCheckReport& report, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore params;
  ClassifierHead head(6, 5, 3, params, rng);
  const Var f = constant(random_mat(4, 6, rng));
  const std::vector<int> labels = {0, 2, 1, 2};
  const auto theta = params.vars();
  auto loss = [&] { return regularized_loss(head.logits(f), labels, theta, 1e-2); };
  report.groups = check_gradients(params, loss);
}

}  // namespace

bool GradCheckReport::passed() const {
  for (const auto& g : groups) {
    if (!(g.rel_error < (g.affine ? kAffineGradTolerance : kGradTolerance))) return false;
  }
  return !groups.empty();
}

std::vector<GroupError> check_gradients(ParamStore& params, const std::function<Var()>& loss,
                                        const std::function<bool(const std::string&)>& affine, double step) {
  params.zero_grad();
  backward(loss());
  std::vector<GroupError> out;
  for (const auto& p : params.entries()) {
    Var v = p.var;
    const Mat analytic = v.grad();
    Mat numeric(v.rows(), v.cols());
    {
      NoGradGuard guard;
      for (Eigen::Index i = 0; i < v.value().size(); ++i) {
        double& x = v.mutable_value().data()[i];
        const double orig = x;
        x = orig + step;
        const double up = loss().item();
        x = orig - step;
        const double down = loss().item();
        x = orig;
        numeric.data()[i] = (up - down) / (2.0 * step);
      }
    }
    const double denom = analytic.norm() + numeric.norm();
    GroupError g;
    g.name = p.name;
    g.rel_error = denom > 0 ? (analytic - numeric).norm() / denom : 0.0;
    g.affine = affine && affine(p.name);
    g.entries = static_cast<std::size_t>(v.value().size());
    out.push_back(std::move(g));
  }
  params.zero_grad();
  return out;
}

std::vector<std::string> gradcheck_modules() { return {"abema", "encoders", "hypergraph", "classifier"}; }

GradCheckReport gradient_check(const std::string& module, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckReport r;
  r.module = module;
  if (module == "abema") {
    abema_case(r, true, seed);
    abema_case(r, false, seed);
  } else if (module == "encoders") {
    encoders_case(r, seed);
  } else if (module == "hypergraph") {
    hypergraph_case(r, seed);
  } else if (module == "classifier") {
    classifier_case(r, seed);
  } else {
    throw ArgumentError("unknown module for gradcheck: " + module);
  }
  finish(r);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace hypermml
