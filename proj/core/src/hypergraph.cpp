#include "hypermml/hypergraph.hpp"

#include "hypermml/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hypermml {

int HypergraphStructure::degree(int node) const {
  int count = 0;
  for (const auto& e : edges) count += static_cast<int>(std::count(e.begin(), e.end(), node));
  return count;
}

HypergraphStructure build_hypergraph(int segments, int modalities) {
  if (segments < 1) throw ArgumentError("build_hypergraph: need at least one segment");
  if (modalities < 1) throw ArgumentError("build_hypergraph: need at least one modality");
  HypergraphStructure s;
  s.segments = segments;
  s.modalities = modalities;
  for (int i = 0; i < segments; ++i) {
    std::vector<int> e;
    for (int x = 0; x < modalities; ++x) e.push_back(s.node(i, x));
    s.edges.push_back(std::move(e));
    s.kinds.push_back(EdgeKind::intra);
  }
  for (int x = 0; x < modalities; ++x) {
    std::vector<int> e;
    for (int i = 0; i < segments; ++i) e.push_back(s.node(i, x));
    s.edges.push_back(std::move(e));
    s.kinds.push_back(EdgeKind::inter);
  }
  return s;
}

HyperWeights HyperWeights::uniform(int segments, int modalities) {
  return {Vec::Ones(modalities), Vec::Ones(modalities), Vec::Ones(segments), Vec::Ones(modalities)};
}

WeightedIncidence weighted_incidence(const HypergraphStructure& s, const HyperWeights& w) {
  const int N = s.segments;
  const int M = s.modalities;
  if (w.alpha_s.size() != M || w.alpha_t.size() != M || w.beta_t.size() != M || w.beta_s.size() < N) {
    throw ShapeError("weighted_incidence: weight vector sizes do not match the structure");
  }
  auto floor = [](double v) { return std::max(v, kHyperWeightFloor); };
  WeightedIncidence inc;
  inc.h = Mat::Zero(s.num_nodes(), s.num_edges());
  inc.we = Vec::Zero(s.num_edges());
  for (int j = 0; j < s.num_edges(); ++j) {
    const bool intra = s.kinds[static_cast<std::size_t>(j)] == EdgeKind::intra;
    inc.we(j) = floor(intra ? w.beta_s(j) : w.beta_t(j - N));
    for (int node : s.edges[static_cast<std::size_t>(j)]) {
      const int x = node % M;
      inc.h(node, j) = floor(intra ? w.alpha_s(x) : w.alpha_t(x));
    }
  }
  inc.dv = inc.h * inc.we;
  inc.de = inc.h.colwise().sum().transpose();
  return inc;
}

Mat propagation_operator(const WeightedIncidence& inc) {
  if ((inc.dv.array() <= 0.0).any() || (inc.de.array() <= 0.0).any()) {
    throw NumericError("propagation_operator: non-positive degree");
  }
  const Mat left = inc.dv.cwiseInverse().asDiagonal() * inc.h;
  const Mat right = inc.h * inc.we.cwiseQuotient(inc.de).asDiagonal();
  return left * right.transpose();
}

Mat hypergraph_convolve(const Mat& v0, const WeightedIncidence& inc, int layers, Activation act) {
  if (layers < 1) throw ArgumentError("hypergraph_convolve: layers must be >= 1");
  if (v0.rows() != inc.h.rows()) throw ShapeError("hypergraph_convolve: node count mismatch");
  const Mat p = propagation_operator(inc);
  Mat v = v0;
  for (int l = 0; l < layers; ++l) {
    v = p * v;
    if (act == Activation::leaky_relu) v = v.unaryExpr([](double z) { return z > 0 ? z : kLeakySlope * z; });
  }
  return v;
}

Mat fuse_concat(const Mat& nodes, int modalities) {
  if (modalities < 1 || nodes.rows() % modalities != 0) throw ShapeError("fuse_concat: rows not divisible by M");
  const Eigen::Index n = nodes.rows() / modalities;
  return Eigen::Map<const Mat>(nodes.data(), n, nodes.cols() * modalities);
}

double hyper_weight_raw(double weight) {
  const double y = weight - kHyperWeightFloor;
  if (y <= 0) throw ArgumentError("hyper_weight_raw: weight must exceed the floor");
  return y > 30 ? y : std::log(std::expm1(y));
}

HypergraphFusion::HypergraphFusion(HypergraphConfig config, ParamStore& params, std::mt19937_64& rng)
    : config_(std::move(config)) {
  const int M = config_.modalities;
  if (M < 1 || config_.max_segments < 1 || config_.layers < 1 || config_.dim < 1) {
    throw ArgumentError("HypergraphFusion: invalid configuration");
  }
  const double raw1 = hyper_weight_raw(1.0);
  if (config_.node_weights) {
    alpha_s_ = params.add("hypergraph/alpha_s", Mat::Constant(1, M, raw1));
    alpha_t_ = params.add("hypergraph/alpha_t", Mat::Constant(1, M, raw1));
  }
  if (config_.hyperedge_weights) {
    beta_s_ = params.add("hypergraph/beta_s", Mat::Constant(1, config_.max_segments, raw1));
    beta_t_ = params.add("hypergraph/beta_t", Mat::Constant(1, M, raw1));
  }
  if (config_.layer_transform) {
    const int d = config_.dim;
    for (int l = 0; l < config_.layers; ++l) {
      const std::string p = "hypergraph/layer" + std::to_string(l) + "/";
      transforms_.emplace_back(params.add(p + "w", fan_in_uniform(d, d, d, rng)), params.add(p + "b", Mat::Zero(1, d)));
    }
  }
}

ag::Var HypergraphFusion::weight_row(const ag::Var& raw, Eigen::Index count) const {
  if (!raw.defined()) return ag::constant(Mat::Ones(1, count));
  const ag::Var r = raw.cols() == count ? raw : ag::slice_cols(raw, 0, count);
  return ag::add_scalar(ag::softplus(r), kHyperWeightFloor);
}

HyperWeights HypergraphFusion::weights(int segments) const {
  if (segments < 1 || segments > config_.max_segments) throw ArgumentError("HypergraphFusion: segment count out of range");
  ag::NoGradGuard guard;
  const int M = config_.modalities;
  auto vec = [](const ag::Var& v) { return Vec(v.value().row(0).transpose()); };
  return {vec(weight_row(alpha_s_, M)), vec(weight_row(alpha_t_, M)), vec(weight_row(beta_s_, segments)),
          vec(weight_row(beta_t_, M))};
}

ag::Var HypergraphFusion::propagate(const ag::Var& nodes, int segments) const {
  using namespace ag;
  const int M = config_.modalities;
  const int N = segments;
  if (N < 1 || N > config_.max_segments) {
    throw ArgumentError("HypergraphFusion: dialogue of " + std::to_string(N) + " segments exceeds max_segments " +
                        std::to_string(config_.max_segments));
  }
  if (nodes.rows() != static_cast<Eigen::Index>(N) * M) throw ShapeError("HypergraphFusion: node count mismatch");

  // Source row [alpha_s | alpha_t]; every node appears once in each edge type.
  std::array<Var, 2> alphas = {weight_row(alpha_s_, M), weight_row(alpha_t_, M)};
  const Var alpha = concat_cols(alphas);
  std::vector<ScatterEntry> entries;
  for (int i = 0; i < N; ++i) {
    for (int x = 0; x < M; ++x) {
      const Eigen::Index row = i * M + x;
      entries.push_back({row, i, x});
      entries.push_back({row, N + x, M + x});
    }
  }
  const Var h = scatter(alpha, static_cast<Eigen::Index>(N) * M, N + M, std::move(entries));
  std::array<Var, 2> betas = {weight_row(beta_s_, N), weight_row(beta_t_, M)};
  const Var we = concat_cols(betas);                        // 1 x E
  const Var dv = matmul(h, transpose(we));                  // |V| x 1
  const Var de = col_sum(h);                                // 1 x E
  const Var left = mul_col(h, reciprocal(dv));
  const Var right = mul_row(h, mul(we, reciprocal(de)));
  const Var p = matmul(left, transpose(right));

  Var v = nodes;
  for (int l = 0; l < config_.layers; ++l) {
    Var z = matmul(p, v);
    if (config_.layer_transform) {
      const auto& [w, b] = transforms_[static_cast<std::size_t>(l)];
      z = add_row(matmul(z, w), b);
    }
    v = config_.activation == Activation::leaky_relu ? leaky_relu(z, kLeakySlope) : z;
  }
  return v;
}

ag::Var HypergraphFusion::forward(const ag::Var& nodes, int segments) const {
  const ag::Var v = propagate(nodes, segments);
  return ag::reshape(v, segments, v.cols() * config_.modalities);
}

}  // namespace hypermml
