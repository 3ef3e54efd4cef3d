#pragma once

// Conversation hypergraph over N segments and M modalities: one intra-segment
// hyperedge per segment (all modalities of that segment) and one
// inter-segment hyperedge per modality (that modality across all segments).
// Node (i, x) sits at row i*M + x. With M = 1 the intra edges degenerate to
// singletons.

#include "hypermml/autograd.hpp"
#include "hypermml/params.hpp"

#include <random>
#include <vector>

namespace hypermml {

inline constexpr double kHyperWeightFloor = 1e-6;

enum class EdgeKind { intra, inter };

struct HypergraphStructure {
  int segments = 0;    // N
  int modalities = 3;  // M
  std::vector<std::vector<int>> edges;  // node rows per edge; intra edges first
  std::vector<EdgeKind> kinds;

  int num_nodes() const { return segments * modalities; }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int node(int segment, int modality) const { return segment * modalities + modality; }
  // Edge-membership count of a node.
  int degree(int node) const;
};

// Throws ArgumentError for N < 1 or M < 1.
HypergraphStructure build_hypergraph(int segments, int modalities = 3);

// Positive weights; values below kHyperWeightFloor are raised to it.
struct HyperWeights {
  Vec alpha_s;  // M, node weight inside intra edges
  Vec alpha_t;  // M, node weight inside inter edges
  Vec beta_s;   // N, intra edge weights by segment position
  Vec beta_t;   // M, inter edge weights

  static HyperWeights uniform(int segments, int modalities);
};

struct WeightedIncidence {
  Mat h;        // |V| x |E|
  Vec we;       // |E| hyperedge weights (diagonal of W_e)
  Vec dv;       // node degrees, sum_j h(i, j) * we(j)
  Vec de;       // edge degrees, sum_i h(i, j)
};

WeightedIncidence weighted_incidence(const HypergraphStructure& s, const HyperWeights& w);

// D_V^-1 H W_e D_E^-1 H^T.
Mat propagation_operator(const WeightedIncidence& inc);

enum class Activation { identity, leaky_relu };
inline constexpr double kLeakySlope = 0.01;

// Applies act(P V) `layers` times; layers must be >= 1.
Mat hypergraph_convolve(const Mat& v0, const WeightedIncidence& inc, int layers,
                        Activation act = Activation::leaky_relu);

// Rows i*M..i*M+M-1 side by side: N x (M d).
Mat fuse_concat(const Mat& nodes, int modalities);

struct HypergraphConfig {
  int modalities = 3;
  int max_segments = 4;  // positional beta_s entries
  int layers = 2;
  int dim = 64;
  Activation activation = Activation::leaky_relu;
  bool layer_transform = false;
  bool node_weights = true;       // off: all alpha frozen at 1
  bool hyperedge_weights = true;  // off: all beta frozen at 1
};

// Learnable version used in the model. Weights are kHyperWeightFloor +
// softplus(raw), initialized to 1.
class HypergraphFusion {
 public:
  HypergraphFusion(HypergraphConfig config, ParamStore& params, std::mt19937_64& rng);

  const HypergraphConfig& config() const { return config_; }

  // Current weights for a dialogue of N segments (plain values).
  HyperWeights weights(int segments) const;

  // nodes: (N M) x d, segment-major. Returns the propagated nodes.
  ag::Var propagate(const ag::Var& nodes, int segments) const;
  // propagate followed by the concatenation: N x (M d).
  ag::Var forward(const ag::Var& nodes, int segments) const;

 private:
  ag::Var weight_row(const ag::Var& raw, Eigen::Index count) const;

  HypergraphConfig config_;
  ag::Var alpha_s_, alpha_t_, beta_s_, beta_t_;  // raw, 1 x M or 1 x max_segments
  std::vector<std::pair<ag::Var, ag::Var>> transforms_;
};

// Inverse of kHyperWeightFloor + softplus for initialization.
double hyper_weight_raw(double weight);

}  // namespace hypermml
