#include "hypermml/encoders.hpp"

#include "hypermml/errors.hpp"

namespace hypermml {

using namespace ag;

LinearEncoder::LinearEncoder(const std::string& prefix, int in_dim, int d, ParamStore& params,
                             std::mt19937_64& rng)
    : in_dim_(in_dim), out_dim_(d) {
  if (in_dim < 1 || d < 1) throw ArgumentError("LinearEncoder: dimensions must be positive");
  w_ = params.add(prefix + "w", fan_in_uniform(in_dim, d, in_dim, rng));
  b_ = params.add(prefix + "b", Mat::Zero(1, d));
}

Var LinearEncoder::encode(const Var& x) const {
  if (x.cols() != in_dim_) {
    throw ShapeError("LinearEncoder: expected " + std::to_string(in_dim_) + " features, got " +
                     std::to_string(x.cols()));
  }
  return add_row(matmul(x, w_), b_);
}

namespace {

GruDirection make_direction(const std::string& prefix, int features, int hidden, ParamStore& params,
                            std::mt19937_64& rng) {
  GruDirection g;
  g.w_ih = params.add(prefix + "w_ih", fan_in_uniform(features, 3 * hidden, hidden, rng));
  g.b_ih = params.add(prefix + "b_ih", fan_in_uniform(1, 3 * hidden, hidden, rng));
  g.w_hh = params.add(prefix + "w_hh", fan_in_uniform(hidden, 3 * hidden, hidden, rng));
  g.b_hh = params.add(prefix + "b_hh", fan_in_uniform(1, 3 * hidden, hidden, rng));
  return g;
}

}  // namespace

BiGruEncoder::BiGruEncoder(const std::string& prefix, int features, int d, ParamStore& params,
                           std::mt19937_64& rng)
    : features_(features), hidden_(d / 2), out_dim_(d) {
  if (features < 1 || d < 2 || d % 2 != 0) throw ArgumentError("BiGruEncoder: d must be even and >= 2");
  fwd_ = make_direction(prefix + "fwd/", features, hidden_, params, rng);
  bwd_ = make_direction(prefix + "bwd/", features, hidden_, params, rng);
  out_w_ = params.add(prefix + "out_w", fan_in_uniform(2 * hidden_, d, 2 * hidden_, rng));
  out_b_ = params.add(prefix + "out_b", Mat::Zero(1, d));
}

Var BiGruEncoder::encode(std::span<const Var> samples) const {
  if (samples.empty()) throw ArgumentError("BiGruEncoder: empty batch");
  const Eigen::Index B = static_cast<Eigen::Index>(samples.size());
  const Eigen::Index L = samples[0].cols();
  std::vector<Var> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.rows() != features_ || s.cols() != L) throw ShapeError("BiGruEncoder: inconsistent sample shapes");
    rows.push_back(transpose(s));
  }
  // Sample-major (B*L) x C; step t of sample i is row i*L + t.
  const Var x = concat_rows(rows);
  const Var xf = add_row(matmul(x, fwd_.w_ih), fwd_.b_ih);
  const Var xb = add_row(matmul(x, bwd_.w_ih), bwd_.b_ih);

  auto step_rows = [&](Eigen::Index t) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(B));
    for (Eigen::Index i = 0; i < B; ++i) idx[static_cast<std::size_t>(i)] = i * L + t;
    return idx;
  };
  Var hf = constant(Mat::Zero(B, hidden_));
  Var hb = constant(Mat::Zero(B, hidden_));
  for (Eigen::Index t = 0; t < L; ++t) {
    hf = gru_cell(select_rows(xf, step_rows(t)), hf, fwd_.w_hh, fwd_.b_hh);
    hb = gru_cell(select_rows(xb, step_rows(L - 1 - t)), hb, bwd_.w_hh, bwd_.b_hh);
  }
  std::array<Var, 2> both = {hf, hb};
  return add_row(matmul(concat_cols(both), out_w_), out_b_);
}

}  // namespace hypermml
