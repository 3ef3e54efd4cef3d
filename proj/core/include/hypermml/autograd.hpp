#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// double matrices. Every value is a 2-D matrix; scalars are 1x1.

#include "hypermml/tensor.hpp"

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hypermml::ag {

struct Node {
  Mat value;
  Mat grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Mat& g);
  bool has_grad() const { return grad.size() != 0; }
};

class Var {
 public:
  Var() = default;
  explicit Var(Mat value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Mat& value() const { return node_->value; }
  Mat& mutable_value() { return node_->value; }
  // Zero matrix of the right shape when no gradient has reached this node.
  Mat grad() const;
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const { return node_->value(0, 0); }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool defined() const { return static_cast<bool>(node_); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Mat value);
Var parameter(Mat value);
Var scalar(double v);

// Backpropagate from a 1x1 root. The graph is released afterwards unless
// retain_graph is set; parameter gradients accumulate across calls.
void backward(const Var& root, bool retain_graph = false);

// While alive, new ops on this thread record no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Builds a node from a value, its parents and a backward closure. The
// closure receives the output node after its gradient is complete.
Var make_op(Mat value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

// ---- elementwise / broadcasting -------------------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_row(const Var& a, const Var& row);  // row: 1 x cols(a)
Var mul_row(const Var& a, const Var& row);  // row: 1 x cols(a)
Var mul_col(const Var& a, const Var& col);  // col: rows(a) x 1
Var scale(const Var& a, double s);
Var mul_scalar(const Var& a, const Var& s);  // s: 1x1
Var add_scalar(const Var& a, double s);

Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var softplus(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var log1p(const Var& a);
Var reciprocal(const Var& a);
Var square(const Var& a);

// ---- linear algebra / reshaping -------------------------------------------
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var sum(const Var& a);       // 1x1
Var row_sum(const Var& a);   // rows x 1
Var col_sum(const Var& a);   // 1 x cols
Var col_mean(const Var& a);  // 1 x cols, mean over rows
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var select_rows(const Var& a, std::vector<Eigen::Index> rows);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);

// Matrix of shape rows x cols whose nonzero entries are copies of entries of
// a 1 x K source vector: out(r, c) = source(0, k) for each (r, c, k) entry.
struct ScatterEntry {
  Eigen::Index row;
  Eigen::Index col;
  Eigen::Index source;
};
Var scatter(const Var& source, Eigen::Index rows, Eigen::Index cols, std::vector<ScatterEntry> entries);

// ---- normalization / attention building blocks ----------------------------
Var softmax_rows(const Var& a);
// Normalizes every entry jointly (one mean / variance for the whole matrix).
Var layer_norm_all(const Var& a, double eps = 1e-5);
// Normalizes each row independently; no affine transform.
Var layer_norm_rows(const Var& a, double eps = 1e-5);

// Inverted dropout with a Bernoulli keep-mask drawn from rng.
Var dropout(const Var& a, double rate, std::mt19937_64& rng);

// Sum over rows of -log softmax(logits)[label], with probabilities clamped at
// 1e-12 before the log. Returns 1x1.
Var cross_entropy_sum(const Var& logits, std::span<const int> labels);

// sqrt(sum of squares) over all given tensors; zero gradient at the origin.
Var l2_norm(std::span<const Var> tensors);

// Fused GRU cell (gate order r, z, n). x_proj: B x 3H already holds
// x W_ih + b_ih; h: B x H; w_hh: H x 3H; b_hh: 1 x 3H.
Var gru_cell(const Var& x_proj, const Var& h, const Var& w_hh, const Var& b_hh);

}  // namespace hypermml::ag
