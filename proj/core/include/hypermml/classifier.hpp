#pragma once

// Two-layer classification head, the regularized cross-entropy objective and
// evaluation metrics.

#include "hypermml/autograd.hpp"
#include "hypermml/params.hpp"

#include <optional>
#include <random>
#include <span>
#include <vector>

namespace hypermml {

struct PredictionBatch {
  Mat probabilities;           // N x K
  std::vector<int> predicted;  // row argmax, ties to the lowest index
  Mat hidden;                  // N x hidden
};

// Row-wise softmax of plain logits.
Mat softmax(const Mat& logits);
// Lowest index among the row maxima.
std::vector<int> argmax_rows(const Mat& m);

class ClassifierHead {
 public:
  // Registers classifier/w_c, b_c, w_o, b_o.
  ClassifierHead(int in_dim, int hidden, int classes, ParamStore& params, std::mt19937_64& rng);

  int in_dim() const { return in_dim_; }
  int hidden() const { return hidden_; }
  int classes() const { return classes_; }

  // Hidden activations; dropout is applied when a generator is supplied.
  ag::Var hidden_layer(const ag::Var& f, double dropout_rate = 0.0, std::mt19937_64* rng = nullptr) const;
  ag::Var logits(const ag::Var& f, double dropout_rate = 0.0, std::mt19937_64* rng = nullptr) const;
  PredictionBatch classify(const Mat& f) const;

  const ag::Var& w_c() const { return w_c_; }
  const ag::Var& b_c() const { return b_c_; }
  const ag::Var& w_o() const { return w_o_; }
  const ag::Var& b_o() const { return b_o_; }

 private:
  int in_dim_, hidden_, classes_;
  ag::Var w_c_, b_c_, w_o_, b_o_;
};

inline constexpr double kDefaultL2 = 1e-5;

// Mean cross-entropy over all rows plus lambda * ||theta||_2 (the norm).
ag::Var regularized_loss(const ag::Var& logits, std::span<const int> labels, std::span<const ag::Var> theta,
                         double lambda);

// Same objective on probabilities; P[y] is clamped at 1e-12.
double loss_value(const Mat& probabilities, std::span<const int> labels, double theta_norm, double lambda);

struct Metrics {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
  std::vector<long> support;
  std::vector<std::vector<long>> confusion;  // [true][predicted]
  long total = 0;
};

// Throws ArgumentError on empty or mismatched inputs and out-of-range labels.
Metrics compute_metrics(std::span<const int> predicted, std::span<const int> truth, int num_classes);
Metrics metrics_from_confusion(const std::vector<std::vector<long>>& confusion);

}  // namespace hypermml
