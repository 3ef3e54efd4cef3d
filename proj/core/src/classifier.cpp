#include "hypermml/classifier.hpp"

#include "hypermml/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hypermml {

Mat softmax(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

std::vector<int> argmax_rows(const Mat& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < m.cols(); ++j) {
      if (m(i, j) > m(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

ClassifierHead::ClassifierHead(int in_dim, int hidden, int classes, ParamStore& params, std::mt19937_64& rng)
    : in_dim_(in_dim), hidden_(hidden), classes_(classes) {
  if (in_dim < 1 || hidden < 1 || classes < 2) throw ArgumentError("ClassifierHead: invalid dimensions");
  w_c_ = params.add("classifier/w_c", fan_in_uniform(in_dim, hidden, in_dim, rng));
  b_c_ = params.add("classifier/b_c", Mat::Zero(1, hidden));
  w_o_ = params.add("classifier/w_o", fan_in_uniform(hidden, classes, hidden, rng));
  b_o_ = params.add("classifier/b_o", Mat::Zero(1, classes));
}

ag::Var ClassifierHead::hidden_layer(const ag::Var& f, double dropout_rate, std::mt19937_64* rng) const {
  if (f.cols() != in_dim_) throw ShapeError("ClassifierHead: input width mismatch");
  ag::Var h = ag::relu(ag::add_row(ag::matmul(f, w_c_), b_c_));
  if (rng != nullptr && dropout_rate > 0.0) h = ag::dropout(h, dropout_rate, *rng);
  return h;
}

ag::Var ClassifierHead::logits(const ag::Var& f, double dropout_rate, std::mt19937_64* rng) const {
  return ag::add_row(ag::matmul(hidden_layer(f, dropout_rate, rng), w_o_), b_o_);
}

PredictionBatch ClassifierHead::classify(const Mat& f) const {
  ag::NoGradGuard guard;
  const ag::Var h = hidden_layer(ag::constant(f));
  const ag::Var z = ag::add_row(ag::matmul(h, w_o_), b_o_);
  PredictionBatch out;
  out.probabilities = softmax(z.value());
  out.predicted = argmax_rows(out.probabilities);
  out.hidden = h.value();
  return out;
}

ag::Var regularized_loss(const ag::Var& logits, std::span<const int> labels, std::span<const ag::Var> theta,
                         double lambda) {
  if (labels.empty() || static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    throw ShapeError("regularized_loss: label count mismatch");
  }
  ag::Var loss = ag::scale(ag::cross_entropy_sum(logits, labels), 1.0 / static_cast<double>(labels.size()));
  if (lambda != 0.0 && !theta.empty()) loss = ag::add(loss, ag::scale(ag::l2_norm(theta), lambda));
  return loss;
}

double loss_value(const Mat& probabilities, std::span<const int> labels, double theta_norm, double lambda) {
  if (labels.empty() || static_cast<Eigen::Index>(labels.size()) != probabilities.rows()) {
    throw ShapeError("loss_value: label count mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= probabilities.cols()) throw ArgumentError("loss_value: label out of range");
    s -= std::log(std::max(probabilities(static_cast<Eigen::Index>(i), labels[i]), 1e-12));
  }
  return s / static_cast<double>(labels.size()) + lambda * theta_norm;
}

Metrics metrics_from_confusion(const std::vector<std::vector<long>>& confusion) {
  const std::size_t k = confusion.size();
  if (k == 0) throw ArgumentError("metrics: empty confusion matrix");
  Metrics m;
  m.confusion = confusion;
  m.per_class_f1.assign(k, 0.0);
  m.support.assign(k, 0);
  std::vector<long> predicted(k, 0);
  long correct = 0;
  for (std::size_t t = 0; t < k; ++t) {
    if (confusion[t].size() != k) throw ArgumentError("metrics: confusion matrix must be square");
    for (std::size_t p = 0; p < k; ++p) {
      m.support[t] += confusion[t][p];
      predicted[p] += confusion[t][p];
      m.total += confusion[t][p];
    }
    correct += confusion[t][t];
  }
  if (m.total == 0) throw ArgumentError("metrics: no samples");
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.total);
  for (std::size_t c = 0; c < k; ++c) {
    const double tp = static_cast<double>(confusion[c][c]);
    const double denom = static_cast<double>(m.support[c] + predicted[c]);
    m.per_class_f1[c] = denom > 0 ? 2.0 * tp / denom : 0.0;
    m.weighted_f1 += m.per_class_f1[c] * static_cast<double>(m.support[c]) / static_cast<double>(m.total);
    m.macro_f1 += m.per_class_f1[c] / static_cast<double>(k);
  }
  return m;
}

Metrics compute_metrics(std::span<const int> predicted, std::span<const int> truth, int num_classes) {
  if (predicted.empty() || predicted.size() != truth.size()) {
    throw ArgumentError("compute_metrics: inputs must be non-empty and of equal length");
  }
  if (num_classes < 1) throw ArgumentError("compute_metrics: num_classes must be positive");
  std::vector<std::vector<long>> confusion(static_cast<std::size_t>(num_classes),
                                           std::vector<long>(static_cast<std::size_t>(num_classes), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 || predicted[i] >= num_classes) {
      throw ArgumentError("compute_metrics: label out of range");
    }
    ++confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return metrics_from_confusion(confusion);
}

}  // namespace hypermml
