#include "hypermml/classifier.hpp"
#include "hypermml/errors.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hypermml;
using testutil::randn;

TEST(Softmax, TwoClassExampleAndShift) {
  const Mat p = softmax((Mat(1, 2) << 2.0, 0.0).finished());
  EXPECT_NEAR(p(0, 0), std::exp(2.0) / (std::exp(2.0) + 1.0), 1e-15);
  EXPECT_NEAR(p(0, 0), 0.8808, 1e-4);
  EXPECT_NEAR(p(0, 1), 0.1192, 1e-4);
  std::mt19937_64 rng(1);
  const Mat z = randn(5, 4, rng);
  const Mat shifted = z + randn(5, 1, rng).replicate(1, 4);
  EXPECT_LT((softmax(z) - softmax(shifted)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(argmax_rows(z), argmax_rows(shifted));
}

TEST(Softmax, RowsOnSimplex) {
  std::mt19937_64 rng(2);
  const Mat p = softmax(randn(1000, 5, rng, 10.0));
  EXPECT_LT((p.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_GE(p.minCoeff(), 0.0);
}

TEST(Argmax, TiesGoToLowestIndex) {
  EXPECT_EQ(argmax_rows((Mat(2, 3) << 1, 1, 1, 0, 2, 2).finished()), (std::vector<int>{0, 1}));
}

TEST(ClassifierHead, ZeroOutputLayerIsUniform) {
  ParamStore ps;
  std::mt19937_64 rng(3);
  ClassifierHead head(6, 9, 4, ps, rng);
  ps.get("classifier/w_o").mutable_value().setZero();
  const auto out = head.classify(randn(3, 6, rng));
  EXPECT_LT((out.probabilities.array() - 0.25).abs().maxCoeff(), 1e-15);
  EXPECT_EQ(out.predicted, (std::vector<int>{0, 0, 0}));
  EXPECT_EQ(out.hidden.cols(), 9);
  EXPECT_GE(out.hidden.minCoeff(), 0.0);
}

TEST(ClassifierHead, MatchesPlainForward) {
  ParamStore ps;
  std::mt19937_64 rng(4);
  ClassifierHead head(5, 7, 3, ps, rng);
  ps.get("classifier/b_c").mutable_value() = randn(1, 7, rng);
  const Mat f = randn(4, 5, rng);
  const Mat h = (f * head.w_c().value()).rowwise() + Eigen::RowVectorXd(head.b_c().value().row(0));
  const Mat z = h.cwiseMax(0.0) * head.w_o().value();
  EXPECT_LT((head.logits(ag::constant(f)).value() - z).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(head.classify(randn(4, 6, rng)), ShapeError);
}

TEST(ClassifierHead, DropoutOnlyWithGenerator) {
  ParamStore ps;
  std::mt19937_64 rng(5);
  ClassifierHead head(5, 40, 3, ps, rng);
  const Mat f = randn(3, 5, rng).cwiseAbs();
  const Mat plain = head.hidden_layer(ag::constant(f), 0.5).value();
  std::mt19937_64 drop(6);
  const Mat dropped = head.hidden_layer(ag::constant(f), 0.5, &drop).value();
  EXPECT_NE(plain, dropped);
  for (Eigen::Index i = 0; i < plain.size(); ++i) {
    const double d = dropped.data()[i];
    EXPECT_TRUE(d == 0.0 || std::abs(d - 2.0 * plain.data()[i]) < 1e-14);
  }
}

TEST(Loss, ClosedForms) {
  const std::vector<int> y = {0, 1, 2};
  EXPECT_NEAR(loss_value(Mat::Identity(3, 3), y, 0.0, 0.0), 0.0, 1e-15);
  EXPECT_NEAR(loss_value(Mat::Constant(3, 5, 0.2), y, 0.0, 0.0), std::log(5.0), 1e-12);
  EXPECT_NEAR(loss_value(Mat::Constant(3, 5, 0.2), y, 0.0, 0.5), std::log(5.0), 1e-12);
  // Clamped at 1e-12 before the log.
  EXPECT_NEAR(loss_value(Mat::Zero(1, 2), std::vector<int>{1}, 0.0, 0.0), -std::log(1e-12), 1e-9);
  EXPECT_NEAR(loss_value(Mat::Constant(1, 2, 0.5), std::vector<int>{0}, 3.0, 0.1), std::log(2.0) + 0.3, 1e-12);
}

TEST(Loss, AutogradMatchesPlainObjective) {
  std::mt19937_64 rng(7);
  const Mat z = randn(6, 4, rng);
  const std::vector<int> y = {0, 3, 1, 1, 2, 0};
  const std::vector<ag::Var> theta = {ag::parameter(randn(3, 3, rng)), ag::parameter(randn(1, 4, rng))};
  const double norm = std::sqrt(theta[0].value().squaredNorm() + theta[1].value().squaredNorm());
  const double lambda = 0.01;
  const double plain = loss_value(softmax(z), y, norm, lambda);
  EXPECT_NEAR(regularized_loss(ag::constant(z), y, theta, lambda).item(), plain, 1e-12);
  const std::vector<ag::Var> zeros = {ag::parameter(Mat::Zero(2, 2))};
  EXPECT_NEAR(regularized_loss(ag::constant(z), y, zeros, 1.0).item(), loss_value(softmax(z), y, 0.0, 0.0), 1e-12);
  EXPECT_THROW(regularized_loss(ag::constant(z), std::vector<int>{0}, theta, lambda), ShapeError);
}

TEST(Loss, GradientStepDescends) {
  ParamStore ps;
  std::mt19937_64 rng(8);
  ClassifierHead head(4, 6, 3, ps, rng);
  const Mat f = randn(8, 4, rng);
  const std::vector<int> y = {0, 1, 2, 0, 1, 2, 0, 1};
  const auto theta = ps.vars();
  auto loss = [&] { return regularized_loss(head.logits(ag::constant(f)), y, theta, kDefaultL2); };
  const ag::Var l0 = loss();
  ag::backward(l0);
  for (const auto& p : ps.entries()) ps.get(p.name).mutable_value() -= 1e-2 * p.var.grad();
  ps.zero_grad();
  EXPECT_LT(loss().item(), l0.item());
}

TEST(Metrics, HandExample) {
  const std::vector<int> y = {0, 0, 1, 1}, p = {0, 1, 1, 1};
  const Metrics m = compute_metrics(p, y, 2);
  EXPECT_NEAR(m.accuracy, 0.75, 1e-15);
  EXPECT_NEAR(m.per_class_f1[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.per_class_f1[1], 0.8, 1e-15);
  EXPECT_NEAR(m.weighted_f1, 0.7333, 1e-4);
  EXPECT_NEAR(m.macro_f1, (2.0 / 3.0 + 0.8) / 2.0, 1e-15);
  EXPECT_EQ(m.confusion, (std::vector<std::vector<long>>{{1, 1}, {0, 2}}));
}

TEST(Metrics, PerfectAndAllWrong) {
  const std::vector<int> y = {0, 1, 2, 2, 1};
  const Metrics ok = compute_metrics(y, y, 3);
  EXPECT_EQ(ok.accuracy, 1.0);
  EXPECT_EQ(ok.weighted_f1, 1.0);
  const std::vector<int> wrong = {1, 2, 0, 0, 2};
  EXPECT_EQ(compute_metrics(wrong, y, 3).accuracy, 0.0);
}

TEST(Metrics, ConsistentWithConfusionOnly) {
  std::mt19937_64 rng(9);
  std::vector<int> y, p;
  for (int i = 0; i < 200; ++i) {
    y.push_back(int(rng() % 4));
    p.push_back(int(rng() % 4));
  }
  const Metrics a = compute_metrics(p, y, 4);
  const Metrics b = metrics_from_confusion(a.confusion);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.weighted_f1, b.weighted_f1);
  EXPECT_EQ(a.per_class_f1, b.per_class_f1);
  long total = 0;
  for (long s : a.support) total += s;
  EXPECT_EQ(total, 200);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(compute_metrics(std::vector<int>{}, std::vector<int>{}, 2), ArgumentError);
  EXPECT_THROW(compute_metrics(std::vector<int>{0}, std::vector<int>{0, 1}, 2), ArgumentError);
  EXPECT_THROW(compute_metrics(std::vector<int>{3}, std::vector<int>{0}, 2), ArgumentError);
}
