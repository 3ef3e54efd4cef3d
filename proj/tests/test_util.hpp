#pragma once

#include "hypermml/autograd.hpp"
#include "hypermml/params.hpp"

#include <functional>
#include <random>
#include <vector>

namespace testutil {

using hypermml::Mat;
using hypermml::ag::Var;

inline Mat randn(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * hypermml::standard_normal(rng);
  return m;
}

// Central differences of f with respect to every entry of x.
inline Mat numeric_grad(Var x, const std::function<double()>& f, double h = 1e-6) {
  Mat g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.value().size(); ++i) {
    double& v = x.mutable_value().data()[i];
    const double orig = v;
    v = orig + h;
    const double up = f();
    v = orig - h;
    const double down = f();
    v = orig;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double rel_err(const Mat& a, const Mat& b) {
  const double d = a.norm() + b.norm();
  return d == 0 ? 0.0 : (a - b).norm() / d;
}

// Scalar read-out sum(W .* out) with a fixed random W.
struct Readout {
  Mat w;
  Var operator()(const Var& out) {
    if (w.size() == 0) {
      std::mt19937_64 rng(99);
      w = randn(out.rows(), out.cols(), rng);
    }
    return hypermml::ag::sum(hypermml::ag::mul(out, hypermml::ag::constant(w)));
  }
};

// Analytic vs numeric gradient of sum(W .* op(inputs)) for each input.
inline double op_grad_error(std::vector<Var> inputs, const std::function<Var(const std::vector<Var>&)>& op) {
  Readout r;
  for (auto& in : inputs) in.zero_grad();
  hypermml::ag::backward(r(op(inputs)));
  double worst = 0.0;
  for (auto& in : inputs) {
    if (!in.requires_grad()) continue;
    const Mat analytic = in.grad();
    hypermml::ag::NoGradGuard guard;
    const Mat numeric = numeric_grad(in, [&] { return r(op(inputs)).item(); });
    worst = std::max(worst, rel_err(analytic, numeric));
  }
  return worst;
}

}  // namespace testutil
