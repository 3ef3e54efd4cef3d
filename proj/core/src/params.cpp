#include "hypermml/params.hpp"

#include "hypermml/errors.hpp"

#include <cmath>
#include <numbers>

namespace hypermml {

ag::Var ParamStore::add(const std::string& name, Mat init) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  index_.emplace(name, entries_.size());
  entries_.push_back({name, ag::parameter(std::move(init))});
  return entries_.back().var;
}

ag::Var ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw LookupError("unknown parameter: " + name);
  return entries_[it->second].var;
}

std::vector<ag::Var> ParamStore::vars() const {
  std::vector<ag::Var> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.var);
  return out;
}

std::vector<NamedParam> ParamStore::group(const std::string& prefix) const {
  std::vector<NamedParam> out;
  for (const auto& e : entries_) {
    if (e.name.rfind(prefix, 0) == 0) out.push_back(e);
  }
  return out;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.var.value().size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

Mat fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * uniform01(rng) - 1.0) * bound;
  return m;
}

double standard_normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Adam::Adam(const ParamStore& params, AdamOptions options) : params_(params.vars()), options_(options) {
  for (const auto& p : params_) {
    m_.push_back(Mat::Zero(p.rows(), p.cols()));
    v_.push_back(Mat::Zero(p.rows(), p.cols()));
  }
}

void Adam::step() {
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(options_.beta1, t);
  const double bc2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.node()->has_grad()) continue;
    const Mat& g = p.node()->grad;
    m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * g;
    v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * g.cwiseProduct(g);
    const auto mhat = m_[i].array() / bc1;
    const auto vhat = v_[i].array() / bc2;
    p.mutable_value().array() -= options_.learning_rate * mhat / (vhat.sqrt() + options_.eps);
  }
}

void Adam::restore(long long steps, std::vector<Mat> m, std::vector<Mat> v) {
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw ConfigError("optimizer state does not match parameter count");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (m[i].rows() != params_[i].rows() || m[i].cols() != params_[i].cols() ||
        v[i].rows() != params_[i].rows() || v[i].cols() != params_[i].cols()) {
      throw ConfigError("optimizer state shape mismatch");
    }
  }
  step_count_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace hypermml
