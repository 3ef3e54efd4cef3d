#pragma once

#include "hypermml/autograd.hpp"

#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace hypermml {

struct NamedParam {
  std::string name;
  ag::Var var;
};

// Ordered registry of trainable tensors. Names are slash-separated groups,
// e.g. "intra_mca/alpha/w_qd". Insertion order is the serialization order.
class ParamStore {
 public:
  ag::Var add(const std::string& name, Mat init);
  ag::Var get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<NamedParam>& entries() const { return entries_; }
  std::vector<ag::Var> vars() const;
  // Parameters whose name starts with prefix.
  std::vector<NamedParam> group(const std::string& prefix) const;
  std::size_t total_size() const;
  void zero_grad();

 private:
  std::vector<NamedParam> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Mat fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, std::mt19937_64& rng);

// Uniform double in [0, 1) from the top 53 bits; stable across standard libraries.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Standard normal via Box-Muller on uniform01.
double standard_normal(std::mt19937_64& rng);

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const ParamStore& params, AdamOptions options);

  void step();
  long long steps() const { return step_count_; }

  // Moment buffers in ParamStore order; used by checkpointing.
  const std::vector<Mat>& first_moments() const { return m_; }
  const std::vector<Mat>& second_moments() const { return v_; }
  void restore(long long steps, std::vector<Mat> m, std::vector<Mat> v);

 private:
  std::vector<ag::Var> params_;
  AdamOptions options_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  long long step_count_ = 0;
};

}  // namespace hypermml
