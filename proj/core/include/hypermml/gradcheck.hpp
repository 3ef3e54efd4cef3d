#pragma once

// Central finite differences against the autograd gradients, per parameter
// tensor, on tiny shapes.

#include "hypermml/autograd.hpp"
#include "hypermml/params.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hypermml {

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kAffineGradTolerance = 1e-6;

struct GroupError {
  std::string name;
  double rel_error = 0.0;  // ||analytic - numeric|| / (||analytic|| + ||numeric||)
  bool affine = false;     // loss is affine in this tensor: tighter tolerance
  std::size_t entries = 0;
};

struct GradCheckReport {
  std::string module;
  std::vector<GroupError> groups;
  double worst = 0.0;
  double seconds = 0.0;

  bool passed() const;
};

// Compares gradients of loss() for every tensor in params. affine(name)
// selects the tighter tolerance.
std::vector<GroupError> check_gradients(ParamStore& params, const std::function<ag::Var()>& loss,
                                        const std::function<bool(const std::string&)>& affine = {},
                                        double step = kFiniteDifferenceStep);

// module: abema, encoders, hypergraph or classifier. Throws ArgumentError otherwise.
GradCheckReport gradient_check(const std::string& module, std::uint64_t seed = 7);

std::vector<std::string> gradcheck_modules();

}  // namespace hypermml
