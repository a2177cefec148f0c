#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace gabornet {

/// Central-difference step and pass threshold for the analytic-vs-numeric suite.
inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradcheckTolerance = 1e-4;
/// Magnitude below which a gradient entry is compared on absolute rather
/// than relative error.
inline constexpr double kGradcheckFloor = 1e-6;

/// |a - n| / max(|a|, |n|, floor)
double gradient_error(double analytic, double numeric, double floor = kGradcheckFloor);

/// Central difference of f with respect to x[i], restoring x afterwards.
double central_difference(const std::function<double()>& f, double& x, double step);

struct CheckResult {
  std::string group;  // conv, maxpool, relu, gabor, dense, dropout, softmax_ce, network
  std::string name;
  int configurations = 0;
  double max_error = 0.0;
  bool passed = false;
};

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::string group;          // empty: every group
  bool inject_fault = false;  // scale analytic gradients by 1.01 (negative control)
  double tolerance = kGradcheckTolerance;
  int configurations = 20;
  int gabor_draws = 50;
};

/// Runs the finite-difference suite over every layer type, the four Gabor
/// parameter derivatives and a toy end-to-end network.
std::vector<CheckResult> run_gradcheck(const GradcheckOptions& options);

std::vector<std::string> gradcheck_groups();

}  // namespace gabornet
