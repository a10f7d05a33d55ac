#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "qsmlot/nn/tensor.hpp"
#include "qsmlot/rng.hpp"

namespace qsmlot::nn {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::int64_t params_checked = 0;
  std::int64_t inputs_checked = 0;
};

namespace gradcheck_detail {

inline double rel_err(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace gradcheck_detail

// Compares reverse-mode gradients against central finite differences on a
// random subsample of coordinates. Only meaningful in double precision.
//
//   loss_fn()            : full forward + loss on the current state
//   backward_fn()        : zero grads, forward, backward; returns loss
//   params               : parameters to probe (their .grad is read)
//   input / input_grad   : optional input tensor and its analytic gradient
//
// Callers drive backward_fn once, then this probes coordinates by bumping
// values and re-running loss_fn.
class GradChecker {
 public:
  GradChecker(std::function<double()> loss_fn, std::uint64_t seed = 42)
      : loss_(std::move(loss_fn)), rng_(seed) {}

  template <class T>
  void check_param(Param<T>& p, GradCheckResult& res, int max_coords = 120, double eps = 1e-5) {
    const auto n = static_cast<std::int64_t>(p.value.size());
    const std::int64_t probes = std::min<std::int64_t>(n, max_coords);
    for (std::int64_t k = 0; k < probes; ++k) {
      const auto i = static_cast<std::size_t>(
          probes == n ? k : rng_.uniform_int(0, n - 1));
      const T saved = p.value[i];
      const double h = eps * std::max(1.0, std::abs(static_cast<double>(saved)));
      p.value[i] = saved + static_cast<T>(h);
      const double up = loss_();
      p.value[i] = saved - static_cast<T>(h);
      const double down = loss_();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      res.max_rel_err = std::max(
          res.max_rel_err, gradcheck_detail::rel_err(static_cast<double>(p.grad[i]), numeric));
      ++res.params_checked;
    }
  }

  template <class T>
  void check_input(Tensor5<T>& input, const Tensor5<T>& analytic_grad, GradCheckResult& res,
                   int max_coords = 120, double eps = 1e-5) {
    const std::int64_t n = input.size();
    const std::int64_t probes = std::min<std::int64_t>(n, max_coords);
    for (std::int64_t k = 0; k < probes; ++k) {
      const auto i = static_cast<std::size_t>(
          probes == n ? k : rng_.uniform_int(0, n - 1));
      const T saved = input.data[i];
      const double h = eps * std::max(1.0, std::abs(static_cast<double>(saved)));
      input.data[i] = saved + static_cast<T>(h);
      const double up = loss_();
      input.data[i] = saved - static_cast<T>(h);
      const double down = loss_();
      input.data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      res.max_rel_err = std::max(
          res.max_rel_err,
          gradcheck_detail::rel_err(static_cast<double>(analytic_grad.data[i]), numeric));
      ++res.inputs_checked;
    }
  }

 private:
  std::function<double()> loss_;
  Rng rng_;
};

}  // namespace qsmlot::nn
