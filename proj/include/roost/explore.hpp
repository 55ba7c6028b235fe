#pragma once

#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "roost/errors.hpp"
#include "roost/model.hpp"

namespace roost {

/// Anything that yields uniform draws in [0, 1).
template <class R>
concept UniformSource = requires(R& r) {
  { r.next_unit_f64() } -> std::convertible_to<double>;
};

enum class ExplorerKind { slice, rwm };

struct ExplorerConfig {
  ExplorerKind kind = ExplorerKind::slice;
  double slice_width = 1.0;
  int slice_max_doublings = 10;
  double rwm_step = 0.5;
  int passes_per_scan = 3;

  static constexpr int kMaxShrinkSteps = 1000;

  void validate() const {
    if (!(slice_width > 0.0)) throw ArgumentError("explorer: slice width must be positive");
    if (slice_max_doublings < 0) throw ArgumentError("explorer: max doublings must be >= 0");
    if (!(rwm_step > 0.0)) throw ArgumentError("explorer: rwm step must be positive");
    if (passes_per_scan < 1) throw ArgumentError("explorer: passes per scan must be >= 1");
  }
};

namespace detail {

template <class Density>
double eval_with(const Density& logp, std::vector<double>& x, std::size_t axis, double value) {
  const double saved = x[axis];
  x[axis] = value;
  const double lp = logp(std::span<const double>(x));
  x[axis] = saved;
  if (std::isnan(lp)) throw KernelError("log density returned NaN");
  return lp;
}

template <UniformSource R>
double standard_normal(R& rng) {
  const double u1 = 1.0 - rng.next_unit_f64();  // (0, 1]
  const double u2 = rng.next_unit_f64();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace detail

/// One coordinate update of the slice sampler with the doubling procedure and
/// the acceptability check for doubled intervals (Neal 2003, Figs. 4-6).
/// `current_logp` is logp(state) on entry and on exit.
template <class Density, UniformSource R>
void slice_sample_coordinate(std::vector<double>& state, std::size_t axis, const Density& logp,
                             R& rng, const ExplorerConfig& cfg, double& current_logp) {
  const double w = cfg.slice_width;
  const double x0 = state[axis];
  const double level = current_logp + std::log(1.0 - rng.next_unit_f64());
  auto f = [&](double v) { return detail::eval_with(logp, state, axis, v); };

  double left = x0 - w * rng.next_unit_f64();
  double right = left + w;
  double f_left = f(left);
  double f_right = f(right);
  for (int k = cfg.slice_max_doublings; k > 0 && (level < f_left || level < f_right); --k) {
    if (rng.next_unit_f64() < 0.5) {
      left -= right - left;
      f_left = f(left);
    } else {
      right += right - left;
      f_right = f(right);
    }
  }

  // Whether x1 could have produced the same doubled interval (Neal, Fig. 6).
  auto acceptable = [&](double x1) {
    double lh = left;
    double rh = right;
    double f_lh = f_left;
    double f_rh = f_right;
    bool differ = false;
    while (rh - lh > 1.1 * w) {
      const double mid = 0.5 * (lh + rh);
      if ((x0 < mid && x1 >= mid) || (x0 >= mid && x1 < mid)) differ = true;
      if (x1 < mid) {
        rh = mid;
        f_rh = f(rh);
      } else {
        lh = mid;
        f_lh = f(lh);
      }
      if (differ && level >= f_lh && level >= f_rh) return false;
    }
    return true;
  };

  double lo = left;
  double hi = right;
  for (int step = 0; step < ExplorerConfig::kMaxShrinkSteps; ++step) {
    const double x1 = lo + rng.next_unit_f64() * (hi - lo);
    const double f1 = f(x1);
    if (level < f1 && acceptable(x1)) {
      state[axis] = x1;
      current_logp = f1;
      return;
    }
    if (x1 < x0)
      lo = x1;
    else
      hi = x1;
  }
  throw KernelError("slice sampler: no acceptable point after " +
                    std::to_string(ExplorerConfig::kMaxShrinkSteps) + " shrink steps on axis " +
                    std::to_string(axis));
}

/// Gaussian random-walk Metropolis with a fixed isotropic step.
template <class Density, UniformSource R>
void rwm_step(std::vector<double>& state, const Density& logp, R& rng, const ExplorerConfig& cfg,
              double& current_logp) {
  std::vector<double> proposal(state);
  for (double& v : proposal) v += cfg.rwm_step * detail::standard_normal(rng);
  const double lp = logp(std::span<const double>(proposal));
  if (std::isnan(lp)) throw KernelError("log density returned NaN");
  const double u = rng.next_unit_f64();
  if (lp > kNegInf && std::log(u) < lp - current_logp) {
    state = std::move(proposal);
    current_logp = lp;
  }
}

/// Local exploration: passes_per_scan sweeps of the configured kernel,
/// drawing randomness only from `rng`. Returns logp of the final state.
template <class Density, UniformSource R>
double explore_in_place(std::vector<double>& state, const Density& logp, R& rng,
                        const ExplorerConfig& cfg) {
  double current = logp(std::span<const double>(state));
  if (!(current > kNegInf))
    throw PreconditionError("explore: initial state is outside the support");
  for (int pass = 0; pass < cfg.passes_per_scan; ++pass) {
    if (cfg.kind == ExplorerKind::slice) {
      for (std::size_t axis = 0; axis < state.size(); ++axis)
        slice_sample_coordinate(state, axis, logp, rng, cfg, current);
    } else {
      rwm_step(state, logp, rng, cfg, current);
    }
  }
  return current;
}

template <class Density, UniformSource R>
std::vector<double> explore(std::vector<double> state, const Density& logp, R& rng,
                            const ExplorerConfig& cfg) {
  explore_in_place(state, logp, rng, cfg);
  return state;
}

}  // namespace roost
