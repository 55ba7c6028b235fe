#include "roost/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace roost {

namespace {

bool in_unit_square(std::span<const double> x) {
  return x.size() == 2 && x[0] >= 0.0 && x[0] <= 1.0 && x[1] >= 0.0 && x[1] <= 1.0;
}

}  // namespace

TargetPair coinflip_target(long n, long y) {
  if (n < 1 || y < 0 || y > n)
    throw ArgumentError("coinflip: need n >= 1 and 0 <= y <= n, got n=" + std::to_string(n) +
                        " y=" + std::to_string(y));
  const double nd = static_cast<double>(n);
  const double yd = static_cast<double>(y);
  const double log_choose = std::lgamma(nd + 1.0) - std::lgamma(yd + 1.0) - std::lgamma(nd - yd + 1.0);
  const double ridge = std::sqrt(std::clamp(yd / nd, 0.01, 0.99));
  std::vector<double> initial{ridge, ridge};

  LogPotential target(
      2,
      [=](std::span<const double> x) {
        if (!in_unit_square(x)) return kNegInf;
        const double q = x[0] * x[1];
        double lp = log_choose;
        if (y > 0) {
          if (q <= 0.0) return kNegInf;
          lp += yd * std::log(q);
        }
        if (y < n) {
          if (q >= 1.0) return kNegInf;
          lp += (nd - yd) * std::log1p(-q);
        }
        return lp;
      },
      initial);
  LogPotential reference(
      2, [](std::span<const double> x) { return in_unit_square(x) ? 0.0 : kNegInf; }, initial);
  return {std::move(target), std::move(reference)};
}

TargetPair bimodal_target(double separation, double sd) {
  if (!(separation > 0.0) || !(sd > 0.0))
    throw ArgumentError("bimodal: separation and sd must be positive");
  const double c = separation;
  const double var = sd * sd;
  const double log_norm = -std::log(2.0 * M_PI * var);
  const double ref_sd = std::max(3.0 * c, 3.0 * sd);
  const double ref_var = ref_sd * ref_sd;
  const double ref_log_norm = -std::log(2.0 * M_PI * ref_var);
  std::vector<double> initial{c, c};

  LogPotential target(
      2,
      [=](std::span<const double> x) {
        if (x.size() != 2) return kNegInf;
        const double lo = -0.5 * ((x[0] + c) * (x[0] + c) + (x[1] + c) * (x[1] + c)) / var;
        const double hi = -0.5 * ((x[0] - c) * (x[0] - c) + (x[1] - c) * (x[1] - c)) / var;
        const double m = std::max(lo, hi);
        return log_norm + std::log(0.5) + m + std::log(std::exp(lo - m) + std::exp(hi - m));
      },
      initial);
  LogPotential reference(
      2,
      [=](std::span<const double> x) {
        if (x.size() != 2) return kNegInf;
        return ref_log_norm - 0.5 * (x[0] * x[0] + x[1] * x[1]) / ref_var;
      },
      initial);
  return {std::move(target), std::move(reference)};
}

TargetPair mvn_target(int dimension, double reference_sd) {
  if (dimension < 1) throw ArgumentError("mvn: dimension must be at least 1");
  if (!(reference_sd > 0.0)) throw ArgumentError("mvn: reference sd must be positive");
  const auto d = static_cast<std::size_t>(dimension);
  auto half_sq = [d](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += x[i] * x[i];
    return 0.5 * s;
  };
  const double inv_var = 1.0 / (reference_sd * reference_sd);
  LogPotential target(d, [=](std::span<const double> x) {
    return x.size() == d ? -half_sq(x) : kNegInf;
  });
  LogPotential reference(d, [=](std::span<const double> x) {
    if (x.size() != d) return kNegInf;
    return -half_sq(x) * inv_var;
  });
  return {std::move(target), std::move(reference)};
}

}  // namespace roost
