#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "roost/bytes.hpp"
#include "roost/errors.hpp"

namespace roost {

/// Streaming mean / variance / extrema per coordinate (Welford), mergeable.
struct OnlineStats {
  std::uint64_t count = 0;
  std::vector<double> mean;
  std::vector<double> m2;  // sum of squared deviations
  std::vector<double> min;
  std::vector<double> max;

  void add(std::span<const double> x) {
    if (count == 0) {
      mean.assign(x.size(), 0.0);
      m2.assign(x.size(), 0.0);
      min.assign(x.begin(), x.end());
      max.assign(x.begin(), x.end());
    }
    ++count;
    const double n = static_cast<double>(count);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean[i];
      mean[i] += delta / n;
      m2[i] += delta * (x[i] - mean[i]);
      min[i] = std::min(min[i], x[i]);
      max[i] = std::max(max[i], x[i]);
    }
  }

  std::vector<double> variance() const {
    std::vector<double> v(m2.size(), 0.0);
    if (count >= 2)
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = m2[i] / static_cast<double>(count - 1);
    return v;
  }

  /// Pooled statistics: mean = mu_a + (n_b / n) (mu_b - mu_a), and
  /// m2 = m2_a + m2_b + delta^2 n_a n_b / n.
  static OnlineStats merge(const OnlineStats& a, const OnlineStats& b) {
    if (b.count == 0) return a;
    if (a.count == 0) return b;
    OnlineStats out;
    out.count = a.count + b.count;
    const double na = static_cast<double>(a.count);
    const double nb = static_cast<double>(b.count);
    const double n = static_cast<double>(out.count);
    const std::size_t d = a.mean.size();
    out.mean.resize(d);
    out.m2.resize(d);
    out.min.resize(d);
    out.max.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double delta = b.mean[i] - a.mean[i];
      out.mean[i] = a.mean[i] + (nb / n) * delta;
      out.m2[i] = a.m2[i] + b.m2[i] + delta * delta * na * nb / n;
      out.min[i] = std::min(a.min[i], b.min[i]);
      out.max[i] = std::max(a.max[i], b.max[i]);
    }
    return out;
  }

  void write(ByteWriter& w) const {
    w.put(count).put_doubles(mean).put_doubles(m2).put_doubles(min).put_doubles(max);
  }
  static OnlineStats read(ByteReader& r) {
    OnlineStats s;
    s.count = r.get<std::uint64_t>();
    s.mean = r.get_doubles();
    s.m2 = r.get_doubles();
    s.min = r.get_doubles();
    s.max = r.get_doubles();
    return s;
  }

  friend bool operator==(const OnlineStats&, const OnlineStats&) = default;
};

/// Running log(sum(exp(v))) kept as (max, sum of exp(v - max), count).
/// Identical increments accumulate exactly: k zeros give (0, k, k).
struct LogSumExp {
  double max = -std::numeric_limits<double>::infinity();
  double scaled = 0.0;
  std::uint64_t count = 0;

  void add(double v) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw KernelError("stepping stone: non-finite log increment");
    ++count;
    if (v == -std::numeric_limits<double>::infinity()) return;
    if (v > max) {
      scaled = scaled * std::exp(max - v) + 1.0;
      max = v;
    } else {
      scaled += std::exp(v - max);
    }
  }

  /// log of the sample mean of exp(v).
  double log_mean() const {
    if (count == 0) throw PreconditionError("stepping stone: no samples");
    if (scaled == 0.0) return -std::numeric_limits<double>::infinity();
    return max + std::log(scaled) - std::log(static_cast<double>(count));
  }

  static LogSumExp merge(const LogSumExp& a, const LogSumExp& b) {
    LogSumExp out;
    out.count = a.count + b.count;
    if (a.scaled == 0.0) {
      out.max = b.max;
      out.scaled = b.scaled;
    } else if (b.scaled == 0.0) {
      out.max = a.max;
      out.scaled = a.scaled;
    } else {
      out.max = std::max(a.max, b.max);
      out.scaled = a.scaled * std::exp(a.max - out.max) + b.scaled * std::exp(b.max - out.max);
    }
    return out;
  }

  friend bool operator==(const LogSumExp&, const LogSumExp&) = default;
};

/// Swap statistics of one adjacent pair (k, k + 1).
struct PairStats {
  double alpha_sum = 0.0;
  double rejection_sum = 0.0;
  std::uint64_t attempts = 0;

  void add(double alpha) {
    alpha_sum += alpha;
    rejection_sum += 1.0 - alpha;
    ++attempts;
  }

  double mean_alpha() const { return attempts ? alpha_sum / static_cast<double>(attempts) : 1.0; }
  double rejection_rate() const {
    return attempts ? rejection_sum / static_cast<double>(attempts) : 0.0;
  }

  static PairStats merge(const PairStats& a, const PairStats& b) {
    return {a.alpha_sum + b.alpha_sum, a.rejection_sum + b.rejection_sum, a.attempts + b.attempts};
  }

  friend bool operator==(const PairStats&, const PairStats&) = default;
};

/// Tempered restart / round trip accounting for one replica.
///
/// A restart is counted when a replica whose last visited endpoint was the
/// reference (chain 1) reaches the target (chain N); a round trip when it then
/// returns to the reference. Hence restarts >= round_trips always.
struct RoundTripState {
  enum class Flag : std::uint8_t { untouched = 0, hit_reference = 1, hit_target = 2 };

  Flag flag = Flag::untouched;
  std::uint64_t restarts = 0;
  std::uint64_t round_trips = 0;

  void observe(int chain, int n_chains) {
    if (chain == 1) {
      if (flag == Flag::hit_target) ++round_trips;
      flag = Flag::hit_reference;
    } else if (chain == n_chains) {
      if (flag == Flag::hit_reference) {
        ++restarts;
        flag = Flag::hit_target;
      }
    }
  }

  friend bool operator==(const RoundTripState&, const RoundTripState&) = default;
};

}  // namespace roost
