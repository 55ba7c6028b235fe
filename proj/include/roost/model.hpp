#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "roost/errors.hpp"

namespace roost {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Unnormalized log density log(gamma(x)). Returns -inf outside the support;
/// never throws for out-of-support points.
class LogPotential {
 public:
  using Evaluator = std::function<double(std::span<const double>)>;

  LogPotential() = default;
  LogPotential(std::size_t dimension, Evaluator evaluator, std::vector<double> initial = {})
      : dimension_(dimension), evaluator_(std::move(evaluator)), initial_(std::move(initial)) {
    if (dimension_ < 1) throw ArgumentError("LogPotential: dimension must be positive");
    if (initial_.empty()) initial_.assign(dimension_, 0.0);
    if (initial_.size() != dimension_)
      throw ArgumentError("LogPotential: initial state has wrong dimension");
  }

  double operator()(std::span<const double> x) const { return evaluator_(x); }
  bool in_support(std::span<const double> x) const { return evaluator_(x) > kNegInf; }

  std::size_t dimension() const { return dimension_; }
  /// A point inside the support, used to initialise every replica.
  const std::vector<double>& initial_state() const { return initial_; }

 private:
  std::size_t dimension_ = 0;
  Evaluator evaluator_;
  std::vector<double> initial_;
};

struct TargetPair {
  LogPotential target;
  LogPotential reference;
};

/// The annealing path beta -> log gamma_beta. Either the log-linear path
/// between a reference and a target, or an arbitrary family (e.g. one that a
/// foreign process tempers itself).
class Path {
 public:
  using Family = std::function<double(double beta, std::span<const double> x)>;

  Path() = default;

  /// log gamma_beta = (1 - beta) log gamma_ref + beta log gamma_target.
  /// Evaluated as ref + beta * (target - ref) so that beta = 0 and beta = 1
  /// reproduce the endpoints exactly and identical endpoints give an exactly
  /// flat path.
  static Path log_linear(LogPotential reference, LogPotential target);

  static Path from_family(std::size_t dimension, Family family, std::vector<double> initial);

  double log_density(double beta, std::span<const double> x) const { return family_(beta, x); }
  std::size_t dimension() const { return dimension_; }
  const std::vector<double>& initial_state() const { return initial_; }

 private:
  std::size_t dimension_ = 0;
  Family family_;
  std::vector<double> initial_;
};

inline double log_linear_mix(double beta, double ref, double target) {
  if (beta == 0.0) return ref;
  if (beta == 1.0) return target;
  if (ref == kNegInf || target == kNegInf) return kNegInf;
  return ref + beta * (target - ref);
}

inline Path Path::log_linear(LogPotential reference, LogPotential target) {
  if (reference.dimension() != target.dimension())
    throw ArgumentError("Path: reference and target dimensions differ");
  Path p;
  p.dimension_ = target.dimension();
  p.initial_ = target.initial_state();
  p.family_ = [ref = std::move(reference), tgt = std::move(target)](double beta,
                                                                    std::span<const double> x) {
    if (beta == 0.0) return ref(x);
    if (beta == 1.0) return tgt(x);
    return log_linear_mix(beta, ref(x), tgt(x));
  };
  return p;
}

inline Path Path::from_family(std::size_t dimension, Family family, std::vector<double> initial) {
  if (dimension < 1) throw ArgumentError("Path: dimension must be positive");
  if (initial.empty()) initial.assign(dimension, 0.0);
  if (initial.size() != dimension) throw ArgumentError("Path: initial state has wrong dimension");
  Path p;
  p.dimension_ = dimension;
  p.family_ = std::move(family);
  p.initial_ = std::move(initial);
  return p;
}

/// The tempered log potential at `beta` on `path`.
inline LogPotential interpolate(const Path& path, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0))
    throw ArgumentError("interpolate: beta must lie in [0, 1]");
  return LogPotential(
      path.dimension(), [path, beta](std::span<const double> x) { return path.log_density(beta, x); },
      path.initial_state());
}

/// Annealing parameters 0 = beta_1 < ... < beta_N = 1.
class Schedule {
 public:
  Schedule() = default;
  explicit Schedule(std::vector<double> betas) : betas_(std::move(betas)) { validate(); }

  static Schedule equally_spaced(int n_chains) {
    if (n_chains < 2) throw ArgumentError("Schedule: need at least two chains");
    std::vector<double> b(static_cast<std::size_t>(n_chains));
    for (int i = 0; i < n_chains; ++i) b[static_cast<std::size_t>(i)] = double(i) / (n_chains - 1);
    return Schedule(std::move(b));
  }

  int n_chains() const { return static_cast<int>(betas_.size()); }
  /// Annealing parameter of chain c (1-based).
  double beta(int chain) const { return betas_.at(static_cast<std::size_t>(chain - 1)); }
  const std::vector<double>& betas() const { return betas_; }

  friend bool operator==(const Schedule&, const Schedule&) = default;

 private:
  void validate() const {
    if (betas_.size() < 2) throw ArgumentError("Schedule: need at least two chains");
    if (betas_.front() != 0.0 || betas_.back() != 1.0)
      throw ArgumentError("Schedule: endpoints must be 0 and 1");
    for (std::size_t i = 1; i < betas_.size(); ++i)
      if (!(betas_[i] > betas_[i - 1])) throw ArgumentError("Schedule: betas must increase strictly");
  }

  std::vector<double> betas_;
};

/// Binomial(n, p1 * p2) likelihood with uniform priors on p1, p2; the target is
/// the unnormalized posterior, the reference the prior.
TargetPair coinflip_target(long n, long y);

/// Equal-weight mixture of two isotropic 2-D Gaussians at (-c, -c) and (c, c);
/// reference is a centred isotropic Gaussian with sd max(3c, 3 sd).
/// Both are normalized densities, so log(Z_target / Z_ref) = 0.
TargetPair bimodal_target(double separation = 2.0, double sd = 0.5);

/// Target -|x|^2 / 2, reference -|x|^2 / (2 s^2) (both without 2 pi factors).
/// log(Z_target / Z_ref) = -d log s exactly.
TargetPair mvn_target(int dimension, double reference_sd = 1.0);

inline double mvn_log_z_ratio(int dimension, double reference_sd) {
  return -dimension * std::log(reference_sd);
}

inline constexpr std::chrono::milliseconds kDefaultBridgeTimeout{30'000};

/// Log density served by a child process over the line protocol
///   engine -> bridge: "hello <d>\n", then "logd <beta> <x1> ... <xd>\n"
///   bridge -> engine: "ok\n", then "<decimal>\n" or "-inf\n".
/// Calls are serialized per process handle.
class BridgeProcess {
 public:
  BridgeProcess(std::vector<std::string> command, std::size_t dimension,
                std::chrono::milliseconds timeout = kDefaultBridgeTimeout);
  ~BridgeProcess();

  BridgeProcess(const BridgeProcess&) = delete;
  BridgeProcess& operator=(const BridgeProcess&) = delete;

  double evaluate(double beta, std::span<const double> x);
  std::size_t dimension() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Target log density (beta = 1) served by `command`.
LogPotential child_process_target(std::vector<std::string> command, std::size_t dimension,
                                  std::chrono::milliseconds timeout = kDefaultBridgeTimeout);

/// Path whose tempered densities are all computed by the bridge process.
Path child_process_path(std::vector<std::string> command, std::size_t dimension,
                        std::vector<double> initial,
                        std::chrono::milliseconds timeout = kDefaultBridgeTimeout);

/// Parses one bridge response line. Accepts finite decimals and "-inf".
double parse_bridge_response(const std::string& line);
std::string format_bridge_request(double beta, std::span<const double> x);

}  // namespace roost
