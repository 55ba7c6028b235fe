#include <gtest/gtest.h>

#include <cmath>

#include "roost/explore.hpp"
#include "roost/model.hpp"
#include "roost/rng.hpp"

using namespace roost;

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

/// Runs `scans` explorer scans on a 1-D density and returns the sample moments.
template <class Density>
Moments run_chain(const Density& logp, ExplorerConfig cfg, int scans, std::uint64_t seed, double x0 = 0.0) {
  auto rng = new_rng(seed);
  std::vector<double> x{x0};
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < scans; ++i) {
    explore_in_place(x, logp, rng, cfg);
    sum += x[0];
    sq += x[0] * x[0];
  }
  const double m = sum / scans;
  return {m, sq / scans - m * m};
}

const auto std_normal = [](std::span<const double> x) { return -0.5 * x[0] * x[0]; };

}  // namespace

TEST(Explore, DeterministicGivenRng) {
  auto p = bimodal_target();
  ExplorerConfig cfg;
  for (auto kind : {ExplorerKind::slice, ExplorerKind::rwm}) {
    cfg.kind = kind;
    auto a = new_rng(5);
    auto b = new_rng(5);
    std::vector<double> xa = p.target.initial_state();
    std::vector<double> xb = xa;
    for (int i = 0; i < 200; ++i) {
      explore_in_place(xa, p.target, a, cfg);
      explore_in_place(xb, p.target, b, cfg);
      ASSERT_EQ(xa, xb);
    }
    EXPECT_EQ(a, b);
  }
}

TEST(Explore, StaysInSupport) {
  auto p = coinflip_target(100, 30);
  ExplorerConfig cfg;
  for (auto kind : {ExplorerKind::slice, ExplorerKind::rwm}) {
    cfg.kind = kind;
    auto rng = new_rng(8);
    std::vector<double> x = p.target.initial_state();
    for (int i = 0; i < 2000; ++i) {
      explore_in_place(x, p.target, rng, cfg);
      ASSERT_TRUE(p.target.in_support(x));
    }
  }
}

TEST(Explore, RejectsStartOutsideSupport) {
  auto p = coinflip_target(10, 3);
  auto rng = new_rng(1);
  std::vector<double> x{2.0, 0.5};
  EXPECT_THROW(explore_in_place(x, p.target, rng, ExplorerConfig{}), PreconditionError);
}

TEST(Explore, NanDensityIsKernelError) {
  auto rng = new_rng(1);
  std::vector<double> x{0.0};
  int calls = 0;
  auto bad = [&](std::span<const double>) { return ++calls > 1 ? std::nan("") : 0.0; };
  EXPECT_THROW(explore_in_place(x, bad, rng, ExplorerConfig{}), KernelError);
}

TEST(Explore, RwmStandardNormalVariance) {
  ExplorerConfig cfg;
  cfg.kind = ExplorerKind::rwm;
  const auto m = run_chain(std_normal, cfg, 100'000, 12);
  EXPECT_NEAR(m.var, 1.0, 0.05);
  EXPECT_NEAR(m.mean, 0.0, 0.05);
}

TEST(Explore, SliceStandardNormalMoments) {
  const auto m = run_chain(std_normal, ExplorerConfig{}, 50'000, 13);
  // Slice draws are close to independent; 4 SE on the mean.
  EXPECT_NEAR(m.mean, 0.0, 4.0 / std::sqrt(50'000.0));
  EXPECT_NEAR(m.var, 1.0, 0.03);
}

TEST(Explore, SliceNarrowGaussianRecoversScale) {
  // sd 1e-3 is three orders below the initial width; doubling must shrink fast.
  const double sd = 1e-3;
  auto narrow = [sd](std::span<const double> x) { return -0.5 * (x[0] - 5.0) * (x[0] - 5.0) / (sd * sd); };
  const auto m = run_chain(narrow, ExplorerConfig{}, 20'000, 14, 5.0);
  EXPECT_NEAR(m.mean, 5.0, 12.0 * sd / std::sqrt(20'000.0));
  EXPECT_NEAR(std::sqrt(m.var) / sd, 1.0, 0.05);
}

TEST(Explore, SliceWideGaussianNeedsDoubling) {
  const double sd = 50.0;
  auto wide = [sd](std::span<const double> x) { return -0.5 * x[0] * x[0] / (sd * sd); };
  const auto m = run_chain(wide, ExplorerConfig{}, 50'000, 15);
  EXPECT_NEAR(std::sqrt(m.var) / sd, 1.0, 0.05);
}

TEST(Explore, SliceOnBoundedSupport) {
  // Beta(3, 2) on [0, 1]: mean 0.6, variance 0.04.
  auto beta32 = [](std::span<const double> x) {
    if (x[0] <= 0.0 || x[0] >= 1.0) return kNegInf;
    return 2.0 * std::log(x[0]) + std::log1p(-x[0]);
  };
  const auto m = run_chain(beta32, ExplorerConfig{}, 50'000, 16, 0.5);
  EXPECT_NEAR(m.mean, 0.6, 4.0 * 0.2 / std::sqrt(50'000.0));
  EXPECT_NEAR(m.var, 0.04, 0.002);
}

TEST(Explore, CoinflipPosteriorMean) {
  // y = 1 of n = 2: Z = 5/18 and E[p1] = (1/6) / (5/18) = 0.6. Batch means give the SE.
  auto p = coinflip_target(2, 1);
  auto rng = new_rng(21);
  std::vector<double> x = p.target.initial_state();
  constexpr int batches = 100;
  constexpr int per_batch = 1000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int b = 0; b < batches; ++b) {
    double s = 0.0;
    for (int i = 0; i < per_batch; ++i) {
      explore_in_place(x, p.target, rng, ExplorerConfig{});
      s += x[0];
    }
    s /= per_batch;
    sum += s;
    sum_sq += s * s;
  }
  const double mean = sum / batches;
  const double se = std::sqrt((sum_sq / batches - mean * mean) / (batches - 1));
  EXPECT_NEAR(mean, 0.6, 4.0 * se + 1e-3);
}

TEST(Explore, ConfigValidation) {
  ExplorerConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.slice_width = 0.0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = {};
  cfg.passes_per_scan = 0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = {};
  cfg.rwm_step = -1.0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
}
