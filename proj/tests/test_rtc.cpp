#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "mtensor/image_io.hpp"
#include "mtensor/rtc.hpp"
#include "support/oracles.hpp"

using namespace mtensor;

TEST(Corrupt, FullSamplingWithoutNoiseIsIdentity) {
  std::mt19937_64 rng(1);
  const DenseTensor x = oracle::random_tensor({5, 4, 3}, rng, 0.0, 1.0);
  const Corruption c = corrupt(x, 1.0, 0.0, 7);
  EXPECT_EQ(c.observed, x);
  EXPECT_EQ(c.mask.observed_count(), x.numel());
  EXPECT_EQ(c.noisy_count, 0u);
}

TEST(Corrupt, SamplingRateCount) {
  const DenseTensor x({100000}, 0.5);
  const Corruption c = corrupt(x, 0.2, 0.0, 3);
  EXPECT_EQ(c.mask.observed_count(), 20000u);
  EXPECT_NEAR(c.mask.fraction(), 0.2, 1e-12);
  for (Index i = 0; i < x.numel(); ++i) EXPECT_EQ(c.observed[i], c.mask.observed[i] ? 0.5 : 0.0);
}

TEST(Corrupt, FullNoiseGivesOnlyExtremes) {
  const DenseTensor x({40, 40}, 0.37);
  const Corruption c = corrupt(x, 0.5, 1.0, 4, 2.0);
  EXPECT_EQ(c.noisy_count, c.mask.observed_count());
  std::set<double> seen;
  Index high = 0;
  for (Index i = 0; i < x.numel(); ++i) {
    if (!c.mask.observed[i]) continue;
    seen.insert(c.observed[i]);
    high += c.observed[i] == 2.0;
  }
  EXPECT_EQ(seen, (std::set<double>{0.0, 2.0}));
  EXPECT_NEAR(static_cast<double>(high) / c.noisy_count, 0.5, 0.1);
}

TEST(Corrupt, DeterministicInSeed) {
  std::mt19937_64 rng(2);
  const DenseTensor x = oracle::random_tensor({6, 6, 3}, rng, 0.0, 1.0);
  const Corruption a = corrupt(x, 0.4, 0.2, 11), b = corrupt(x, 0.4, 0.2, 11), c = corrupt(x, 0.4, 0.2, 12);
  EXPECT_EQ(a.observed, b.observed);
  EXPECT_EQ(a.mask.observed, b.mask.observed);
  EXPECT_NE(a.mask.observed, c.mask.observed);
}

TEST(Corrupt, RejectsBadArguments) {
  const DenseTensor x({4}, 0.0);
  EXPECT_THROW(corrupt(x, 0.0, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(corrupt(x, 1.5, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(corrupt(x, 0.5, -0.1, 1), std::invalid_argument);
  EXPECT_THROW(corrupt(x, 0.5, 1.1, 1), std::invalid_argument);
  EXPECT_THROW(corrupt(x, 0.5, 0.1, 1, 0.0), std::invalid_argument);
}

TEST(TvL1, ConstantTensorHasZeroTv) {
  const TvValue tv = tv_l1(DenseTensor({3, 4, 2}, 0.8), 1e-4);
  EXPECT_EQ(tv.value, 0.0);
  EXPECT_EQ(fro_norm(tv.gradient), 0.0);
}

TEST(TvL1, SingleJumpCountsOnce) {
  const TvValue tv = tv_l1(DenseTensor({2}, std::vector<double>{0.0, 1.0}), 1e-8);
  EXPECT_NEAR(tv.value, 1.0, 1e-7);
  EXPECT_NEAR(tv.gradient[0], -1.0, 1e-7);
  EXPECT_NEAR(tv.gradient[1], 1.0, 1e-7);
  EXPECT_THROW(tv_l1(DenseTensor({2}), 0.0), std::invalid_argument);
}

TEST(TvL1, MatchesNaiveSumAndFiniteDifferences) {
  std::mt19937_64 rng(5);
  DenseTensor x = oracle::random_tensor({4, 4, 3}, rng);
  const double eps = 1e-2;
  double naive = 0.0;
  std::vector<Index> idx(3, 0);
  do {
    for (Index n = 0; n < 3; ++n) {
      if (idx[n] + 1 >= x.extent(n)) continue;
      auto nb = idx;
      ++nb[n];
      const double d = x(nb) - x(idx);
      naive += std::sqrt(d * d + eps * eps) - eps;
    }
  } while (oracle::next_index(idx, x.shape()));
  const TvValue tv = tv_l1(x, eps);
  EXPECT_NEAR(tv.value, naive, 1e-12);
  for (Index i = 0; i < x.numel(); ++i) {
    const double fd = oracle::central_difference([&] { return tv_l1(x, eps).value; }, x[i], 1e-6);
    EXPECT_NEAR(tv.gradient[i], fd, 1e-5) << i;
  }
}

TEST(TvL1, ReversingAModeLeavesValueUnchanged) {
  std::mt19937_64 rng(6);
  const DenseTensor x = oracle::random_tensor({5, 3, 2}, rng);
  DenseTensor r(x.shape());
  std::vector<Index> idx(3, 0);
  do {
    auto flipped = idx;
    flipped[0] = 4 - idx[0];
    r(flipped) = x(idx);
  } while (oracle::next_index(idx, x.shape()));
  EXPECT_NEAR(tv_l1(x, 1e-4).value, tv_l1(r, 1e-4).value, 1e-12);
}

TEST(PlantedTensor, InUnitRangeAndDeterministic) {
  const DenseTensor x = planted_tensor({10, 9, 3}, {3, 3, 2}, 4);
  EXPECT_EQ(*std::min_element(x.data().begin(), x.data().end()), 0.0);
  EXPECT_EQ(*std::max_element(x.data().begin(), x.data().end()), 1.0);
  EXPECT_EQ(x, planted_tensor({10, 9, 3}, {3, 3, 2}, 4));
  EXPECT_NE(x, planted_tensor({10, 9, 3}, {3, 3, 2}, 5));
}

TEST(Defaults, RanksAndGamma) {
  EXPECT_EQ(default_ranks({32, 32, 3}), (Shape{5, 5, 5}));
  const DenseTensor m({4, 4, 4}, 0.5);
  ObservationMask mask;
  EXPECT_NEAR(default_gamma(m, mask), kDefaultGammaScale * 0.5, 1e-15);
}

TEST(RtcRecover, OverfitsCleanFullyObservedData) {
  const DenseTensor truth = planted_tensor({8, 8, 3}, {2, 2, 2}, 9);
  const Corruption c = corrupt(truth, 1.0, 0.0, 1);
  RtcProblem p{c.observed, c.mask};
  p.config.lambda = 0.0;
  p.config.gamma = std::numeric_limits<double>::infinity();
  p.config.inner_steps = 100;
  p.config.outer_iters = 20;
  p.config.tol = 0.0;
  p.config.adam.lr = 2e-3;
  p.net.hidden = 32;
  p.ranks = {4, 4, 4};
  const RtcResult r = rtc_recover(p);
  EXPECT_GE(psnr(r.recovered, truth, 1.0), 40.0);
  for (double v : r.recovered.data()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
}

TEST(RtcRecover, SparseTermHelpsUnderImpulseNoise) {
  const DenseTensor truth = planted_tensor({12, 12, 3}, {2, 2, 2}, 3);
  const Corruption c = corrupt(truth, 0.6, 0.2, 2);
  auto run = [&](double gamma) {
    RtcProblem p{c.observed, c.mask};
    p.config.gamma = gamma;
    p.config.inner_steps = 20;
    p.config.outer_iters = 40;
    p.net.hidden = 32;
    return psnr(rtc_recover(p).recovered, truth, 1.0);
  };
  EXPECT_GT(run(default_gamma(c.observed, c.mask)), run(std::numeric_limits<double>::infinity()));
}

TEST(RtcRecover, RejectsBadProblems) {
  const DenseTensor x({4, 4, 3}, 0.5);
  Corruption c = corrupt(x, 0.5, 0.0, 1);
  RtcProblem p{c.observed, c.mask};
  p.ranks = {2, 2};
  EXPECT_THROW(rtc_recover(p), std::invalid_argument);
  p.ranks.clear();
  p.mask.observed.pop_back();
  EXPECT_THROW(rtc_recover(p), std::invalid_argument);
  const Corruption flat = corrupt(DenseTensor({4, 4}, 0.5), 0.5, 0.0, 1);
  EXPECT_THROW(rtc_recover(RtcProblem{flat.observed, flat.mask}), std::invalid_argument);
}

TEST(ImageIo, RoundTripQuantizesToBytes) {
  std::mt19937_64 rng(7);
  const DenseTensor x = oracle::random_tensor({5, 7, 3}, rng, 0.0, 1.0);
  std::stringstream ss;
  write_image(ss, x);
  const DenseTensor y = read_image(ss);
  ASSERT_EQ(y.shape(), x.shape());
  for (Index i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(y[i], std::round(x[i] * 255.0) / 255.0);
}

TEST(ImageIo, HandWrittenGrayPixel) {
  std::stringstream ss("P2\n# one pixel\n1 1\n255\n128\n");
  const DenseTensor y = read_image(ss);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1}));
  EXPECT_DOUBLE_EQ(y[0], 128.0 / 255.0);
}

TEST(ImageIo, RowMajorPixelsLandInColumnMajorTensor) {
  // Two rows, three columns: pixel (row 0, col 1) is the second value in the file.
  std::stringstream ss("P2 3 2 10\n0 1 2\n3 4 5\n");
  const DenseTensor y = read_image(ss);
  EXPECT_EQ(y.shape(), (Shape{2, 3, 1}));
  EXPECT_DOUBLE_EQ(y.at({0, 1, 0}), 0.1);
  EXPECT_DOUBLE_EQ(y.at({1, 0, 0}), 0.3);
}

TEST(ImageIo, AsciiAndBinaryAgree) {
  std::mt19937_64 rng(8);
  const DenseTensor x = oracle::random_tensor({4, 3, 3}, rng, 0.0, 1.0);
  std::stringstream a, b;
  write_image(a, x, true);
  write_image(b, x, false);
  EXPECT_EQ(read_image(a), read_image(b));
}

TEST(ImageIo, MalformedHeaders) {
  for (const char* bad : {"P7 1 1 255\n", "P2 0 1 255\n", "P2 1 1 0\n", "P2 1 1 255\n", "P5 2 2 255\nab", "XX"}) {
    std::stringstream ss(bad);
    EXPECT_THROW(read_image(ss), std::runtime_error) << bad;
  }
}
