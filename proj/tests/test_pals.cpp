#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "mtensor/pals.hpp"
#include "mtensor/rtc.hpp"
#include "support/oracles.hpp"

using namespace mtensor;

namespace {

struct Fixture {
  PalsProblem problem;
  ImtdModel model;
  DenseTensor truth;
};

Fixture small_problem(std::uint64_t seed, Shape shape = {8, 8, 3}) {
  Fixture f;
  f.truth = planted_tensor(shape, {2, 2, 2}, seed);
  const Corruption c = corrupt(f.truth, 0.5, 0.1, seed + 1);
  f.problem.observed = c.observed;
  f.problem.mask = c.mask.observed;
  f.problem.coords = index_grid(shape);
  f.problem.regularizer = [](const DenseTensor& a, DenseTensor* g) {
    TvValue tv = tv_l1(a, kDefaultTvEps);
    if (g) *g = std::move(tv.gradient);
    return tv.value;
  };
  ImtdConfig mc;
  mc.ranks = {3, 3, 3};
  mc.domains = index_domains(shape);
  mc.depth = 3;
  mc.hidden = 16;
  std::mt19937_64 rng(seed);
  f.model = ImtdModel::random(mc, rng);
  return f;
}

PalsState initial_state(const Fixture& f, const PalsConfig& cfg) {
  PalsState s{f.model, DenseTensor(f.truth.shape()), eval_grid(f.model, f.problem.coords), {}, Adam(cfg.adam)};
  return s;
}

}  // namespace

TEST(EStep, HandExampleAgainstGridSearch) {
  const double e = e_step_scalar(0.0, 0.0, 1.0, true, 0.5, 1.0);
  EXPECT_NEAR(e, 0.5, 1e-15);
  EXPECT_NEAR(oracle::e_step_grid(0.0, 0.0, 1.0, true, 0.5, 1.0, -3.0, 3.0, 1e-5, 1e-5), 0.5, 1e-4);
}

TEST(EStep, DegenerateWeights) {
  EXPECT_EQ(e_step_scalar(0.3, 0.7, 2.0, false, 0.0, 0.1), 0.7);
  EXPECT_EQ(e_step_scalar(0.3, 0.7, 2.0, true, 1e9, 0.1), 0.0);
  EXPECT_EQ(e_step_scalar(0.3, 0.7, 2.0, false, std::numeric_limits<double>::infinity(), 0.1), 0.0);
  EXPECT_THROW(e_step_scalar(0, 0, 0, true, 0.1, 0.0), std::invalid_argument);
  EXPECT_THROW(e_step_scalar(0, 0, 0, true, -0.1, 1.0), std::invalid_argument);
}

TEST(EStep, MatchesGridSearchOracle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> val(-1.0, 1.0), g(0.0, 1.0), eta(0.05, 2.0);
  std::bernoulli_distribution obs(0.7);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const double a = val(rng), ep = val(rng), m = val(rng), gamma = g(rng), et = eta(rng);
    const bool o = obs(rng);
    worst = std::max(worst, std::abs(e_step_scalar(a, ep, m, o, gamma, et) - oracle::e_step_grid(a, ep, m, o, gamma, et)));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(EStep, TensorFormUsesMask) {
  const DenseTensor a({2}, std::vector<double>{0.0, 0.0});
  const DenseTensor ep({2}, std::vector<double>{0.4, 0.4});
  const DenseTensor m({2}, std::vector<double>{1.0, 1.0});
  const DenseTensor e = e_step(a, ep, m, {1, 0}, 0.0, 1.0);
  EXPECT_NEAR(e[0], (2.0 + 0.4) / 3.0, 1e-15);
  EXPECT_EQ(e[1], 0.4);
  EXPECT_THROW(e_step(a, ep, m, {1}, 0.0, 1.0), std::invalid_argument);
}

TEST(ObjectiveG, PartsAndInfiniteGamma) {
  Fixture f = small_problem(2);
  PalsConfig cfg;
  cfg.gamma = std::numeric_limits<double>::infinity();
  const DenseTensor a = eval_grid(f.model, f.problem.coords);
  const GParts g = objective_g(f.problem, cfg, a, DenseTensor(a.shape()));
  EXPECT_EQ(g.sparsity, 0.0);
  EXPECT_NEAR(g.total, g.fidelity + g.regularizer, 1e-12);
  double fid = 0.0;
  for (Index i = 0; i < a.numel(); ++i)
    if (f.problem.mask[i]) fid += (a[i] - f.problem.observed[i]) * (a[i] - f.problem.observed[i]);
  EXPECT_NEAR(g.fidelity, fid, 1e-12);
}

TEST(ThetaStep, ZeroLearningRateChangesNothing) {
  Fixture f = small_problem(3);
  PalsConfig cfg;
  cfg.inner_steps = 5;
  cfg.adam.lr = 0.0;
  PalsState s = initial_state(f, cfg);
  const ThetaStepResult r = theta_step(s, f.problem, cfg);
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.after, r.before);
  EXPECT_EQ(r.a, s.a_prev);
  for (Index n = 0; n < 3; ++n)
    for (Index i = 0; i < s.model.nets()[n].depth(); ++i) EXPECT_EQ(s.model.nets()[n].weights()[i], f.model.nets()[n].weights()[i]);
}

TEST(ThetaStep, NeverAscendsAndProximalTermLimitsSteps) {
  std::vector<double> steps;
  for (double eta : {1.0, 1e2, 1e4}) {
    Fixture f = small_problem(4);
    PalsConfig cfg;
    cfg.eta = eta;
    cfg.inner_steps = 20;
    cfg.adam.lr = 1e-2;
    PalsState s = initial_state(f, cfg);
    const ThetaStepResult r = theta_step(s, f.problem, cfg);
    EXPECT_LE(r.after, r.before);
    const DenseTensor diff = r.a - s.a_prev;
    // A_theta minimizes the subproblem among inner iterates, hence
    // eta/2 ||A - A_k||^2 <= before - (fidelity + reg at A) <= before.
    EXPECT_LE(0.5 * eta * fro_norm(diff) * fro_norm(diff), r.before + 1e-12);
    steps.push_back(fro_norm(diff));
  }
  EXPECT_GE(steps[0], steps[1]);
  EXPECT_GE(steps[1], steps[2]);
}

TEST(PalsRun, InfiniteGammaReducesToPlainFitting) {
  Fixture f = small_problem(5);
  PalsConfig cfg;
  cfg.gamma = std::numeric_limits<double>::infinity();
  cfg.lambda = 0.0;
  cfg.inner_steps = 10;
  cfg.outer_iters = 10;
  cfg.adam.lr = 5e-3;
  const PalsResult r = pals_run(f.problem, f.model, cfg);
  EXPECT_EQ(l1_norm(r.e), 0.0);
  EXPECT_LT(r.history.back().g, r.history.front().g);
  for (const auto& rec : r.history) EXPECT_EQ(rec.sparsity, 0.0);
}

TEST(PalsRun, LyapunovDescentAndHistory) {
  Fixture f = small_problem(6);
  PalsConfig cfg;
  cfg.gamma = 0.05;
  cfg.inner_steps = 10;
  cfg.outer_iters = 15;
  cfg.tol = 0.0;
  cfg.adam.lr = 5e-3;
  std::vector<Index> seen;
  const PalsResult r = pals_run(f.problem, f.model, cfg, [&](const PalsRecord& rec) { seen.push_back(rec.iteration); });
  ASSERT_EQ(r.history.size(), 16u);
  EXPECT_EQ(seen.size(), 16u);
  const double slack = 1e-8 * std::abs(r.history[0].v);
  for (Index k = 1; k < r.history.size(); ++k) {
    const PalsRecord& rec = r.history[k];
    EXPECT_LE(rec.v, r.history[k - 1].v + slack) << "iteration " << k;
    EXPECT_LE(rec.theta_after, rec.theta_before);
    EXPECT_NEAR(rec.v, rec.g + 0.5 * cfg.eta * (rec.a_step + rec.e_step), 1e-9 * std::abs(rec.v));
    if (rec.a_step + rec.e_step > 0.0) EXPECT_LT(rec.v, r.history[k - 1].v + slack);
  }
  std::stringstream ss;
  write_history_jsonl(ss, r.history);
  std::string line;
  Index lines = 0;
  while (std::getline(ss, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("iteration").get<Index>(), lines);
    EXPECT_TRUE(j.contains("V") && j.contains("G") && j.contains("a_k") && j.contains("e_k"));
    ++lines;
  }
  EXPECT_EQ(lines, r.history.size());
}

TEST(PalsRun, DivergenceCarriesHistory) {
  Fixture f = small_problem(7);
  int calls = 0;
  f.problem.regularizer = [&calls](const DenseTensor& a, DenseTensor* g) {
    if (g) *g = DenseTensor(a.shape());
    return ++calls > 3 ? std::nan("") : 0.0;
  };
  PalsConfig cfg;
  cfg.inner_steps = 1;
  cfg.outer_iters = 10;
  try {
    pals_run(f.problem, f.model, cfg);
    FAIL() << "expected divergence";
  } catch (const PalsDivergence& d) {
    EXPECT_FALSE(d.history().empty());
    EXPECT_NE(std::string(d.what()).find("non-finite"), std::string::npos);
  }
}

TEST(PalsRun, RejectsInvalidConfiguration) {
  Fixture f = small_problem(8);
  PalsConfig cfg;
  cfg.eta = 0.0;
  EXPECT_THROW(pals_run(f.problem, f.model, cfg), std::invalid_argument);
  cfg = PalsConfig{};
  cfg.inner_steps = 0;
  EXPECT_THROW(pals_run(f.problem, f.model, cfg), std::invalid_argument);
  cfg = PalsConfig{};
  f.problem.mask.pop_back();
  EXPECT_THROW(pals_run(f.problem, f.model, cfg), std::invalid_argument);
}
