#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <omp.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <vector>

#include "greenpot/errors.hpp"
#include "greenpot/mlmc.hpp"

using namespace greenpot;

namespace {

// f(n) = 1 + 1/n^2: dyadic, so every difference is exact.
class DeterministicProblem final : public LevelProblem {
 public:
  std::vector<double> evaluate(RngStream& rng, const std::vector<int>& nodes) const override {
    rng.next_u64();
    std::vector<double> f;
    for (int n : nodes) f.push_back(1.0 + 1.0 / (static_cast<double>(n) * n));
    return f;
  }
  double cost_model(int n) const override { return std::pow(n, 3.0); }
};

// f(omega, n) = X + Y / n^2, X ~ U(0,1), Y ~ U(1,3): E f_n = 1/2 + 2/n^2.
class AffineProblem final : public LevelProblem {
 public:
  std::vector<double> evaluate(RngStream& rng, const std::vector<int>& nodes) const override {
    const double x = rng.uniform01();
    const double y = rng.uniform(1.0, 3.0);
    std::vector<double> f;
    for (int n : nodes) f.push_back(x + y / (static_cast<double>(n) * n));
    return f;
  }
  double cost_model(int n) const override { return std::pow(n, 3.0); }
  static double mean(int n) { return 0.5 + 2.0 / (static_cast<double>(n) * n); }
};

class ConstantProblem final : public LevelProblem {
 public:
  std::vector<double> evaluate(RngStream&, const std::vector<int>& nodes) const override {
    return std::vector<double>(nodes.size(), 0.75);
  }
  double cost_model(int n) const override { return n; }
};

// Corrections that keep constant size: f = U log2 n.
class NonDecayingProblem final : public LevelProblem {
 public:
  std::vector<double> evaluate(RngStream& rng, const std::vector<int>& nodes) const override {
    const double u = rng.uniform(0.5, 1.5);
    std::vector<double> f;
    for (int n : nodes) f.push_back(u * std::log2(n));
    return f;
  }
  double cost_model(int n) const override { return n; }
};

class FailingProblem final : public LevelProblem {
 public:
  std::vector<double> evaluate(RngStream&, const std::vector<int>& nodes) const override {
    if (nodes[0] >= 32) throw SolverError("singular");
    return std::vector<double>(nodes.size(), 0.0);
  }
  double cost_model(int n) const override { return n; }
};

double budget(const std::vector<double>& v, const std::vector<long>& m) {
  double s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] / m[i];
  return s;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("level hierarchy is nested and strictly refining") {
  const auto h = LevelHierarchy::make(8, 2, 5);
  for (int l = 0; l < 5; ++l) {
    CHECK(h.nodes(l + 1) == 2 * h.nodes(l));
    CHECK(h.h(l + 1) < h.h(l));
  }
  CHECK(h.h0() == 0.125);
  CHECK(h.nodes(3) == 64);
  CHECK_THROWS_AS(LevelHierarchy::make(8, 1, 3), ConfigError);
  CHECK_THROWS_AS(LevelHierarchy::make(8, 2, -1), ConfigError);
}

TEST_CASE("pairwise sum and unbiased variance") {
  std::vector<double> x(1000);
  std::iota(x.begin(), x.end(), 1.0);
  CHECK(pairwise_sum(x) == 500500.0);
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
  CHECK(sample_variance({1.0, 3.0}) == 2.0);
  CHECK(sample_variance({2.0, 2.0, 2.0}) == 0.0);
  CHECK_THROWS_AS(sample_variance({1.0}), ConfigError);
}

TEST_CASE("coupled sample: level 0 returns f_0, finer levels the difference on one realization") {
  const auto h = LevelHierarchy::make(8, 2, 3);
  const AffineProblem p;
  const RngStream s = RngStream::for_sample(4, 2, 9);
  const LevelCorrection c0 = coupled_sample(0, h, p, s);
  RngStream r = s;
  const double x = r.uniform01(), y = r.uniform(1.0, 3.0);
  CHECK(c0.delta == x + y / 64);
  CHECK(c0.fine == c0.delta);
  const LevelCorrection c2 = coupled_sample(2, h, p, s);
  CHECK(c2.delta == (x + y / (32.0 * 32)) - (x + y / (16.0 * 16)));
  CHECK(c2.seed == 4);
  CHECK(c2.stream_id == s.stream_id());
  CHECK(correction_cost_model(2, h, p) == 32.0 * 32 * 32 + 16.0 * 16 * 16);
  CHECK(correction_cost_model(0, h, p) == 512.0);
}

TEST_CASE("deterministic problem: corrections identical across streams") {
  const auto h = LevelHierarchy::make(8, 2, 3);
  const DeterministicProblem p;
  for (int l = 0; l <= 3; ++l) {
    const double d = coupled_sample(l, h, p, RngStream::for_sample(1, l, 0)).delta;
    for (std::uint64_t m = 1; m < 5; ++m) CHECK(coupled_sample(l, h, p, RngStream::for_sample(9, l, m)).delta == d);
  }
}

TEST_CASE("solver errors carry the level and stream") {
  const auto h = LevelHierarchy::make(8, 2, 3);
  const FailingProblem p;
  try {
    coupled_sample(2, h, p, RngStream::for_sample(5, 2, 3));
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("level 2") != std::string::npos);
    CHECK(msg.find("seed 5") != std::string::npos);
    CHECK(msg.find("singular") != std::string::npos);
  }
  CHECK_THROWS_AS(pilot_run(h, p, 4, 1), SolverError);
}

TEST_CASE("telescoping identity on a fixed curve") {
  const auto h = LevelHierarchy::make(8, 2, 6);
  const DeterministicProblem p;
  double s = 0;
  for (int l = 0; l <= 6; ++l) s += coupled_sample(l, h, p, RngStream(1, 0)).delta;
  CHECK(s == 1.0 + 1.0 / (512.0 * 512.0));
}

TEST_CASE("pilot statistics") {
  const auto h = LevelHierarchy::make(8, 2, 3);
  SUBCASE("constant functional has zero variance") {
    const PilotResult r = pilot_run(h, ConstantProblem{}, 8, 3);
    for (const auto& s : r.levels) CHECK(s.variance == 0.0);
    CHECK(r.levels[0].mean == 0.75);
    CHECK(r.levels[2].mean == 0.0);
  }
  SUBCASE("two synthetic corrections {1, 3}") {
    std::vector<LevelCorrection> c(2);
    c[0].delta = 1.0;
    c[1].delta = 3.0;
    const LevelStats s = summarize_level(1, h, ConstantProblem{}, c);
    CHECK(s.variance == 2.0);
    CHECK(s.mean == 2.0);
    CHECK(s.mean_abs == 2.0);
    CHECK(s.samples == 2);
  }
  SUBCASE("pilot needs two samples") { CHECK_THROWS_AS(pilot_run(h, ConstantProblem{}, 1, 3), ConfigError); }
  SUBCASE("sample m of level l uses stream (seed, l, m)") {
    const PilotResult r = pilot_run(h, AffineProblem{}, 4, 11);
    for (int l = 0; l <= 3; ++l)
      for (int m = 0; m < 4; ++m) {
        CHECK(r.samples[l][m].stream_id == RngStream::for_sample(11, l, m).stream_id());
        CHECK(r.samples[l][m].delta == coupled_sample(l, h, AffineProblem{}, RngStream::for_sample(11, l, m)).delta);
      }
  }
}

TEST_CASE("allocation: hand-evaluated example and limiting cases") {
  CHECK(allocate_samples({1.0, 0.25}, {1.0, 4.0}, 0.1) == std::vector<long>{200, 50});
  // Homogeneity in V.
  CHECK(allocate_samples({4.0, 1.0}, {1.0, 4.0}, 0.1) == std::vector<long>{800, 200});
  CHECK(allocate_samples({9.0, 2.25}, {1.0, 4.0}, 0.1) == std::vector<long>{1800, 450});
  // Single level collapses to plain Monte Carlo.
  CHECK(allocate_samples({0.37123}, {5.0}, 0.01) == std::vector<long>{3713});
  CHECK(allocate_samples({2.0}, {5.0}, 0.1) == std::vector<long>{200});
  CHECK(allocate_samples({0.0, 0.0, 0.0}, {1.0, 2.0, 3.0}, 0.1) == std::vector<long>{1, 1, 1});
  CHECK(allocate_samples({1e-8, 0.0}, {1.0, 8.0}, 0.1) == std::vector<long>{1, 1});
  CHECK_THROWS_AS(allocate_samples({1.0}, {0.0}, 0.1), ConfigError);
  CHECK_THROWS_AS(allocate_samples({-1.0}, {1.0}, 0.1), ConfigError);
  CHECK_THROWS_AS(allocate_samples({1.0}, {1.0}, 0.0), ConfigError);
}

TEST_CASE("allocation meets the variance budget and is a discrete optimum up to one sample") {
  RngStream r(2024, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(r.uniform01() * 6);
    std::vector<double> v(n), c(n);
    for (int l = 0; l < n; ++l) {
      v[l] = std::pow(10.0, r.uniform(-8, 0));
      c[l] = std::pow(10.0, r.uniform(0, 6));
    }
    const double eps = std::pow(10.0, r.uniform(-3, -1));
    const std::vector<long> m = allocate_samples(v, c, eps);
    REQUIRE(budget(v, m) <= eps * eps);
    double cost = 0, cmax = 0;
    for (int l = 0; l < n; ++l) {
      REQUIRE(m[l] >= 1);
      cost += m[l] * c[l];
      cmax = std::max(cmax, c[l]);
    }
    for (int l = 0; l < n; ++l) {
      if (m[l] <= 1) continue;
      std::vector<long> d = m;
      --d[l];
      if (budget(v, d) <= eps * eps) continue;
      // Cheapest single-level compensation that restores the budget.
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < n; ++k) {
        if (k == l) continue;
        const double room = eps * eps - (budget(v, d) - v[k] / d[k]);
        if (room <= 0) continue;
        const long need = std::max(d[k], static_cast<long>(std::ceil(v[k] / room)));
        best = std::min(best, cost - c[l] + (need - m[k]) * c[k]);
      }
      CHECK(best >= cost - cmax);
    }
  }
}

TEST_CASE("level count selection") {
  const double c = 3.0, h0 = 0.125;
  CHECK(choose_levels(h0, 2, 2.0, c * h0 * h0, c) == 0);
  CHECK(choose_levels(h0, 2, 2.0, c * h0 * h0 * 2, c) == 0);
  CHECK(choose_levels(h0, 2, 2.0, c * h0 * h0 / 16, c) == 2);
  for (double e = 1e-2; e > 1e-7; e /= 2) {
    const int l = choose_levels(h0, 2, 2.0, e, c);
    const int l2 = choose_levels(h0, 2, 2.0, e / 2, c);
    CHECK(l2 >= l);
    CHECK(l2 <= l + 1);
    CHECK(c * std::pow(h0 / std::pow(2.0, l), 2) <= e);
    if (l > 0) CHECK(c * std::pow(h0 / std::pow(2.0, l - 1), 2) > e);
  }
  CHECK_THROWS_AS(choose_levels(h0, 2, 0.0, 1e-3, c), ConfigError);
  CHECK_THROWS_AS(choose_levels(h0, 2, 2.0, 0.0, c), ConfigError);
}

TEST_CASE("rate fit recovers exact power laws") {
  std::vector<double> h, a, v, c;
  for (int l = 0; l <= 5; ++l) {
    const double hl = 0.125 / std::pow(2.0, l);
    h.push_back(hl);
    a.push_back(3.0 * hl * hl);
    v.push_back(5.0 * std::pow(hl, 4));
    c.push_back(7.0 * std::pow(hl, -3));
  }
  a[0] = v[0] = 1e300;  // level 0 is excluded
  const RateFit r = fit_rates(h, a, v, c);
  CHECK(r.alpha == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.beta == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(r.rho == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::exp(r.log_alpha_constant) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(std::exp(r.log_beta_constant) == doctest::Approx(5.0).epsilon(1e-10));
  const std::vector<double> h3(h.begin(), h.begin() + 3);
  CHECK_THROWS_AS(fit_rates(h3, h3, h3, h3), ConfigError);
  v[2] = 0.0;
  CHECK_THROWS_AS(fit_rates(h, a, v, c), ConfigError);
}

TEST_CASE("least squares line") {
  const auto [s, i] = least_squares_line({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(s == doctest::Approx(2.0));
  CHECK(i == doctest::Approx(1.0));
}

TEST_CASE("deterministic problem: estimate equals f_L with one sample per level") {
  MlmcConfig cfg;
  cfg.pilot_samples = 4;
  const MlmcResult r = mlmc_estimate(DeterministicProblem{}, 1e-3, cfg);
  CHECK_FALSE(r.rates_fitted);
  for (long m : r.samples) CHECK(m == 1);
  for (const auto& s : r.levels) CHECK(s.variance == 0.0);
  const int n = LevelHierarchy::make(8, 2, r.levels_used).nodes(r.levels_used);
  CHECK(r.estimate == 1.0 + 1.0 / (static_cast<double>(n) * n));
  CHECK(r.bias_estimate <= r.eps_i);
  CHECK(r.sampling_variance == 0.0);
}

TEST_CASE("constant functional needs no refinement") {
  MlmcConfig cfg;
  cfg.pilot_samples = 4;
  const MlmcResult r = mlmc_estimate(ConstantProblem{}, 1e-3, cfg);
  CHECK(r.levels_used == 0);
  CHECK(r.samples == std::vector<long>{1});
  CHECK(r.estimate == 0.75);
}

TEST_CASE("non-decaying corrections are rejected with advice") {
  MlmcConfig cfg;
  cfg.pilot_samples = 8;
  try {
    mlmc_estimate(NonDecayingProblem{}, 1e-2, cfg);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("mesh hierarchy") != std::string::npos);
  }
}

TEST_CASE("MLMC on a synthetic problem: rates, budget and unbiasedness at the chosen level") {
  MlmcConfig cfg;
  cfg.pilot_samples = 16;
  const double eps = 2e-2;
  const int runs = 200;
  std::vector<double> err;
  for (int i = 0; i < runs; ++i) {
    cfg.seed = 100 + i;
    const MlmcResult r = mlmc_estimate(AffineProblem{}, eps, cfg);
    REQUIRE(r.rates_fitted);
    CHECK(std::abs(r.rates.alpha - 2.0) < 0.2);
    CHECK(r.sampling_variance <= r.eps_ii * r.eps_ii);
    CHECK(r.samples.size() == static_cast<std::size_t>(r.levels_used + 1));
    for (std::size_t l = 0; l < r.samples.size(); ++l) CHECK(r.levels[l].samples == r.samples[l]);
    const int n = LevelHierarchy::make(8, 2, r.levels_used).nodes(r.levels_used);
    err.push_back(r.estimate - AffineProblem::mean(n));
  }
  const double mean = pairwise_sum(err) / runs;
  const double sd = std::sqrt(sample_variance(err));
  CHECK(std::abs(mean) <= 3 * sd / std::sqrt(runs));
  // Each run's RMS error stays within eps.
  CHECK(sd <= eps);
}

TEST_CASE("supplied pilot is reused and must match the configuration") {
  MlmcConfig cfg;
  cfg.pilot_samples = 8;
  cfg.seed = 42;
  const auto h = LevelHierarchy::make(cfg.n0, cfg.q, cfg.pilot_levels);
  const PilotResult p = pilot_run(h, AffineProblem{}, cfg.pilot_samples, cfg.seed);
  const MlmcResult a = mlmc_estimate(AffineProblem{}, 1e-2, cfg, &p);
  const MlmcResult b = mlmc_estimate(AffineProblem{}, 1e-2, cfg);
  CHECK(same_bits(a.estimate, b.estimate));
  MlmcConfig other = cfg;
  other.seed = 43;
  CHECK_THROWS_AS(mlmc_estimate(AffineProblem{}, 1e-2, other, &p), ConfigError);
  other = cfg;
  other.pilot_samples = 9;
  CHECK_THROWS_AS(mlmc_estimate(AffineProblem{}, 1e-2, other, &p), ConfigError);
}

TEST_CASE("results are bit-identical across thread counts") {
  MlmcConfig cfg;
  cfg.pilot_samples = 16;
  cfg.seed = 7;
  omp_set_num_threads(1);
  const MlmcResult a = mlmc_estimate(AffineProblem{}, 5e-3, cfg);
  omp_set_num_threads(4);
  const MlmcResult b = mlmc_estimate(AffineProblem{}, 5e-3, cfg);
  omp_set_num_threads(1);
  CHECK(same_bits(a.estimate, b.estimate));
  CHECK(a.samples == b.samples);
  CHECK(same_bits(a.rates.beta, b.rates.beta));
  for (std::size_t l = 0; l < a.levels.size(); ++l) CHECK(same_bits(a.levels[l].variance, b.levels[l].variance));
}

TEST_CASE("config validation") {
  MlmcConfig c;
  CHECK_NOTHROW(c.validate());
  c.pilot_levels = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = MlmcConfig{};
  c.eps_i_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(mlmc_estimate(ConstantProblem{}, 0.0, MlmcConfig{}), ConfigError);
}
