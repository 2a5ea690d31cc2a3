#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "greenpot/rng.hpp"

namespace greenpot {

/// Geometric mesh hierarchy h_l = h0 q^{-l} with N_{2,l} = n0 q^l aperture nodes.
struct LevelHierarchy {
  int n0 = 8;
  int q = 2;
  int max_level = 4;

  static LevelHierarchy make(int n0, int q, int max_level);
  void validate() const;
  double h0() const { return 1.0 / n0; }
  double h(int level) const;
  int nodes(int level) const;
};

/// Quantity of interest f_l(omega) at several resolutions of one realization.
///
/// evaluate() draws omega from rng exactly once and returns f at every entry
/// of `nodes`; implementations must be safe to call concurrently.
class LevelProblem {
 public:
  virtual ~LevelProblem() = default;
  virtual std::vector<double> evaluate(RngStream& rng, const std::vector<int>& nodes) const = 0;
  /// Deterministic operation-count model of one solve at `nodes` aperture nodes.
  virtual double cost_model(int nodes) const = 0;
};

struct LevelCorrection {
  int level = 0;
  double delta = 0.0;  // f_l - f_{l-1}, f_{-1} = 0
  double fine = 0.0;   // f_l
  double cost_seconds = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

/// One coupled correction at `level` from the realization drawn by rng.
/// Solver and geometry errors are rethrown with the level and stream attached.
LevelCorrection coupled_sample(int level, const LevelHierarchy& hierarchy,
                               const LevelProblem& problem, RngStream rng);

/// Model cost of one correction: C(N_l) + C(N_{l-1}).
double correction_cost_model(int level, const LevelHierarchy& hierarchy,
                             const LevelProblem& problem);

double pairwise_sum(const double* x, std::size_t n);
double pairwise_sum(const std::vector<double>& x);
/// Unbiased sample variance; requires at least 2 values.
double sample_variance(const std::vector<double>& x);

struct LevelStats {
  int level = 0;
  double h = 0.0;
  int nodes = 0;
  long samples = 0;
  double mean = 0.0;
  double mean_abs = 0.0;
  double variance = 0.0;
  double cost_model = 0.0;
  double cost_seconds = 0.0;  // mean wall-clock per correction
};

LevelStats summarize_level(int level, const LevelHierarchy& hierarchy, const LevelProblem& problem,
                           const std::vector<LevelCorrection>& samples);

/// Runs `count` corrections per level, sample m of level l on stream (seed, l, m).
/// Work is shared over OpenMP threads; results are stored by index.
std::vector<std::vector<LevelCorrection>> run_corrections(const LevelHierarchy& hierarchy,
                                                          const LevelProblem& problem,
                                                          const std::vector<long>& first,
                                                          const std::vector<long>& count,
                                                          std::uint64_t seed);

struct PilotResult {
  std::vector<LevelStats> levels;
  std::vector<std::vector<LevelCorrection>> samples;
};

/// m_pilot coupled samples at each level 0..max_level. Throws ConfigError when m_pilot < 2.
PilotResult pilot_run(const LevelHierarchy& hierarchy, const LevelProblem& problem, int m_pilot,
                      std::uint64_t seed);

/// M_l = ceil(eps_II^-2 sqrt(V_l/C_l) sum_k sqrt(C_k V_k)), at least 1.
std::vector<long> allocate_samples(const std::vector<double>& v, const std::vector<double>& c,
                                   double eps_ii);

/// Smallest L >= 0 with bias_constant h_L^alpha <= eps_I, h_L = h0 q^-L.
int choose_levels(double h0, int q, double alpha, double eps_i, double bias_constant);

struct RateFit {
  double alpha = 0.0;
  double beta = 0.0;
  double rho = 0.0;
  double log_alpha_constant = 0.0;  // E|Delta_l| ~ exp(.) h_l^alpha
  double log_beta_constant = 0.0;   // V_l ~ exp(.) h_l^beta
};

/// Least-squares slopes over levels >= 1: log E|Delta_l| and log V_l against
/// log h_l, log C_l against log h_l^-1. Throws ConfigError with fewer than 3
/// such levels or when a fitted quantity is not positive.
RateFit fit_rates(const std::vector<double>& h, const std::vector<double>& mean_abs,
                  const std::vector<double>& v, const std::vector<double>& c);

/// Slope and intercept of the least-squares line through (x_i, y_i).
std::pair<double, double> least_squares_line(const std::vector<double>& x,
                                             const std::vector<double>& y);

struct MlmcConfig {
  int n0 = 8;
  int q = 2;
  int pilot_levels = 4;
  int pilot_samples = 32;
  int max_levels = 10;
  double eps_i_fraction = 0.5;  // eps_I = fraction * eps
  double alpha_assumed = 2.0;   // used when alpha cannot be fitted
  std::uint64_t seed = 1;

  void validate() const;
};

struct MlmcResult {
  double estimate = 0.0;
  double eps = 0.0, eps_i = 0.0, eps_ii = 0.0;
  int levels_used = 0;  // L
  bool rates_fitted = false;
  RateFit rates;
  double bias_constant = 0.0;
  std::vector<LevelStats> pilot;
  std::vector<double> allocation_variance;  // V_l used by the allocation
  std::vector<double> allocation_cost;      // C_l used by the allocation (model)
  std::vector<long> samples;                // M_l
  std::vector<LevelStats> levels;           // final statistics over M_l samples
  double sampling_variance = 0.0;           // sum V_l / M_l
  double bias_estimate = 0.0;
  double mse_bound = 0.0;
  double total_cost_model = 0.0;    // sum M_l C_l over the estimator's samples
  double total_cost_seconds = 0.0;  // wall-clock of the estimator's samples
  double pilot_cost_model = 0.0;    // whole pilot, including levels beyond L
  double pilot_cost_seconds = 0.0;
  std::vector<std::string> warnings;
};

/// Pilot, rate fit, level choice, allocation, and the telescoping estimate of E[f_L].
///
/// Pilot samples are the first samples of each level's estimator. All
/// decisions use the model cost, so the result is independent of timing and
/// thread count (except the *_seconds fields).
/// `pilot`, when given, must come from pilot_run with the config's hierarchy,
/// pilot size and seed; it is then reused instead of recomputed.
MlmcResult mlmc_estimate(const LevelProblem& problem, double eps, const MlmcConfig& config,
                         const PilotResult* pilot = nullptr);

}  // namespace greenpot
