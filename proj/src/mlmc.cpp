#include "greenpot/mlmc.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <string>

#include "greenpot/errors.hpp"

namespace greenpot {

namespace {

std::string tag(int level, const RngStream& rng) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "level %d, seed %llu, stream %llu: ", level,
                static_cast<unsigned long long>(rng.seed()),
                static_cast<unsigned long long>(rng.stream_id()));
  return buf;
}

}  // namespace

LevelHierarchy LevelHierarchy::make(int n0, int q, int max_level) {
  LevelHierarchy h{n0, q, max_level};
  h.validate();
  return h;
}

void LevelHierarchy::validate() const {
  if (n0 < 4) throw ConfigError("level hierarchy: n0 must be >= 4");
  if (q < 2) throw ConfigError("level hierarchy: refinement factor q must be >= 2");
  if (max_level < 0 || max_level > 16) throw ConfigError("level hierarchy: L must lie in [0, 16]");
  double n = n0;
  for (int l = 0; l < max_level; ++l) n *= q;
  if (n > 1 << 16) throw ConfigError("level hierarchy: finest level exceeds 65536 nodes");
}

double LevelHierarchy::h(int level) const { return 1.0 / nodes(level); }

int LevelHierarchy::nodes(int level) const {
  int n = n0;
  for (int l = 0; l < level; ++l) n *= q;
  return n;
}

LevelCorrection coupled_sample(int level, const LevelHierarchy& hierarchy,
                               const LevelProblem& problem, RngStream rng) {
  LevelCorrection out;
  out.level = level;
  out.seed = rng.seed();
  out.stream_id = rng.stream_id();
  std::vector<int> nodes{hierarchy.nodes(level)};
  if (level > 0) nodes.push_back(hierarchy.nodes(level - 1));
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> f;
  const RngStream start = rng;
  try {
    f = problem.evaluate(rng, nodes);
  } catch (const SolverError& e) {
    throw SolverError(tag(level, start) + e.what());
  } catch (const GeometryError& e) {
    throw GeometryError(tag(level, start) + e.what());
  } catch (const KernelError& e) {
    throw KernelError(tag(level, start) + e.what());
  }
  out.cost_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (f.size() != nodes.size()) throw SolverError(tag(level, start) + "problem returned wrong count");
  out.fine = f[0];
  out.delta = level > 0 ? f[0] - f[1] : f[0];
  return out;
}

double correction_cost_model(int level, const LevelHierarchy& hierarchy,
                             const LevelProblem& problem) {
  double c = problem.cost_model(hierarchy.nodes(level));
  if (level > 0) c += problem.cost_model(hierarchy.nodes(level - 1));
  return c;
}

double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t m = n / 2;
  return pairwise_sum(x, m) + pairwise_sum(x + m, n - m);
}

double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

double sample_variance(const std::vector<double>& x) {
  if (x.size() < 2) throw ConfigError("sample variance needs at least 2 values");
  const double mean = pairwise_sum(x) / static_cast<double>(x.size());
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = (x[i] - mean) * (x[i] - mean);
  return pairwise_sum(d) / static_cast<double>(x.size() - 1);
}

LevelStats summarize_level(int level, const LevelHierarchy& hierarchy, const LevelProblem& problem,
                           const std::vector<LevelCorrection>& samples) {
  LevelStats s;
  s.level = level;
  s.h = hierarchy.h(level);
  s.nodes = hierarchy.nodes(level);
  s.samples = static_cast<long>(samples.size());
  s.cost_model = correction_cost_model(level, hierarchy, problem);
  if (samples.empty()) return s;
  std::vector<double> d(samples.size()), a(samples.size()), t(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    d[i] = samples[i].delta;
    a[i] = std::abs(samples[i].delta);
    t[i] = samples[i].cost_seconds;
  }
  const double n = static_cast<double>(samples.size());
  s.mean = pairwise_sum(d) / n;
  s.mean_abs = pairwise_sum(a) / n;
  s.variance = samples.size() >= 2 ? sample_variance(d) : 0.0;
  s.cost_seconds = pairwise_sum(t) / n;
  return s;
}

std::vector<std::vector<LevelCorrection>> run_corrections(const LevelHierarchy& hierarchy,
                                                          const LevelProblem& problem,
                                                          const std::vector<long>& first,
                                                          const std::vector<long>& count,
                                                          std::uint64_t seed) {
  const int levels = static_cast<int>(count.size());
  std::vector<std::vector<LevelCorrection>> out(levels);
  // Tasks ordered finest level first so the expensive ones start early.
  std::vector<std::pair<int, long>> tasks;
  for (int l = levels - 1; l >= 0; --l) {
    out[l].resize(static_cast<std::size_t>(std::max(0L, count[l])));
    for (long m = 0; m < count[l]; ++m) tasks.emplace_back(l, m);
  }
  const long ntask = static_cast<long>(tasks.size());
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(ntask));
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < ntask; ++i) {
    const int l = tasks[i].first;
    const long m = tasks[i].second;
    try {
      out[l][m] = coupled_sample(
          l, hierarchy, problem,
          RngStream::for_sample(seed, l, static_cast<std::uint64_t>(first[l] + m)));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  // Lowest failing task index wins, independent of scheduling.
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

PilotResult pilot_run(const LevelHierarchy& hierarchy, const LevelProblem& problem, int m_pilot,
                      std::uint64_t seed) {
  if (m_pilot < 2) throw ConfigError("pilot_run: at least 2 samples per level are required");
  hierarchy.validate();
  const int levels = hierarchy.max_level + 1;
  PilotResult r;
  r.samples = run_corrections(hierarchy, problem, std::vector<long>(levels, 0),
                              std::vector<long>(levels, m_pilot), seed);
  for (int l = 0; l < levels; ++l)
    r.levels.push_back(summarize_level(l, hierarchy, problem, r.samples[l]));
  return r;
}

std::vector<long> allocate_samples(const std::vector<double>& v, const std::vector<double>& c,
                                   double eps_ii) {
  if (v.size() != c.size() || v.empty())
    throw ConfigError("allocate_samples: V and C must be non-empty and of equal length");
  if (!(eps_ii > 0.0)) throw ConfigError("allocate_samples: eps_II must be positive");
  for (std::size_t l = 0; l < v.size(); ++l) {
    if (!(v[l] >= 0.0)) throw ConfigError("allocate_samples: V_l must be >= 0");
    if (!(c[l] > 0.0)) throw ConfigError("allocate_samples: C_l must be > 0");
  }
  std::vector<long> m(v.size(), 1);
  std::vector<double> root(v.size());
  for (std::size_t l = 0; l < v.size(); ++l) root[l] = std::sqrt(c[l] * v[l]);
  const double total = pairwise_sum(root);
  if (total == 0.0) return m;
  std::vector<double> x(v.size());
  for (std::size_t l = 0; l < v.size(); ++l) {
    x[l] = std::sqrt(v[l] / c[l]) * total / (eps_ii * eps_ii);
    if (x[l] > 1e15) throw ConfigError("allocate_samples: sample count overflow");
  }
  // Counts a rounding error above an exact integer are snapped down, unless
  // that breaks the variance budget sum V_l/M_l <= eps_II^2.
  for (int snap = 1; snap >= 0; --snap) {
    std::vector<double> ratio(v.size());
    for (std::size_t l = 0; l < v.size(); ++l) {
      const double r = std::nearbyint(x[l]);
      const bool near = snap && std::abs(x[l] - r) <= 1e-12 * std::max(1.0, r);
      m[l] = std::max(1L, static_cast<long>(near ? r : std::ceil(x[l])));
      ratio[l] = v[l] / static_cast<double>(m[l]);
    }
    if (pairwise_sum(ratio) <= eps_ii * eps_ii) break;
  }
  return m;
}

int choose_levels(double h0, int q, double alpha, double eps_i, double bias_constant) {
  if (!(alpha > 0.0)) throw ConfigError("choose_levels: alpha must be positive");
  if (!(eps_i > 0.0)) throw ConfigError("choose_levels: eps_I must be positive");
  if (q < 2) throw ConfigError("choose_levels: q must be >= 2");
  int l = 0;
  double h = h0;
  while (bias_constant * std::pow(h, alpha) > eps_i) {
    ++l;
    h /= q;
    if (l > 60) throw ConfigError("choose_levels: no level count reaches eps_I");
  }
  return l;
}

std::pair<double, double> least_squares_line(const std::vector<double>& x,
                                             const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ConfigError("least squares fit needs 2 or more points");
  const double mx = pairwise_sum(x) / n, my = pairwise_sum(y) / n;
  std::vector<double> sxy(n), sxx(n);
  for (std::size_t i = 0; i < n; ++i) {
    sxy[i] = (x[i] - mx) * (y[i] - my);
    sxx[i] = (x[i] - mx) * (x[i] - mx);
  }
  const double slope = pairwise_sum(sxy) / pairwise_sum(sxx);
  return {slope, my - slope * mx};
}

RateFit fit_rates(const std::vector<double>& h, const std::vector<double>& mean_abs,
                  const std::vector<double>& v, const std::vector<double>& c) {
  const std::size_t n = h.size();
  if (mean_abs.size() != n || v.size() != n || c.size() != n)
    throw ConfigError("fit_rates: inputs must have equal length");
  if (n < 4) throw ConfigError("fit_rates: at least 3 levels beyond level 0 are required");
  std::vector<double> lh, la, lv, lc;
  for (std::size_t l = 1; l < n; ++l) {
    if (!(h[l] > 0.0 && mean_abs[l] > 0.0 && v[l] > 0.0 && c[l] > 0.0))
      throw ConfigError("fit_rates: level " + std::to_string(l) +
                        " has a non-positive statistic; rates are undefined");
    lh.push_back(std::log(h[l]));
    la.push_back(std::log(mean_abs[l]));
    lv.push_back(std::log(v[l]));
    lc.push_back(std::log(c[l]));
  }
  RateFit r;
  const auto a = least_squares_line(lh, la);
  const auto b = least_squares_line(lh, lv);
  const auto g = least_squares_line(lh, lc);
  r.alpha = a.first;
  r.log_alpha_constant = a.second;
  r.beta = b.first;
  r.log_beta_constant = b.second;
  r.rho = -g.first;
  return r;
}

void MlmcConfig::validate() const {
  LevelHierarchy::make(n0, q, std::max(pilot_levels, 0));
  if (pilot_levels < 3) throw ConfigError("mlmc: pilot_levels must be >= 3 to fit rates");
  if (pilot_samples < 2) throw ConfigError("mlmc: pilot_samples must be >= 2");
  if (max_levels < pilot_levels || max_levels > 16)
    throw ConfigError("mlmc: max_levels must lie in [pilot_levels, 16]");
  if (!(eps_i_fraction > 0.0 && eps_i_fraction < 1.0))
    throw ConfigError("mlmc: eps_i_fraction must lie in (0, 1)");
  if (!(alpha_assumed > 0.0)) throw ConfigError("mlmc: alpha_assumed must be positive");
}

MlmcResult mlmc_estimate(const LevelProblem& problem, double eps, const MlmcConfig& config,
                         const PilotResult* given_pilot) {
  if (!(eps > 0.0)) throw ConfigError("mlmc: eps must be positive");
  config.validate();
  MlmcResult r;
  r.eps = eps;
  r.eps_i = config.eps_i_fraction * eps;
  r.eps_ii = eps - r.eps_i;

  const auto ph = LevelHierarchy::make(config.n0, config.q, config.pilot_levels);
  PilotResult local;
  if (given_pilot) {
    bool ok = static_cast<int>(given_pilot->samples.size()) == config.pilot_levels + 1;
    for (const auto& level : given_pilot->samples)
      ok = ok && static_cast<int>(level.size()) == config.pilot_samples &&
           level.front().seed == config.seed;
    if (!ok) throw ConfigError("mlmc: supplied pilot does not match the configuration");
  } else {
    local = pilot_run(ph, problem, config.pilot_samples, config.seed);
  }
  const PilotResult& pilot = given_pilot ? *given_pilot : local;
  r.pilot = pilot.levels;

  std::vector<double> h, ma, v, c;
  bool has_bias = false, has_var = false;
  for (const auto& s : pilot.levels) {
    h.push_back(s.h);
    ma.push_back(s.mean_abs);
    v.push_back(s.variance);
    c.push_back(s.cost_model);
    if (s.level > 0 && s.mean_abs > 0.0) has_bias = true;
    if (s.variance > 0.0) has_var = true;
  }

  double alpha = config.alpha_assumed, beta = 2.0 * alpha;
  if (has_bias && has_var) {
    r.rates = fit_rates(h, ma, v, c);
    r.rates_fitted = true;
    alpha = r.rates.alpha;
    beta = r.rates.beta;
    if (!(beta > 0.0))
      throw SolverError(
          "mlmc: pilot variances of the level corrections do not decay (fitted beta <= 0); "
          "inspect the mesh hierarchy and the functional discretization");
    if (!(alpha > 0.0))
      throw SolverError(
          "mlmc: pilot corrections do not decay (fitted alpha <= 0); inspect the mesh "
          "hierarchy and the functional discretization");
    if (std::min(beta, r.rates.rho) > 2.0 * alpha)
      r.warnings.push_back("min(beta, rho) > 2 alpha: complexity theorem hypothesis violated");
  }

  if (!has_bias) {
    r.levels_used = 0;
  } else {
    // Intercept of the E|Delta_l| regression.
    r.bias_constant = r.rates_fitted ? std::exp(r.rates.log_alpha_constant)
                                     : ma[1] / std::pow(h[1], alpha);
    r.levels_used = choose_levels(ph.h0(), config.q, alpha, r.eps_i, r.bias_constant);
    if (r.levels_used > config.max_levels) {
      r.warnings.push_back("level count capped at max_levels; bias may exceed eps_I");
      r.levels_used = config.max_levels;
    }
  }
  const int big_l = r.levels_used;
  const auto hier = LevelHierarchy::make(config.n0, config.q, big_l);
  r.bias_estimate = r.bias_constant * std::pow(hier.h(big_l), alpha);

  const double floor_v = std::numeric_limits<double>::epsilon();
  for (int l = 0; l <= big_l; ++l) {
    double vl;
    if (l <= config.pilot_levels) {
      vl = v[l];
    } else if (r.rates_fitted) {
      vl = v[config.pilot_levels] *
           std::pow(static_cast<double>(config.q), -beta * (l - config.pilot_levels));
    } else {
      vl = 0.0;
    }
    if (has_var && vl <= 0.0) vl = floor_v;
    r.allocation_variance.push_back(vl);
    r.allocation_cost.push_back(correction_cost_model(l, hier, problem));
  }
  r.samples = allocate_samples(r.allocation_variance, r.allocation_cost, r.eps_ii);

  // Samples m < pilot_samples at pilot levels are reused.
  std::vector<long> first(big_l + 1, 0), extra(big_l + 1, 0);
  for (int l = 0; l <= big_l; ++l) {
    const long have = l <= config.pilot_levels ? config.pilot_samples : 0;
    first[l] = std::min(have, r.samples[l]);
    extra[l] = r.samples[l] - first[l];
  }
  auto fresh = run_corrections(hier, problem, first, extra, config.seed);

  std::vector<double> means;
  for (int l = 0; l <= big_l; ++l) {
    std::vector<LevelCorrection> all;
    if (l <= config.pilot_levels)
      all.assign(pilot.samples[l].begin(), pilot.samples[l].begin() + first[l]);
    all.insert(all.end(), fresh[l].begin(), fresh[l].end());
    LevelStats s = summarize_level(l, hier, problem, all);
    means.push_back(s.mean);
    r.sampling_variance += r.allocation_variance[l] / static_cast<double>(r.samples[l]);
    r.total_cost_model += static_cast<double>(r.samples[l]) * s.cost_model;
    r.total_cost_seconds += static_cast<double>(s.samples) * s.cost_seconds;
    r.levels.push_back(s);
  }
  r.estimate = pairwise_sum(means);
  for (const auto& s : pilot.levels) {
    r.pilot_cost_model += static_cast<double>(s.samples) * s.cost_model;
    r.pilot_cost_seconds += static_cast<double>(s.samples) * s.cost_seconds;
  }
  r.mse_bound = r.sampling_variance + r.bias_estimate * r.bias_estimate;
  if (r.sampling_variance > r.eps_ii * r.eps_ii * (1.0 + 1e-12))
    r.warnings.push_back("allocated variance budget exceeds eps_II^2");
  return r;
}

}  // namespace greenpot
