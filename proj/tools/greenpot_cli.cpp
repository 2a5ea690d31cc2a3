#include <omp.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "config.hpp"
#include "greenpot/errors.hpp"
#include "greenpot/experiments.hpp"

using namespace greenpot;
using namespace greenpot::cli;
using nlohmann::json;

namespace {

std::string out_path(const ExperimentConfig& c, const std::string& name) {
  return (std::filesystem::path(c.output_dir) / name).string();
}

json envelope(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = c.experiment;
  j["config"] = to_json(c);
  return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json level_json(const LevelStats& s) {
  // Wall-clock is left out so that the JSON is reproducible.
  return {{"level", s.level},         {"h", s.h},
          {"N2", s.nodes},            {"samples", s.samples},
          {"mean", s.mean},           {"mean_abs", s.mean_abs},
          {"variance", s.variance},   {"cost_model", s.cost_model}};
}

json rates_json(const RateFit& r) {
  return {{"alpha", r.alpha}, {"beta", r.beta}, {"rho", r.rho}};
}

json mlmc_json(const MlmcResult& r) {
  json j;
  j["eps"] = r.eps;
  j["eps_I"] = r.eps_i;
  j["eps_II"] = r.eps_ii;
  j["estimate"] = r.estimate;
  j["L"] = r.levels_used;
  j["rates_fitted"] = r.rates_fitted;
  j["rates"] = rates_json(r.rates);
  j["bias_constant"] = r.bias_constant;
  j["bias_estimate"] = r.bias_estimate;
  j["sampling_variance"] = r.sampling_variance;
  j["mse_bound"] = r.mse_bound;
  j["samples"] = r.samples;
  j["allocation_variance"] = r.allocation_variance;
  j["allocation_cost"] = r.allocation_cost;
  j["total_cost_model"] = r.total_cost_model;
  j["pilot_cost_model"] = r.pilot_cost_model;
  j["levels"] = json::array();
  for (const auto& s : r.levels) j["levels"].push_back(level_json(s));
  j["pilot"] = json::array();
  for (const auto& s : r.pilot) j["pilot"].push_back(level_json(s));
  j["warnings"] = r.warnings;
  return j;
}

Example2Setup random_setup(const ExperimentConfig& c, const std::string& kernel) {
  Example2Setup s = c.random;
  s.kernel = parse_kernel_choice(kernel);
  return s;
}

int run_example1_cmd(const ExperimentConfig& c) {
  Example1Setup s = c.example1;
  s.kernel = parse_kernel_choice(c.kernel);
  const auto rows = run_example1(s);
  const std::string k = to_string(s.kernel);
  write_atomic(out_path(c, "example1_" + k + ".csv"), example1_csv(rows));
  json j = envelope(c);
  j["results"]["rows"] = json::array();
  for (const auto& r : rows)
    j["results"]["rows"].push_back({{"N1", r.n1},
                                    {"N2", r.n2},
                                    {"mu_error", r.mu_error},
                                    {"mu_rate", r.mu_rate},
                                    {"u_error", r.u_error},
                                    {"u_rate", r.u_rate},
                                    {"h1_error", r.h1_error},
                                    {"h1_rate", r.h1_rate}});
  if (c.example1_costs) write_atomic(out_path(c, "cost_" + k + ".csv"), cost_csv(cost_breakdown(s)));
  write_atomic(out_path(c, "example1_" + k + ".json"), dump(j));
  const auto& last = rows.back();
  std::printf("example1 %s: %zu rows, N2=%d rates mu %.3f u %.3f H1 %.3f\n", k.c_str(), rows.size(),
              last.n2, last.mu_rate, last.u_rate, last.h1_rate);
  return 0;
}

int run_example2_cmd(const ExperimentConfig& c) {
  std::vector<std::string> kernels;
  if (c.kernel == "all") kernels = {"analytical", "numerical", "schur"};
  else kernels = {c.kernel};
  json j = envelope(c);
  j["results"] = json::object();
  for (const auto& kname : kernels) {
    const Example2Setup s = random_setup(c, kname);
    const Example2Report rep = run_example2(s, c.eps, c.mlmc);
    const std::string k = to_string(s.kernel);
    write_atomic(out_path(c, "example2_" + k + "_levels.csv"), level_stats_csv(rep.pilot.levels));
    write_atomic(out_path(c, "example2_" + k + "_eps_cost.csv"), eps_cost_csv(rep));
    json r;
    r["rates"] = rates_json(rep.rates);
    r["pilot"] = json::array();
    for (const auto& l : rep.pilot.levels) r["pilot"].push_back(level_json(l));
    r["runs"] = json::array();
    for (const auto& run : rep.runs) r["runs"].push_back(mlmc_json(run));
    r["cost_slope_model"] = rep.cost_slope_model;
    j["results"][k] = r;
    std::printf("example2 %s: alpha %.3f beta %.3f rho %.3f; eps-cost slope %.3f (wall-clock) %.3f (model)\n",
                k.c_str(), rep.rates.alpha, rep.rates.beta, rep.rates.rho, rep.cost_slope_seconds,
                rep.cost_slope_model);
  }
  write_atomic(out_path(c, "example2.json"), dump(j));
  return 0;
}

int run_mlmc_cmd(const ExperimentConfig& c) {
  const Example2Setup s = random_setup(c, c.kernel);
  const Example2Problem problem(s);
  const std::string k = to_string(s.kernel);
  json j = envelope(c);
  j["results"]["runs"] = json::array();
  const auto hier = LevelHierarchy::make(c.mlmc.n0, c.mlmc.q, c.mlmc.pilot_levels);
  const PilotResult pilot = pilot_run(hier, problem, c.mlmc.pilot_samples, c.mlmc.seed);
  std::string csv;
  for (double eps : c.eps) {
    const MlmcResult r = mlmc_estimate(problem, eps, c.mlmc, &pilot);
    j["results"]["runs"].push_back(mlmc_json(r));
    if (csv.empty()) csv = level_stats_csv(r.levels, &r.samples);
    std::printf("mlmc %s eps %.3g: estimate %.17g, L=%d, cost %.6g (model) %.3f s\n", k.c_str(),
                eps, r.estimate, r.levels_used, r.total_cost_model, r.total_cost_seconds);
  }
  write_atomic(out_path(c, "mlmc_" + k + "_levels.csv"), csv);
  write_atomic(out_path(c, "mlmc_" + k + ".json"), dump(j));
  return 0;
}

int run_greens_cmd(const ExperimentConfig& c) {
  const GreensGrid g = greens_grid(c.geometry, c.source, c.grid);
  write_atomic(out_path(c, "greens_" + c.geometry + ".csv"), greens_csv(g));
  double edge = 0.0;
  const int n = c.grid;
  if (c.geometry == "square") {
    for (int i = 0; i < n; ++i)
      for (double v : {g.values(0, i), g.values(n - 1, i), g.values(i, 0), g.values(i, n - 1)})
        edge = std::max(edge, std::abs(v));
  } else if (c.geometry == "halfplane") {
    for (int i = 0; i < n; ++i) edge = std::max(edge, std::abs(g.values(0, i)));
  }
  json j = envelope(c);
  j["results"] = {{"file", "greens_" + c.geometry + ".csv"},
                  {"max_abs_on_boundary_nodes", edge},
                  {"min", g.values.minCoeff()}};
  write_atomic(out_path(c, "greens_" + c.geometry + ".json"), dump(j));
  std::printf("greens %s: %dx%d grid, max |G| on boundary nodes %.3g\n", c.geometry.c_str(), n, n,
              edge);
  return 0;
}

int run_selftest() {
  int pass = 0, total = 0;
  auto check = [&](const char* name, bool ok) {
    ++total;
    pass += ok;
    std::printf("%s %s\n", ok ? "PASS" : "FAIL", name);
  };
  const double a = 0.7;
  const Point2 y{0.2, -0.1};
  check("disk Green at center", std::abs(disk_green(a, {0, 0}, y) -
                                         kInvTwoPi * std::log(a / norm(y))) < 1e-12);
  const RectangleKernel rect(1.0, 1.0);
  double edge = 0.0;
  for (int i = 0; i <= 16; ++i) {
    const double t = i / 16.0;
    for (Point2 p : {Point2{t, 0}, Point2{t, 1}, Point2{0, t}, Point2{1, t}})
      edge = std::max(edge, std::abs(rect.value(p, {0.3, 0.4})));
  }
  check("rectangle Green vanishes on the boundary", edge < 1e-8);
  check("sample allocation", allocate_samples({1, 0.25}, {1, 4}, 0.1) == std::vector<long>{200, 50});
  Example1Setup s;
  s.meshes = {32, 64};
  const auto rows = run_example1(s);
  check("aperture solve second order", std::abs(rows[1].u_rate - 2.0) < 0.25);
  std::printf("selftest: %d/%d checks passed\n", pass, total);
  return pass == total ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary integral solvers with Green's kernels and multilevel Monte Carlo"};
  app.require_subcommand(1);
  std::string config_file, out_dir, kernel, eps_list, meshes, source, geometry;
  int threads = 0, levels = 0, pilot = 0, pilot_levels = 0, grid = 0;
  long long seed = -1;
  bool costs = false;

  app.add_option("--config", config_file, "JSON config file (or a results file to re-run)");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--threads", threads, "OpenMP threads (default: available cores)");
  app.add_option("--seed", seed, "Random seed");

  auto* ex1 = app.add_subcommand("example1", "Deterministic convergence table");
  ex1->add_option("--kernel", kernel, "analytical | numerical | schur");
  ex1->add_option("--levels", levels, "Number of meshes N2 = 8, 16, ...");
  ex1->add_option("--meshes", meshes, "Comma-separated N2 list");
  ex1->add_flag("--costs", costs, "Also time assembly and solve per mesh");

  auto* ex2 = app.add_subcommand("example2", "Random-aperture rates and eps-cost");
  ex2->add_option("--kernel", kernel, "analytical | numerical | schur | all");
  ex2->add_option("--eps", eps_list, "Comma-separated tolerances");
  ex2->add_option("--pilot", pilot, "Pilot samples per level");
  ex2->add_option("--pilot-levels", pilot_levels, "Finest pilot level");

  auto* ml = app.add_subcommand("mlmc", "One MLMC estimate per tolerance");
  ml->add_option("--kernel", kernel, "analytical | numerical | schur");
  ml->add_option("--eps", eps_list, "Comma-separated tolerances");
  ml->add_option("--pilot", pilot, "Pilot samples per level");
  ml->add_option("--pilot-levels", pilot_levels, "Finest pilot level");

  auto* gr = app.add_subcommand("greens", "Tabulate a Green's function");
  gr->add_option("--geometry", geometry, "square | disk | halfplane");
  gr->add_option("--source", source, "Source point x1,x2");
  gr->add_option("--grid", grid, "Grid points per axis");

  auto* st = app.add_subcommand("selftest", "Quick internal consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  try {
    if (threads < 0) throw ConfigError("--threads must be >= 0");
    omp_set_num_threads(threads > 0 ? threads : omp_get_num_procs());
    if (st->parsed()) return run_selftest();

    ExperimentConfig c;
    if (!config_file.empty()) c = load_config_file(config_file, c);
    for (auto* sub : {ex1, ex2, ml, gr})
      if (sub->parsed()) c.experiment = sub->get_name();
    if (!out_dir.empty()) c.output_dir = out_dir;
    if (seed >= 0) c.mlmc.seed = static_cast<std::uint64_t>(seed);
    if (!kernel.empty()) c.kernel = kernel;
    if (levels > 0) {
      c.example1.meshes.clear();
      for (int l = 0; l < levels; ++l) c.example1.meshes.push_back(8 << l);
    } else if (ex1->count("--levels")) {
      throw ConfigError("--levels must be >= 1");
    }
    if (!meshes.empty()) c.example1.meshes = parse_int_list(meshes, "meshes");
    if (costs) c.example1_costs = true;
    if (!eps_list.empty()) c.eps = parse_double_list(eps_list, "eps");
    if (pilot != 0) c.mlmc.pilot_samples = pilot;
    if (pilot_levels != 0) c.mlmc.pilot_levels = pilot_levels;
    if (!geometry.empty()) c.geometry = geometry;
    if (!source.empty()) c.source = parse_point(source, "source");
    if (grid != 0) c.grid = grid;
    c.validate();

    if (c.experiment == "example1") return run_example1_cmd(c);
    if (c.experiment == "example2") return run_example2_cmd(c);
    if (c.experiment == "mlmc") return run_mlmc_cmd(c);
    return run_greens_cmd(c);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return 3;
  } catch (const GeometryError& e) {
    std::fprintf(stderr, "solver error (geometry): %s\n", e.what());
    return 3;
  } catch (const KernelError& e) {
    std::fprintf(stderr, "solver error (kernel): %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
