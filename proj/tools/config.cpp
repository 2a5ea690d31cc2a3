#include "config.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "greenpot/errors.hpp"

namespace greenpot::cli {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& path, const std::string& msg) {
  throw ConfigError("config field '" + path + "': " + msg);
}

void reject_unknown(const json& j, const std::string& path, const std::set<std::string>& known) {
  if (!j.is_object()) field_error(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      field_error(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
}

std::string join(const std::string& path, const char* key) {
  return path.empty() ? key : path + "." + key;
}

double get_double(const json& j, const std::string& path) {
  if (!j.is_number()) field_error(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) field_error(path, "must be finite");
  return v;
}

long long get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) field_error(path, "expected an integer");
  return j.get<long long>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) field_error(path, "expected a string");
  return j.get<std::string>();
}

bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) field_error(path, "expected true or false");
  return j.get<bool>();
}

Point2 get_point(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) field_error(path, "expected [x1, x2]");
  return {get_double(j[0], path + "[0]"), get_double(j[1], path + "[1]")};
}

void in_range(double v, double lo, double hi, const std::string& path) {
  if (!(v >= lo && v <= hi)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "must lie in [%g, %g]", lo, hi);
    field_error(path, buf);
  }
}

// Reads `key` when present; `read` stores the converted value.
void opt(const json& j, const std::string& path, const char* key,
         const std::function<void(const json&, const std::string&)>& read) {
  if (j.contains(key)) read(j.at(key), join(path, key));
}

json point_json(const Point2& p) { return json::array({p.x1, p.x2}); }

std::string functional_kind(FunctionalSpec::Kind k) {
  return k == FunctionalSpec::Kind::point_value ? "point" : "sup";
}

}  // namespace

void ExperimentConfig::validate() const {
  static const std::set<std::string> experiments{"example1", "example2", "greens", "mlmc"};
  if (!experiments.count(experiment))
    field_error("experiment", "expected example1, example2, greens or mlmc");
  if (kernel != "all") parse_kernel_choice(kernel);
  if (kernel == "all" && experiment != "example2")
    field_error("kernel", "\"all\" is only valid for example2");
  if (output_dir.empty()) field_error("output_dir", "must not be empty");
  try {
    example1.validate();
    random.validate();
    mlmc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (eps.empty()) field_error("mlmc.eps", "at least one tolerance is required");
  for (double e : eps) in_range(e, 1e-8, 1.0, "mlmc.eps");
  if (grid < 2 || grid > 4096) field_error("greens.grid", "must lie in [2, 4096]");
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["kernel"] = c.kernel;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.mlmc.seed;
  const auto& e1 = c.example1;
  j["example1"] = {{"meshes", e1.meshes},
                   {"fixed_ratio", e1.fixed_ratio},
                   {"center", point_json(e1.center)},
                   {"semi_axes", json::array({e1.semi_x, e1.semi_y})},
                   {"annulus", json::array({e1.annulus_inner, e1.annulus_outer})},
                   {"annulus_angular", e1.annulus_angular},
                   {"fine_nodes", e1.fine_nodes},
                   {"costs", c.example1_costs}};
  const auto& m = c.random.model;
  j["aperture"] = {{"mean_center", point_json(m.mean_center)}, {"sigma_x", m.sigma_x},
                   {"sigma_y", m.sigma_y},     {"mean_radius", m.mean_radius},
                   {"sigma_r", m.sigma_r},     {"modes", m.modes},
                   {"mode_decay", m.mode_decay}};
  const auto& f = c.random.functional;
  j["functional"] = {{"kind", functional_kind(f.kind)},
                     {"offset", f.offset},
                     {"contour_points", f.contour_points},
                     {"points_per_node", f.points_per_node},
                     {"refine", f.refine},
                     {"point", point_json(f.point)}};
  j["solver"] = {{"fixed_ratio", c.random.fixed_ratio}, {"fine_nodes", c.random.fine_nodes}};
  const auto& ml = c.mlmc;
  j["mlmc"] = {{"n0", ml.n0},
               {"q", ml.q},
               {"pilot_levels", ml.pilot_levels},
               {"pilot_samples", ml.pilot_samples},
               {"max_levels", ml.max_levels},
               {"eps_i_fraction", ml.eps_i_fraction},
               {"alpha_assumed", ml.alpha_assumed},
               {"eps", c.eps}};
  j["greens"] = {{"geometry", c.geometry}, {"source", point_json(c.source)}, {"grid", c.grid}};
  return j;
}

ExperimentConfig apply_json(const json& j, ExperimentConfig c) {
  reject_unknown(j, "", {"experiment", "kernel", "output_dir", "seed", "example1", "aperture",
                         "functional", "solver", "mlmc", "greens"});
  opt(j, "", "experiment", [&](const json& v, const std::string& p) { c.experiment = get_string(v, p); });
  opt(j, "", "kernel", [&](const json& v, const std::string& p) { c.kernel = get_string(v, p); });
  opt(j, "", "output_dir", [&](const json& v, const std::string& p) { c.output_dir = get_string(v, p); });
  opt(j, "", "seed", [&](const json& v, const std::string& p) {
    const long long s = get_int(v, p);
    if (s < 0) field_error(p, "must be >= 0");
    c.mlmc.seed = static_cast<std::uint64_t>(s);
  });

  if (j.contains("example1")) {
    const json& e = j.at("example1");
    const std::string path = "example1";
    reject_unknown(e, path, {"meshes", "fixed_ratio", "center", "semi_axes", "annulus",
                             "annulus_angular", "fine_nodes", "costs"});
    auto& s = c.example1;
    opt(e, path, "meshes", [&](const json& v, const std::string& p) {
      if (!v.is_array()) field_error(p, "expected an array of integers");
      s.meshes.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const long long n = get_int(v[i], p + "[" + std::to_string(i) + "]");
        in_range(static_cast<double>(n), 4, 8192, p);
        s.meshes.push_back(static_cast<int>(n));
      }
    });
    opt(e, path, "fixed_ratio", [&](const json& v, const std::string& p) {
      s.fixed_ratio = get_double(v, p);
      in_range(s.fixed_ratio, 0.25, 64, p);
    });
    opt(e, path, "center", [&](const json& v, const std::string& p) { s.center = get_point(v, p); });
    opt(e, path, "semi_axes", [&](const json& v, const std::string& p) {
      const Point2 a = get_point(v, p);
      s.semi_x = a.x1;
      s.semi_y = a.x2;
    });
    opt(e, path, "annulus", [&](const json& v, const std::string& p) {
      const Point2 a = get_point(v, p);
      s.annulus_inner = a.x1;
      s.annulus_outer = a.x2;
    });
    opt(e, path, "annulus_angular", [&](const json& v, const std::string& p) {
      s.annulus_angular = static_cast<int>(get_int(v, p));
      in_range(s.annulus_angular, 8, 4096, p);
    });
    opt(e, path, "fine_nodes", [&](const json& v, const std::string& p) {
      s.fine_nodes = static_cast<int>(get_int(v, p));
      in_range(s.fine_nodes, 16, 16384, p);
    });
    opt(e, path, "costs", [&](const json& v, const std::string& p) { c.example1_costs = get_bool(v, p); });
  }

  if (j.contains("aperture")) {
    const json& a = j.at("aperture");
    const std::string path = "aperture";
    reject_unknown(a, path, {"mean_center", "sigma_x", "sigma_y", "mean_radius", "sigma_r",
                             "modes", "mode_decay"});
    auto& m = c.random.model;
    opt(a, path, "mean_center", [&](const json& v, const std::string& p) { m.mean_center = get_point(v, p); });
    opt(a, path, "sigma_x", [&](const json& v, const std::string& p) {
      m.sigma_x = get_double(v, p);
      in_range(m.sigma_x, 0, 0.5, p);
    });
    opt(a, path, "sigma_y", [&](const json& v, const std::string& p) {
      m.sigma_y = get_double(v, p);
      in_range(m.sigma_y, 0, 0.5, p);
    });
    opt(a, path, "mean_radius", [&](const json& v, const std::string& p) {
      m.mean_radius = get_double(v, p);
      in_range(m.mean_radius, 1e-3, 0.5, p);
    });
    opt(a, path, "sigma_r", [&](const json& v, const std::string& p) {
      m.sigma_r = get_double(v, p);
      in_range(m.sigma_r, 0, 0.5, p);
    });
    opt(a, path, "modes", [&](const json& v, const std::string& p) {
      m.modes = static_cast<int>(get_int(v, p));
      in_range(m.modes, 0, 256, p);
    });
    opt(a, path, "mode_decay", [&](const json& v, const std::string& p) {
      m.mode_decay = get_double(v, p);
      in_range(m.mode_decay, 0, 16, p);
    });
  }

  if (j.contains("functional")) {
    const json& f = j.at("functional");
    const std::string path = "functional";
    reject_unknown(f, path, {"kind", "offset", "contour_points", "points_per_node", "refine", "point"});
    auto& s = c.random.functional;
    opt(f, path, "kind", [&](const json& v, const std::string& p) {
      const std::string k = get_string(v, p);
      if (k == "sup") s.kind = FunctionalSpec::Kind::sup_on_offset_contour;
      else if (k == "point") s.kind = FunctionalSpec::Kind::point_value;
      else field_error(p, "expected \"sup\" or \"point\"");
    });
    opt(f, path, "offset", [&](const json& v, const std::string& p) {
      s.offset = get_double(v, p);
      in_range(s.offset, 1e-6, 0.5, p);
    });
    opt(f, path, "contour_points", [&](const json& v, const std::string& p) {
      s.contour_points = static_cast<int>(get_int(v, p));
      if (s.contour_points != 0) in_range(s.contour_points, 64, 65536, p);
    });
    opt(f, path, "points_per_node", [&](const json& v, const std::string& p) {
      s.points_per_node = get_double(v, p);
      in_range(s.points_per_node, 0.0625, 64, p);
    });
    opt(f, path, "refine", [&](const json& v, const std::string& p) { s.refine = get_bool(v, p); });
    opt(f, path, "point", [&](const json& v, const std::string& p) { s.point = get_point(v, p); });
  }

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    const std::string path = "solver";
    reject_unknown(s, path, {"fixed_ratio", "fine_nodes"});
    opt(s, path, "fixed_ratio", [&](const json& v, const std::string& p) {
      c.random.fixed_ratio = get_double(v, p);
      in_range(c.random.fixed_ratio, 0.25, 64, p);
    });
    opt(s, path, "fine_nodes", [&](const json& v, const std::string& p) {
      c.random.fine_nodes = static_cast<int>(get_int(v, p));
      in_range(c.random.fine_nodes, 16, 16384, p);
    });
  }

  if (j.contains("mlmc")) {
    const json& m = j.at("mlmc");
    const std::string path = "mlmc";
    reject_unknown(m, path, {"n0", "q", "pilot_levels", "pilot_samples", "max_levels",
                             "eps_i_fraction", "alpha_assumed", "eps"});
    auto& s = c.mlmc;
    opt(m, path, "n0", [&](const json& v, const std::string& p) {
      s.n0 = static_cast<int>(get_int(v, p));
      in_range(s.n0, 4, 4096, p);
    });
    opt(m, path, "q", [&](const json& v, const std::string& p) {
      s.q = static_cast<int>(get_int(v, p));
      in_range(s.q, 2, 8, p);
    });
    opt(m, path, "pilot_levels", [&](const json& v, const std::string& p) {
      s.pilot_levels = static_cast<int>(get_int(v, p));
      in_range(s.pilot_levels, 3, 16, p);
    });
    opt(m, path, "pilot_samples", [&](const json& v, const std::string& p) {
      s.pilot_samples = static_cast<int>(get_int(v, p));
      in_range(s.pilot_samples, 2, 1000000, p);
    });
    opt(m, path, "max_levels", [&](const json& v, const std::string& p) {
      s.max_levels = static_cast<int>(get_int(v, p));
      in_range(s.max_levels, 3, 16, p);
    });
    opt(m, path, "eps_i_fraction", [&](const json& v, const std::string& p) {
      s.eps_i_fraction = get_double(v, p);
      if (!(s.eps_i_fraction > 0.0 && s.eps_i_fraction < 1.0)) field_error(p, "must lie in (0, 1)");
    });
    opt(m, path, "alpha_assumed", [&](const json& v, const std::string& p) {
      s.alpha_assumed = get_double(v, p);
      in_range(s.alpha_assumed, 0.1, 16, p);
    });
    opt(m, path, "eps", [&](const json& v, const std::string& p) {
      if (!v.is_array()) field_error(p, "expected an array of numbers");
      c.eps.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        c.eps.push_back(get_double(v[i], p + "[" + std::to_string(i) + "]"));
        in_range(c.eps.back(), 1e-8, 1.0, p);
      }
    });
  }

  if (j.contains("greens")) {
    const json& g = j.at("greens");
    const std::string path = "greens";
    reject_unknown(g, path, {"geometry", "source", "grid"});
    opt(g, path, "geometry", [&](const json& v, const std::string& p) { c.geometry = get_string(v, p); });
    opt(g, path, "source", [&](const json& v, const std::string& p) { c.source = get_point(v, p); });
    opt(g, path, "grid", [&](const json& v, const std::string& p) {
      c.grid = static_cast<int>(get_int(v, p));
      in_range(c.grid, 2, 4096, p);
    });
  }
  return c;
}

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into line and column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": JSON syntax error: " + e.what());
  }
  if (j.is_object() && j.contains("schema_version") && j.contains("config")) j = j.at("config");
  try {
    return apply_json(j, std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

std::vector<double> parse_double_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !std::isfinite(v))
      throw ConfigError(std::string("--") + what + ": '" + item + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string("--") + what + ": empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
  std::vector<int> out;
  for (double v : parse_double_list(s, what)) {
    if (v != std::floor(v) || std::abs(v) > 1e9)
      throw ConfigError(std::string("--") + what + ": expected integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

Point2 parse_point(const std::string& s, const char* what) {
  const auto v = parse_double_list(s, what);
  if (v.size() != 2) throw ConfigError(std::string("--") + what + ": expected x1,x2");
  return {v[0], v[1]};
}

}  // namespace greenpot::cli
