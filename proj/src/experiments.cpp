#include "greenpot/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "greenpot/errors.hpp"

namespace greenpot {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool in_unit_square(const Point2& p) {
  return p.x1 > 0.0 && p.x1 < 1.0 && p.x2 > 0.0 && p.x2 < 1.0;
}

// u1 = sum_{n,m=1}^{2} w_nm sin(n pi x) sin(m pi y); only w_11 is nonzero.
double u1_weight(int n, int m) {
  const double sn = std::sin(n * kPi / 2.0), sm = std::sin(m * kPi / 2.0);
  return 100.0 * sn * sn * sm * sm / (n * m * std::pow(kPi, 4) * (n * n + m * m));
}

// Single layer of the fixed boundaries with concatenated density mu1.
Eigen::VectorXd fixed_layer_values(const std::vector<DiscretizedBoundary>& fixed,
                                   const Eigen::VectorXd& mu1, const std::vector<Point2>& pts) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    int k = 0;
    double s = 0.0;
    for (const auto& b : fixed)
      for (const auto& f : b.nodes) s += b.h * fundamental_value(pts[i], f.point) * mu1(k++);
    out(static_cast<Eigen::Index>(i)) = s;
  }
  return out;
}

// Rows: d/dx1 for every point, then d/dx2.
Eigen::VectorXd fixed_layer_gradients(const std::vector<DiscretizedBoundary>& fixed,
                                      const Eigen::VectorXd& mu1, const std::vector<Point2>& pts) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    int k = 0;
    Vec2 s{};
    for (const auto& b : fixed)
      for (const auto& f : b.nodes) s = s + fundamental_gradient(pts[i], f.point) * (b.h * mu1(k++));
    out(i) = s.x1;
    out(n + i) = s.x2;
  }
  return out;
}

struct SchurTimed {
  SchurSolution solution;
  double assembly_seconds = 0.0;
  double solve_seconds = 0.0;
};

// Schur complement formation counts as assembly, the reduced solve and the
// back-substitution as solve.
SchurTimed schur_timed(const std::vector<DiscretizedBoundary>& fixed,
                       const BoundaryCondition& fixed_bc, const DiscretizedBoundary& aperture,
                       const BoundaryCondition& bc, const Eigen::PartialPivLU<Eigen::MatrixXd>& lu) {
  SchurTimed r;
  auto t0 = Clock::now();
  const FullBoundaryBlocks blocks = assemble_coupling_blocks(fixed, fixed_bc, aperture, bc);
  const Eigen::MatrixXd x = lu.solve(blocks.g12);
  r.solution.schur = blocks.g22 - blocks.g21 * x;
  r.assembly_seconds = seconds_since(t0);
  t0 = Clock::now();
  const Eigen::VectorXd y = lu.solve(blocks.f1);
  r.solution.mu2 = solve_dense(r.solution.schur, blocks.f2 - blocks.g21 * y, "Schur complement");
  r.solution.mu1 = y - x * r.solution.mu2;
  r.solve_seconds = seconds_since(t0);
  return r;
}

std::shared_ptr<const NumericalGreenKernel> square_numerical_green(int n1) {
  return build_numerical_green({std::make_shared<RectangleCurve>(1.0, 1.0)},
                               BoundaryCondition::dirichlet(), {n1});
}

const double kGaussX[4] = {-0.86113631159405257522, -0.33998104358485626480,
                           0.33998104358485626480, 0.86113631159405257522};
const double kGaussW[4] = {0.34785484513745385737, 0.65214515486254614263,
                           0.65214515486254614263, 0.34785484513745385737};

}  // namespace

std::string to_string(KernelChoice k) {
  switch (k) {
    case KernelChoice::analytical: return "analytical";
    case KernelChoice::numerical: return "numerical";
    case KernelChoice::fundamental_schur: return "schur";
  }
  return "?";
}

KernelChoice parse_kernel_choice(const std::string& s) {
  if (s == "analytical") return KernelChoice::analytical;
  if (s == "numerical") return KernelChoice::numerical;
  if (s == "schur" || s == "fundamental_schur") return KernelChoice::fundamental_schur;
  throw ConfigError("unknown kernel '" + s + "' (expected analytical, numerical or schur)");
}

double deterministic_u1(const Point2& x) {
  double s = 0.0;
  for (int n = 1; n <= 2; ++n)
    for (int m = 1; m <= 2; ++m)
      s += u1_weight(n, m) * std::sin(n * kPi * x.x1) * std::sin(m * kPi * x.x2);
  return s;
}

Vec2 deterministic_u1_gradient(const Point2& x) {
  Vec2 g{};
  for (int n = 1; n <= 2; ++n)
    for (int m = 1; m <= 2; ++m) {
      const double w = u1_weight(n, m);
      g.x1 += w * n * kPi * std::cos(n * kPi * x.x1) * std::sin(m * kPi * x.x2);
      g.x2 += w * m * kPi * std::sin(n * kPi * x.x1) * std::cos(m * kPi * x.x2);
    }
  return g;
}

double deterministic_u1_forcing(const Point2& x) {
  double s = 0.0;
  for (int n = 1; n <= 2; ++n)
    for (int m = 1; m <= 2; ++m)
      s += u1_weight(n, m) * kPi * kPi * (n * n + m * m) * std::sin(n * kPi * x.x1) *
           std::sin(m * kPi * x.x2);
  return s;
}

BoundaryCondition trace_data(ScalarField u1, VectorField grad_u1, const BoundaryCondition& bc) {
  bc.validate();
  BoundaryCondition out;
  out.alpha = bc.alpha;
  out.beta = bc.beta;
  const double a = bc.alpha, b = bc.beta;
  auto data = bc.rhs;
  out.rhs = [a, b, data, u1, grad_u1](const Point2& x, const Vec2& n) {
    double v = data ? data(x, n) : 0.0;
    if (a != 0.0) v -= a * u1(x);
    if (b != 0.0) v -= b * dot(grad_u1(x), n);
    return v;
  };
  return out;
}

void FunctionalSpec::validate() const {
  if (kind == Kind::point_value) return;
  if (!(offset > 0.0)) throw ConfigError("functional: contour offset must be positive");
  if (contour_points != 0 && contour_points < 64)
    throw ConfigError("functional: a fixed contour needs at least 64 points");
  if (contour_points == 0 && !(points_per_node > 0.0))
    throw ConfigError("functional: points_per_node must be positive");
}

int FunctionalSpec::contour_count(int aperture_nodes) const {
  if (contour_points > 0) return contour_points;
  return std::max(4, static_cast<int>(std::lround(points_per_node * aperture_nodes)));
}

std::vector<Point2> curve_polygon(const ClosedCurve& curve, int samples) {
  std::vector<Point2> poly(samples);
  for (int k = 0; k < samples; ++k) poly[k] = curve.eval(static_cast<double>(k) / samples);
  return poly;
}

bool inside_polygon(const std::vector<Point2>& poly, const Point2& p) {
  // Even-odd ray crossing along +x1.
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.x2 > p.x2) != (b.x2 > p.x2) &&
        p.x1 < a.x1 + (p.x2 - a.x2) * (b.x1 - a.x1) / (b.x2 - a.x2))
      inside = !inside;
  }
  return inside;
}

bool inside_curve(const ClosedCurve& curve, const Point2& p, int samples) {
  return inside_polygon(curve_polygon(curve, samples), p);
}

double functional_eval(const FunctionalSpec& spec, const CurvePtr& aperture, int aperture_nodes,
                       const FieldBatch& u, const std::function<bool(const Point2&)>& in_domain) {
  spec.validate();
  const std::vector<Point2> poly = curve_polygon(*aperture, 1024);
  auto check = [&](const Point2& p) {
    if ((in_domain && !in_domain(p)) || inside_polygon(poly, p)) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "functional point (%.6g, %.6g) is outside the domain", p.x1,
                    p.x2);
      throw GeometryError(buf);
    }
  };
  if (spec.kind == FunctionalSpec::Kind::point_value) {
    check(spec.point);
    return u({spec.point})(0);
  }
  const CurvePtr contour = offset_contour(aperture, spec.offset);
  const int m = spec.contour_count(aperture_nodes);
  std::vector<Point2> pts(m);
  for (int j = 0; j < m; ++j) {
    pts[j] = contour->eval(static_cast<double>(j) / m);
    check(pts[j]);
  }
  const Eigen::VectorXd v = u(pts);
  Eigen::Index jmax = 0;
  const double vmax = v.maxCoeff(&jmax);
  if (!spec.refine) return vmax;

  auto g = [&](double t) {
    t -= std::floor(t);
    const Point2 p = contour->eval(t);
    check(p);
    return u({p})(0);
  };
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = (static_cast<double>(jmax) - 1.0) / m, hi = (static_cast<double>(jmax) + 1.0) / m;
  double c = hi - ratio * (hi - lo), d = lo + ratio * (hi - lo);
  double gc = g(c), gd = g(d);
  while (hi - lo > 1e-11) {
    if (gc > gd) {
      hi = d;
      d = c;
      gd = gc;
      c = hi - ratio * (hi - lo);
      gc = g(c);
    } else {
      lo = c;
      c = d;
      gc = gd;
      d = lo + ratio * (hi - lo);
      gd = g(d);
    }
  }
  return std::max(vmax, std::max(gc, gd));
}

int fixed_node_count(double ratio, int n2) {
  return std::max(4, 4 * static_cast<int>(std::lround(ratio * n2 / 4.0)));
}

int fine_grid_size(int requested, int n) {
  const int target = std::max(requested, n);
  return n * ((target + n - 1) / n);
}

// ---------------------------------------------------------------------------
// Example 2

void Example2Setup::validate() const {
  model.validate();
  functional.validate();
  if (!(fixed_ratio > 0.0 && fixed_ratio <= 64.0))
    throw ConfigError("example2: fixed_ratio must lie in (0, 64]");
  if (fine_nodes < 16 || fine_nodes > 16384)
    throw ConfigError("example2: fine_nodes must lie in [16, 16384]");
}

Example2Problem::Example2Problem(Example2Setup setup)
    : setup_(std::move(setup)), rect_(std::make_shared<RectangleKernel>(1.0, 1.0)) {
  setup_.validate();
}

BoundaryCondition Example2Problem::aperture_condition() const {
  return trace_data(deterministic_u1, deterministic_u1_gradient, BoundaryCondition::neumann());
}

std::shared_ptr<const NumericalGreenKernel> Example2Problem::numerical_kernel(int n2) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& slot = cache_[n2];
  if (!slot) slot = square_numerical_green(fixed_node_count(setup_.fixed_ratio, n2));
  return slot;
}

FieldBatch Example2Problem::solve(const CurvePtr& aperture, int n2) const {
  auto b = std::make_shared<const DiscretizedBoundary>(
      DiscretizedBoundary::make(aperture, n2, DomainSide::exterior));
  const BoundaryCondition bc = aperture_condition();
  const int fine = fine_grid_size(setup_.fine_nodes, n2);
  auto add_u1 = [](Eigen::VectorXd v, const std::vector<Point2>& pts) {
    for (std::size_t i = 0; i < pts.size(); ++i)
      v(static_cast<Eigen::Index>(i)) += deterministic_u1(pts[i]);
    return v;
  };
  switch (setup_.kernel) {
    case KernelChoice::analytical: {
      auto kernel = rect_;
      const DensitySolution density = solve_density(assemble_system(*kernel, *b, bc), b);
      return [=](const std::vector<Point2>& pts) {
        const NearFieldEvaluator ev(aperture, fine, pts);
        return add_u1(ev.values(*kernel, density), pts);
      };
    }
    case KernelChoice::numerical: {
      auto kernel = numerical_kernel(n2);
      auto prep = std::make_shared<const PreparedSources>(kernel->prepare(b->node_points()));
      const Eigen::MatrixXd a = assemble_block_prepared(*kernel, *b, bc, *b, true, prep.get());
      DensitySolution density{solve_dense(a, collocation_rhs(*b, bc), "aperture system"), b};
      return [=](const std::vector<Point2>& pts) {
        const NearFieldEvaluator ev(aperture, fine, pts);
        return add_u1(ev.values(*kernel, density, prep.get()), pts);
      };
    }
    case KernelChoice::fundamental_schur: {
      auto fixed = numerical_kernel(n2);
      const FullBoundaryBlocks blocks =
          assemble_coupling_blocks(fixed->fixed_boundaries(), fixed->condition(), *b, bc);
      const SchurSolution s = schur_solve(blocks, &fixed->g11_lu());
      DensitySolution density{s.mu2, b};
      const Eigen::VectorXd mu1 = s.mu1;
      return [=](const std::vector<Point2>& pts) {
        const NearFieldEvaluator ev(aperture, fine, pts);
        const FundamentalKernel fk;
        Eigen::VectorXd v = ev.values(fk, density);
        v += fixed_layer_values(fixed->fixed_boundaries(), mu1, pts);
        return add_u1(std::move(v), pts);
      };
    }
  }
  throw ConfigError("example2: unknown kernel");
}

double Example2Problem::functional(const CurvePtr& aperture, int n2) const {
  return functional_eval(setup_.functional, aperture, n2, solve(aperture, n2), in_unit_square);
}

std::vector<double> Example2Problem::evaluate(RngStream& rng, const std::vector<int>& nodes) const {
  const CurvePtr aperture = sample_aperture(setup_.model, rng);
  std::vector<double> f;
  f.reserve(nodes.size());
  for (int n : nodes) f.push_back(functional(aperture, n));
  return f;
}

double Example2Problem::cost_model(int n2) const {
  const double m = n2;
  const double n1 = fixed_node_count(setup_.fixed_ratio, n2);
  const double n = n1 + m;
  switch (setup_.kernel) {
    case KernelChoice::analytical: return m * m * m + m * m;
    case KernelChoice::numerical: return m * m * m + n1 * m * n + m * m;
    case KernelChoice::fundamental_schur: return m * m * m + n1 * m * n + m * m + n1 * m + n;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Example 1

void Example1Setup::validate() const {
  if (meshes.size() < 2) throw ConfigError("example1: at least 2 meshes are required");
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    if (meshes[i] < 4 || meshes[i] > 8192) throw ConfigError("example1: N2 must lie in [4, 8192]");
    if (i > 0 && meshes[i] <= meshes[i - 1])
      throw ConfigError("example1: meshes must be strictly increasing");
  }
  if (!(fixed_ratio > 0.0 && fixed_ratio <= 64.0))
    throw ConfigError("example1: fixed_ratio must lie in (0, 64]");
  if (!(semi_x > 0.0 && semi_y > 0.0)) throw ConfigError("example1: semi-axes must be positive");
  if (!(annulus_inner > 0.0 && annulus_outer > annulus_inner))
    throw ConfigError("example1: need 0 < annulus_inner < annulus_outer");
  if (annulus_angular < 8) throw ConfigError("example1: annulus_angular must be >= 8");
  if (fine_nodes < 16) throw ConfigError("example1: fine_nodes must be >= 16");
  const double reach = std::max(semi_x, semi_y) + annulus_outer;
  if (center.x1 - reach <= 0.0 || center.x1 + reach >= 1.0 || center.x2 - reach <= 0.0 ||
      center.x2 + reach >= 1.0)
    throw ConfigError("example1: aperture and error region must lie inside the unit square");
}

CurvePtr Example1Setup::aperture() const {
  return std::make_shared<Ellipse>(center, semi_x, semi_y);
}

double convergence_rate(double e_prev, double e, double h_prev, double h) {
  return std::log(e / e_prev) / std::log(h / h_prev);
}

namespace {

struct Annulus {
  std::vector<Point2> points;
  std::vector<double> weights;
};

Annulus make_annulus(const Example1Setup& s, const ClosedCurve& curve) {
  Annulus a;
  const int mt = s.annulus_angular;
  for (int q = 0; q < 4; ++q) {
    const double half = 0.5 * (s.annulus_outer - s.annulus_inner);
    const double d = 0.5 * (s.annulus_inner + s.annulus_outer) + half * kGaussX[q];
    for (int j = 0; j < mt; ++j) {
      const Frame f = eval_frame(curve, static_cast<double>(j) / mt);
      a.points.push_back(f.point + f.unit_normal * d);
      a.weights.push_back(half * kGaussW[q] * f.speed * (1.0 + d * f.curvature) / mt);
    }
  }
  return a;
}

struct Example1Solve {
  int n1 = 0;
  Eigen::VectorXd mu;
  Eigen::VectorXd u, grad;  // at annulus points; grad stacked x then y
  double assembly_seconds = 0.0, solve_seconds = 0.0;
};

Example1Solve example1_solve(const Example1Setup& s, const RectangleKernel& rect,
                             const std::shared_ptr<const DiscretizedBoundary>& b,
                             const BoundaryCondition& bc, const NearFieldEvaluator* ev) {
  Example1Solve r;
  const int n2 = b->n;
  switch (s.kernel) {
    case KernelChoice::analytical: {
      auto t0 = Clock::now();
      const BieSystem sys = assemble_system(rect, *b, bc);
      r.assembly_seconds = seconds_since(t0);
      t0 = Clock::now();
      const DensitySolution d = solve_density(sys, b);
      r.solve_seconds = seconds_since(t0);
      r.mu = d.mu;
      if (ev) {
        r.u = ev->values(rect, d);
        r.grad = ev->gradients(rect, d);
      }
      break;
    }
    case KernelChoice::numerical: {
      r.n1 = fixed_node_count(s.fixed_ratio, n2);
      auto kernel = square_numerical_green(r.n1);
      auto t0 = Clock::now();
      const PreparedSources prep = kernel->prepare(b->node_points());
      const Eigen::MatrixXd a = assemble_block_prepared(*kernel, *b, bc, *b, true, &prep);
      const Eigen::VectorXd rhs = collocation_rhs(*b, bc);
      r.assembly_seconds = seconds_since(t0);
      t0 = Clock::now();
      DensitySolution d{solve_dense(a, rhs, "aperture system"), b};
      r.solve_seconds = seconds_since(t0);
      r.mu = d.mu;
      if (ev) {
        r.u = ev->values(*kernel, d, &prep);
        r.grad = ev->gradients(*kernel, d);
      }
      break;
    }
    case KernelChoice::fundamental_schur: {
      r.n1 = fixed_node_count(s.fixed_ratio, n2);
      auto fixed = square_numerical_green(r.n1);
      const SchurTimed st =
          schur_timed(fixed->fixed_boundaries(), fixed->condition(), *b, bc, fixed->g11_lu());
      r.assembly_seconds = st.assembly_seconds;
      r.solve_seconds = st.solve_seconds;
      r.mu = st.solution.mu2;
      if (ev) {
        const FundamentalKernel fk;
        const DensitySolution d{st.solution.mu2, b};
        r.u = ev->values(fk, d) +
              fixed_layer_values(fixed->fixed_boundaries(), st.solution.mu1, ev->targets());
        r.grad = ev->gradients(fk, d) +
                 fixed_layer_gradients(fixed->fixed_boundaries(), st.solution.mu1, ev->targets());
      }
      break;
    }
  }
  return r;
}

}  // namespace

std::vector<ConvergenceRow> run_example1(const Example1Setup& setup) {
  setup.validate();
  const RectangleKernel rect(1.0, 1.0);
  const CurvePtr curve = setup.aperture();
  const Point2 src = setup.center;
  const BoundaryCondition bc =
      BoundaryCondition::dirichlet([&rect, src](const Point2& x, const Vec2&) {
        return rect.value(x, src);
      });
  const Annulus ann = make_annulus(setup, *curve);
  const std::size_t np = ann.points.size();
  std::vector<double> exact(np);
  std::vector<Vec2> exact_grad(np);
  for (std::size_t i = 0; i < np; ++i) {
    exact[i] = rect.value(ann.points[i], src);
    exact_grad[i] = rect.gradient(ann.points[i], src);
  }

  std::vector<ConvergenceRow> rows;
  for (int n2 : setup.meshes) {
    auto b = std::make_shared<const DiscretizedBoundary>(
        DiscretizedBoundary::make(curve, n2, DomainSide::exterior));
    const NearFieldEvaluator ev(curve, fine_grid_size(setup.fine_nodes, n2), ann.points, true);
    const Example1Solve sol = example1_solve(setup, rect, b, bc, &ev);
    const DensitySolution ref = solve_density(assemble_two_point_system(rect, *b, bc), b);

    ConvergenceRow row;
    row.n1 = sol.n1;
    row.n2 = n2;
    row.assembly_seconds = sol.assembly_seconds;
    row.solve_seconds = sol.solve_seconds;
    row.mu_error = (sol.mu - ref.mu).lpNorm<Eigen::Infinity>();
    double uinf = 0.0, h1 = 0.0;
    const auto n = static_cast<Eigen::Index>(np);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = sol.u(i) - exact[i];
      const double e1 = sol.grad(i) - exact_grad[i].x1, e2 = sol.grad(n + i) - exact_grad[i].x2;
      uinf = std::max(uinf, std::abs(e));
      h1 += ann.weights[i] * (e * e + e1 * e1 + e2 * e2);
    }
    row.u_error = uinf;
    row.h1_error = std::sqrt(h1);
    if (rows.empty()) {
      row.mu_rate = row.u_rate = row.h1_rate = kNaN;
    } else {
      const ConvergenceRow& p = rows.back();
      const double hp = 1.0 / p.n2, h = 1.0 / n2;
      row.mu_rate = convergence_rate(p.mu_error, row.mu_error, hp, h);
      row.u_rate = convergence_rate(p.u_error, row.u_error, hp, h);
      row.h1_rate = convergence_rate(p.h1_error, row.h1_error, hp, h);
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<CostRow> cost_breakdown(const Example1Setup& setup) {
  setup.validate();
  const RectangleKernel rect(1.0, 1.0);
  const CurvePtr curve = setup.aperture();
  const Point2 src = setup.center;
  const BoundaryCondition bc =
      BoundaryCondition::dirichlet([&rect, src](const Point2& x, const Vec2&) {
        return rect.value(x, src);
      });
  std::vector<CostRow> rows;
  for (int n2 : setup.meshes) {
    auto b = std::make_shared<const DiscretizedBoundary>(
        DiscretizedBoundary::make(curve, n2, DomainSide::exterior));
    // Repeat until the timed work is long enough to swamp timer resolution.
    CostRow row;
    row.n2 = n2;
    int reps = 0;
    double total = 0.0, best_a = 1e300, best_s = 1e300;
    while (reps < 3 || (total < 0.2 && reps < 1000)) {
      const Example1Solve s = example1_solve(setup, rect, b, bc, nullptr);
      row.n1 = s.n1;
      best_a = std::min(best_a, s.assembly_seconds);
      best_s = std::min(best_s, s.solve_seconds);
      total += s.assembly_seconds + s.solve_seconds;
      ++reps;
    }
    row.assembly_seconds = best_a;
    row.solve_seconds = best_s;
    rows.push_back(row);
  }
  return rows;
}

Example2Report run_example2(const Example2Setup& setup, const std::vector<double>& eps,
                            const MlmcConfig& config) {
  config.validate();
  const Example2Problem problem(setup);
  Example2Report r;
  r.kernel = setup.kernel;
  const auto hier = LevelHierarchy::make(config.n0, config.q, config.pilot_levels);
  r.pilot = pilot_run(hier, problem, config.pilot_samples, config.seed);
  std::vector<double> h, ma, v, c;
  for (const auto& s : r.pilot.levels) {
    h.push_back(s.h);
    ma.push_back(s.mean_abs);
    v.push_back(s.variance);
    c.push_back(s.cost_model);
  }
  r.rates = fit_rates(h, ma, v, c);
  r.eps = eps;
  std::vector<double> le, lm, ls;
  for (double e : eps) {
    r.runs.push_back(mlmc_estimate(problem, e, config, &r.pilot));
    le.push_back(std::log(e));
    lm.push_back(std::log(r.runs.back().total_cost_model));
    ls.push_back(std::log(r.runs.back().total_cost_seconds));
  }
  r.cost_slope_model = eps.size() >= 2 ? least_squares_line(le, lm).first : kNaN;
  r.cost_slope_seconds = eps.size() >= 2 ? least_squares_line(le, ls).first : kNaN;
  return r;
}

GreensGrid greens_grid(const std::string& geometry, const Point2& source, int grid) {
  if (grid < 2 || grid > 4096) throw ConfigError("greens: grid must lie in [2, 4096]");
  std::unique_ptr<Kernel> kernel;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (geometry == "square") {
    kernel = std::make_unique<RectangleKernel>(1.0, 1.0);
  } else if (geometry == "disk") {
    kernel = std::make_unique<DiskKernel>(1.0);
    x0 = y0 = -1.0;
  } else if (geometry == "halfplane") {
    kernel = std::make_unique<HalfPlaneKernel>();
    x0 = -1.0;
    y1 = 2.0;
  } else {
    throw ConfigError("greens: unknown geometry '" + geometry +
                      "' (expected square, disk or halfplane)");
  }
  try {
    kernel->check_domain(source);
  } catch (const KernelError& e) {
    throw ConfigError(std::string("greens: source outside the domain: ") + e.what());
  }
  GreensGrid g;
  g.values.resize(grid, grid);
  for (int i = 0; i < grid; ++i) {
    g.x1.push_back(x0 + (x1 - x0) * i / (grid - 1));
    g.x2.push_back(y0 + (y1 - y0) * i / (grid - 1));
  }
  for (int j = 0; j < grid; ++j)
    for (int i = 0; i < grid; ++i) {
      const Point2 x{g.x1[i], g.x2[j]};
      double v;
      if (geometry == "disk" && x.x1 * x.x1 + x.x2 * x.x2 > 1.0 + 1e-12) {
        v = kNaN;
      } else if (x.x1 == source.x1 && x.x2 == source.x2) {
        v = std::numeric_limits<double>::infinity();
      } else {
        v = kernel->value(x, source);
      }
      g.values(j, i) = v;
    }
  return g;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string example1_csv(const std::vector<ConvergenceRow>& rows) {
  std::ostringstream os;
  os << "N1,N2,mu_error,mu_rate,u_error,u_rate,h1_error,h1_rate,assembly_seconds,solve_seconds\n";
  for (const auto& r : rows)
    os << r.n1 << ',' << r.n2 << ',' << format_double(r.mu_error) << ','
       << format_double(r.mu_rate) << ',' << format_double(r.u_error) << ','
       << format_double(r.u_rate) << ',' << format_double(r.h1_error) << ','
       << format_double(r.h1_rate) << ',' << format_double(r.assembly_seconds) << ','
       << format_double(r.solve_seconds) << '\n';
  return os.str();
}

std::string cost_csv(const std::vector<CostRow>& rows) {
  std::ostringstream os;
  os << "N1,N2,assembly_seconds,solve_seconds\n";
  for (const auto& r : rows)
    os << r.n1 << ',' << r.n2 << ',' << format_double(r.assembly_seconds) << ','
       << format_double(r.solve_seconds) << '\n';
  return os.str();
}

std::string level_stats_csv(const std::vector<LevelStats>& levels,
                            const std::vector<long>* allocated) {
  std::ostringstream os;
  os << "level,h,N2,samples,mean,mean_abs,variance,cost_model,cost_seconds";
  if (allocated) os << ",allocated";
  os << '\n';
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto& s = levels[l];
    os << s.level << ',' << format_double(s.h) << ',' << s.nodes << ',' << s.samples << ','
       << format_double(s.mean) << ',' << format_double(s.mean_abs) << ','
       << format_double(s.variance) << ',' << format_double(s.cost_model) << ','
       << format_double(s.cost_seconds);
    if (allocated) os << ',' << (l < allocated->size() ? (*allocated)[l] : 0L);
    os << '\n';
  }
  return os.str();
}

std::string eps_cost_csv(const Example2Report& report) {
  std::ostringstream os;
  os << "kernel,eps,levels,estimate,total_cost_model,total_cost_seconds\n";
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const auto& r = report.runs[i];
    os << to_string(report.kernel) << ',' << format_double(report.eps[i]) << ','
       << r.levels_used << ',' << format_double(r.estimate) << ','
       << format_double(r.total_cost_model) << ',' << format_double(r.total_cost_seconds)
       << '\n';
  }
  return os.str();
}

std::string greens_csv(const GreensGrid& g) {
  std::ostringstream os;
  for (Eigen::Index j = 0; j < g.values.rows(); ++j) {
    for (Eigen::Index i = 0; i < g.values.cols(); ++i) {
      if (i) os << ',';
      os << format_double(g.values(j, i));
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace greenpot
