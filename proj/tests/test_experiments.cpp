#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "greenpot/experiments.hpp"

using namespace greenpot;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Of the four weighted modes only (1,1) is nonzero: u1 = 50/pi^4 sin(pi x) sin(pi y).
double u1_oracle(const Point2& x) { return 50.0 / std::pow(kPi, 4) * std::sin(kPi * x.x1) * std::sin(kPi * x.x2); }

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

Example2Setup setup_with(KernelChoice k) {
  Example2Setup s;
  s.kernel = k;
  return s;
}

}  // namespace

TEST_CASE("kernel choice names") {
  CHECK(parse_kernel_choice("analytical") == KernelChoice::analytical);
  CHECK(parse_kernel_choice("numerical") == KernelChoice::numerical);
  CHECK(parse_kernel_choice("schur") == KernelChoice::fundamental_schur);
  CHECK(parse_kernel_choice("fundamental_schur") == KernelChoice::fundamental_schur);
  CHECK(to_string(KernelChoice::fundamental_schur) == "schur");
  CHECK_THROWS_AS(parse_kernel_choice("fmm"), ConfigError);
}

TEST_CASE("deterministic field: sides, center value, closed form") {
  for (double s : {0.0, 0.2, 0.5, 0.77, 1.0}) {
    CHECK(std::abs(deterministic_u1({s, 0.0})) < 1e-15);
    CHECK(std::abs(deterministic_u1({s, 1.0})) < 1e-15);
    CHECK(std::abs(deterministic_u1({0.0, s})) < 1e-15);
    CHECK(std::abs(deterministic_u1({1.0, s})) < 1e-15);
  }
  CHECK(deterministic_u1({0.5, 0.5}) == doctest::Approx(100.0 / (2 * std::pow(kPi, 4))).epsilon(1e-15));
  RngStream r(3, 3);
  for (int i = 0; i < 20; ++i) {
    const Point2 x{r.uniform01(), r.uniform01()};
    CHECK(deterministic_u1(x) == doctest::Approx(u1_oracle(x)).epsilon(1e-13).scale(1e-15));
  }
}

TEST_CASE("deterministic field: gradient and forcing against finite differences") {
  RngStream r(5, 1);
  const double h = 1e-3;
  for (int i = 0; i < 20; ++i) {
    const Point2 x{r.uniform(0.05, 0.95), r.uniform(0.05, 0.95)};
    const Vec2 g = deterministic_u1_gradient(x);
    const double gx = (deterministic_u1({x.x1 + 1e-6, x.x2}) - deterministic_u1({x.x1 - 1e-6, x.x2})) / 2e-6;
    const double gy = (deterministic_u1({x.x1, x.x2 + 1e-6}) - deterministic_u1({x.x1, x.x2 - 1e-6})) / 2e-6;
    CHECK(g.x1 == doctest::Approx(gx).epsilon(1e-7).scale(1e-6));
    CHECK(g.x2 == doctest::Approx(gy).epsilon(1e-7).scale(1e-6));
    // Five-point Laplacian, O(h^2) = O(1e-6) relative.
    const double lap = (deterministic_u1({x.x1 + h, x.x2}) + deterministic_u1({x.x1 - h, x.x2}) +
                        deterministic_u1({x.x1, x.x2 + h}) + deterministic_u1({x.x1, x.x2 - h}) -
                        4 * deterministic_u1(x)) / (h * h);
    CHECK(deterministic_u1_forcing(x) == doctest::Approx(-lap).epsilon(1e-5).scale(1e-3));
    CHECK(deterministic_u1_forcing(x) == doctest::Approx(2 * kPi * kPi * u1_oracle(x)).epsilon(1e-12).scale(1e-14));
  }
}

TEST_CASE("trace data: consistent data vanishes; zero Neumann data gives -du1/dn") {
  const auto circ = make_circle({0.3, 0.4}, 0.15);
  const BoundaryCondition robin{2.0, 0.5, [](const Point2& x, const Vec2& n) {
                                  return 2.0 * deterministic_u1(x) + 0.5 * dot(deterministic_u1_gradient(x), n);
                                }};
  const BoundaryCondition z = trace_data(deterministic_u1, deterministic_u1_gradient, robin);
  CHECK(z.alpha == 2.0);
  CHECK(z.beta == 0.5);
  const BoundaryCondition ap = Example2Problem(Example2Setup{}).aperture_condition();
  CHECK(ap.kind() == BcKind::neumann);
  for (double t : {0.0, 0.3, 0.8}) {
    const Frame f = eval_frame(*circ, t);
    CHECK(std::abs(z.data(f.point, f.unit_normal)) < 1e-14);
    CHECK(ap.data(f.point, f.unit_normal) == doctest::Approx(-dot(deterministic_u1_gradient(f.point), f.unit_normal)));
  }
}

TEST_CASE("superposition: consistent aperture data gives u = u1") {
  const auto circ = make_circle({0.3, 0.4}, 0.15);
  const BoundaryCondition bc = trace_data(deterministic_u1, deterministic_u1_gradient,
                                          BoundaryCondition::neumann([](const Point2& x, const Vec2& n) {
                                            return dot(deterministic_u1_gradient(x), n);
                                          }));
  const RectangleKernel k(1, 1);
  auto b = std::make_shared<const DiscretizedBoundary>(DiscretizedBoundary::make(circ, 64, DomainSide::exterior));
  const DensitySolution d = solve_density(assemble_system(k, *b, bc), b);
  for (const Point2& x : {Point2{0.7, 0.7}, Point2{0.5, 0.2}, Point2{0.1, 0.9}})
    CHECK(std::abs(deterministic_u1(x) + eval_potential(k, d, x) - deterministic_u1(x)) < 1e-10);
}

TEST_CASE("mesh sizing helpers") {
  CHECK(fixed_node_count(5.0, 64) == 320);
  CHECK(fixed_node_count(5.0, 8) == 40);
  CHECK(fixed_node_count(5.0, 13) == 64);
  CHECK(fine_grid_size(512, 64) == 512);
  CHECK(fine_grid_size(512, 48) == 528);
  CHECK(fine_grid_size(512, 1024) == 1024);
  CHECK(fine_grid_size(10, 12) == 12);
  FunctionalSpec f;
  CHECK(f.contour_count(32) == 48);
  f.contour_points = 512;
  CHECK(f.contour_count(32) == 512);
  f.contour_points = 10;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f = FunctionalSpec{};
  f.offset = 0.0;
  CHECK_THROWS_AS(f.validate(), ConfigError);
}

TEST_CASE("point-in-curve test") {
  const auto circ = make_circle({0.3, 0.4}, 0.15);
  CHECK(inside_curve(*circ, {0.3, 0.4}));
  CHECK(inside_curve(*circ, {0.44, 0.4}));
  CHECK_FALSE(inside_curve(*circ, {0.46, 0.4}));
  CHECK_FALSE(inside_curve(*circ, {0.9, 0.9}));
}

TEST_CASE("functional of a constant field is the constant") {
  const auto circ = make_circle({0.3, 0.4}, 0.15);
  const FieldBatch c = [](const std::vector<Point2>& p) { return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p.size()), 0.42); };
  FunctionalSpec f;
  CHECK(functional_eval(f, circ, 32, c, {}) == 0.42);
  f.refine = true;
  CHECK(functional_eval(f, circ, 32, c, {}) == 0.42);
  f.kind = FunctionalSpec::Kind::point_value;
  CHECK(functional_eval(f, circ, 32, c, {}) == 0.42);
}

TEST_CASE("functional of a linear field: sup at the extreme contour point") {
  const auto circ = make_circle({0.3, 0.4}, 0.15);
  const FieldBatch lin = [](const std::vector<Point2>& p) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) v(static_cast<Eigen::Index>(i)) = p[i].x1;
    return v;
  };
  FunctionalSpec f;
  f.contour_points = 64;
  CHECK(functional_eval(f, circ, 8, lin, {}) == doctest::Approx(0.46).epsilon(1e-15));
  f.contour_points = 66;  // no node at the maximum
  CHECK(functional_eval(f, circ, 8, lin, {}) < 0.46);
  f.refine = true;
  CHECK(functional_eval(f, circ, 8, lin, {}) == doctest::Approx(0.46).epsilon(1e-14));
}

TEST_CASE("functional rejects contour points outside the domain or inside the aperture") {
  const FieldBatch zero = [](const std::vector<Point2>& p) { return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size())); };
  auto in_square = [](const Point2& p) { return p.x1 > 0 && p.x1 < 1 && p.x2 > 0 && p.x2 < 1; };
  const auto near_wall = make_circle({0.05, 0.5}, 0.045);
  CHECK_THROWS_AS(functional_eval(FunctionalSpec{}, near_wall, 32, zero, in_square), GeometryError);
  FunctionalSpec p;
  p.kind = FunctionalSpec::Kind::point_value;
  p.point = {0.3, 0.4};
  CHECK_THROWS_AS(functional_eval(p, make_circle({0.3, 0.4}, 0.15), 32, zero, in_square), GeometryError);
}

TEST_CASE("functional converges as the fixed contour is refined") {
  Example2Setup s;
  s.functional.contour_points = 256;
  s.functional.refine = true;
  const Example2Problem p256(s);
  s.functional.contour_points = 512;
  const Example2Problem p512(s);
  for (std::uint64_t i = 0; i < 3; ++i) {
    const auto ap = sample_aperture(s.model, RngStream::for_sample(1, 0, i));
    CHECK(std::abs(p256.functional(ap, 64) - p512.functional(ap, 64)) < 1e-6);
  }
}

TEST_CASE("200 realizations are finite with nonzero spread") {
  const Example2Problem p(Example2Setup{});
  std::vector<double> f;
  for (std::uint64_t i = 0; i < 200; ++i) {
    RngStream r = RngStream::for_sample(9, 0, i);
    const double v = p.evaluate(r, {16})[0];
    REQUIRE(std::isfinite(v));
    f.push_back(v);
  }
  const double var = sample_variance(f);
  CHECK(var > 0);
  // The functional sits near the size of u1 in the box around the aperture.
  CHECK(pairwise_sum(f) / 200 > 0.1);
  CHECK(pairwise_sum(f) / 200 < 1.0);
}

TEST_CASE("evaluate draws one realization for every resolution") {
  const Example2Problem p(Example2Setup{});
  RngStream a = RngStream::for_sample(2, 1, 4);
  const std::vector<double> both = p.evaluate(a, {32, 16});
  RngStream b = RngStream::for_sample(2, 1, 4);
  const std::vector<double> fine = p.evaluate(b, {32});
  CHECK(both[0] == fine[0]);
  const auto ap = sample_aperture(p.setup().model, RngStream::for_sample(2, 1, 4));
  CHECK(both[1] == p.functional(ap, 16));
}

TEST_CASE("kernel paths agree on one realization") {
  const auto model = RandomApertureModel::example2();
  const auto ap = sample_aperture(model, RngStream::for_sample(1, 0, 0));
  const Example2Problem a(setup_with(KernelChoice::analytical));
  const Example2Problem n(setup_with(KernelChoice::numerical));
  const Example2Problem s(setup_with(KernelChoice::fundamental_schur));
  const double fa = a.functional(ap, 64), fn = n.functional(ap, 64), fs = s.functional(ap, 64);
  const double est = std::max({std::abs(fa - a.functional(ap, 32)), std::abs(fn - n.functional(ap, 32)),
                               std::abs(fs - s.functional(ap, 32))});
  CHECK(std::abs(fa - fn) <= 5 * est);
  CHECK(std::abs(fa - fs) <= 5 * est);
  // Numerical kernel and Schur complement are the same discrete operator.
  CHECK(std::abs(fn - fs) < 1e-9);
}

TEST_CASE("cost models are ordered by kernel") {
  const Example2Problem a(setup_with(KernelChoice::analytical));
  const Example2Problem n(setup_with(KernelChoice::numerical));
  const Example2Problem s(setup_with(KernelChoice::fundamental_schur));
  for (int n2 : {8, 64, 256}) {
    const double n1 = fixed_node_count(5.0, n2), nt = n1 + n2;
    CHECK(a.cost_model(n2) == doctest::Approx(std::pow(n2, 3) + std::pow(n2, 2)));
    CHECK(n.cost_model(n2) == doctest::Approx(std::pow(n2, 3) + n1 * n2 * nt + std::pow(n2, 2)));
    CHECK(s.cost_model(n2) == doctest::Approx(std::pow(n2, 3) + n1 * n2 * nt + std::pow(n2, 2) + n1 * n2 + nt));
    CHECK(a.cost_model(n2) < n.cost_model(n2));
    CHECK(n.cost_model(n2) < s.cost_model(n2));
  }
}

TEST_CASE("example 1: rates follow the formula and the first row has none") {
  Example1Setup s;
  s.meshes = {8, 16, 32};
  const auto rows = run_example1(s);
  REQUIRE(rows.size() == 3);
  CHECK(std::isnan(rows[0].mu_rate));
  CHECK(std::isnan(rows[0].u_rate));
  for (int i = 1; i < 3; ++i) {
    const double hp = 1.0 / rows[i - 1].n2, h = 1.0 / rows[i].n2;
    CHECK(rows[i].u_rate == std::log(rows[i].u_error / rows[i - 1].u_error) / std::log(h / hp));
    CHECK(rows[i].mu_rate == convergence_rate(rows[i - 1].mu_error, rows[i].mu_error, hp, h));
    CHECK(rows[i].h1_rate == convergence_rate(rows[i - 1].h1_error, rows[i].h1_error, hp, h));
    CHECK(rows[i].u_error < rows[i - 1].u_error);
  }
  CHECK(rows[2].n2 == 32);
  CHECK(rows[2].n1 == 0);  // no fixed-boundary unknowns with the analytical kernel
  CHECK(convergence_rate(4e-4, 1e-4, 0.1, 0.05) == doctest::Approx(2.0));
  const std::string csv = example1_csv(rows);
  CHECK(csv.rfind("N1,N2,mu_error,mu_rate,u_error,u_rate,h1_error,h1_rate,assembly_seconds,solve_seconds\n", 0) == 0);
  CHECK(count_lines(csv) == 4);
  s.meshes = {8};
  CHECK_THROWS_AS(run_example1(s), ConfigError);
}

TEST_CASE("example 1: kernel paths give near-identical errors") {
  Example1Setup s;
  s.meshes = {16, 32};
  const auto a = run_example1(s);
  s.kernel = KernelChoice::numerical;
  const auto n = run_example1(s);
  s.kernel = KernelChoice::fundamental_schur;
  const auto f = run_example1(s);
  CHECK(n[1].u_error == doctest::Approx(a[1].u_error).epsilon(0.1));
  CHECK(f[1].u_error == doctest::Approx(n[1].u_error).epsilon(1e-6));
}

TEST_CASE("cost breakdown trends") {
  Example1Setup s;
  s.meshes = {32, 64, 128};
  const auto a = cost_breakdown(s);
  s.kernel = KernelChoice::numerical;
  const auto n = cost_breakdown(s);
  s.kernel = KernelChoice::fundamental_schur;
  const auto f = cost_breakdown(s);
  REQUIRE(a.size() == 3);
  // Analytical: solve share grows with N.
  CHECK(a[2].solve_seconds / a[2].assembly_seconds > a[0].solve_seconds / a[0].assembly_seconds);
  // Numerical: assembly grows at least like N^2.5 once N1 N2 N dominates.
  CHECK(std::log2(n[2].assembly_seconds / n[1].assembly_seconds) >= 2.5);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(f[i].assembly_seconds + f[i].solve_seconds > a[i].assembly_seconds + a[i].solve_seconds);
  CHECK(count_lines(cost_csv(a)) == 4);
}

TEST_CASE("Green's function grids") {
  const GreensGrid sq = greens_grid("square", {0.3, 0.4}, 33);
  REQUIRE(sq.values.rows() == 33);
  for (int i = 0; i < 33; ++i) {
    CHECK(std::abs(sq.values(0, i)) <= 1e-8);
    CHECK(std::abs(sq.values(32, i)) <= 1e-8);
    CHECK(std::abs(sq.values(i, 0)) <= 1e-8);
    CHECK(std::abs(sq.values(i, 32)) <= 1e-8);
  }
  const GreensGrid d = greens_grid("disk", {0.2, 0.1}, 21);
  CHECK(std::isnan(d.values(0, 0)));
  CHECK(std::abs(d.values(10, 0)) <= 1e-8);  // (-1, 0) on the circle
  CHECK(d.values(10, 10) == doctest::Approx(disk_green(1.0, {0, 0}, {0.2, 0.1})));
  const GreensGrid hp = greens_grid("halfplane", {0.0, 0.5}, 11);
  for (int i = 0; i < 11; ++i) CHECK(std::abs(hp.values(0, i)) <= 1e-8);
  const GreensGrid hit = greens_grid("square", {0.5, 0.5}, 3);
  CHECK(std::isinf(hit.values(1, 1)));
  CHECK_THROWS_AS(greens_grid("square", {1.5, 0.5}, 8), ConfigError);
  CHECK_THROWS_AS(greens_grid("torus", {0.5, 0.5}, 8), ConfigError);
  CHECK(count_lines(greens_csv(sq)) == 33);
}

TEST_CASE("CSV number format round-trips") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  const double x = 1.0 / 3.0;
  CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("example 2 report: shared pilot, one run per eps") {
  Example2Setup s;
  MlmcConfig cfg;
  cfg.pilot_levels = 3;
  cfg.pilot_samples = 8;
  cfg.seed = 5;
  const Example2Report r = run_example2(s, {2e-2, 1e-2}, cfg);
  REQUIRE(r.runs.size() == 2);
  CHECK(r.pilot.levels.size() == 4u);
  for (const auto& run : r.runs) {
    CHECK(run.pilot.size() == 4u);
    CHECK(run.pilot[1].variance == r.pilot.levels[1].variance);
    CHECK(std::isfinite(run.estimate));
  }
  CHECK(std::isfinite(r.cost_slope_model));
  const std::string lv = level_stats_csv(r.runs[1].levels, &r.runs[1].samples);
  CHECK(count_lines(lv) == 1 + static_cast<int>(r.runs[1].levels.size()));
  CHECK(count_lines(eps_cost_csv(r)) == 3);
}
