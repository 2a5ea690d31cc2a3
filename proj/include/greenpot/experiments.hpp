#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "greenpot/bie.hpp"
#include "greenpot/boundary.hpp"
#include "greenpot/geometry.hpp"
#include "greenpot/kernels.hpp"
#include "greenpot/mlmc.hpp"

namespace greenpot {

enum class KernelChoice { analytical, numerical, fundamental_schur };

std::string to_string(KernelChoice k);
/// Accepts "analytical", "numerical", "schur" and "fundamental_schur". Throws ConfigError.
KernelChoice parse_kernel_choice(const std::string& s);

/// Closed-form field in the unit square without the aperture; vanishes on its sides.
double deterministic_u1(const Point2& x);
Vec2 deterministic_u1_gradient(const Point2& x);
/// -Laplacian of deterministic_u1.
double deterministic_u1_forcing(const Point2& x);

using ScalarField = std::function<double(const Point2&)>;
using VectorField = std::function<Vec2(const Point2&)>;

/// Condition for u2 = u - u1: same alpha, beta; data b - alpha u1 - beta du1/dn.
BoundaryCondition trace_data(ScalarField u1, VectorField grad_u1, const BoundaryCondition& bc);

struct FunctionalSpec {
  enum class Kind { sup_on_offset_contour, point_value };
  Kind kind = Kind::sup_on_offset_contour;
  double offset = 0.01;
  /// Fixed number of contour points; 0 ties the count to the aperture mesh.
  int contour_points = 0;
  /// Contour points per aperture node when contour_points == 0.
  double points_per_node = 1.5;
  /// Golden-section refinement of the discrete maximum along the contour.
  bool refine = false;
  Point2 point{0.5, 0.5};

  void validate() const;
  int contour_count(int aperture_nodes) const;
};

/// Batch field evaluation u(points).
using FieldBatch = std::function<Eigen::VectorXd(const std::vector<Point2>&)>;

/// Sup over the offset contour (or the point value) of the field. Throws
/// GeometryError when a contour point leaves the domain or enters the aperture.
double functional_eval(const FunctionalSpec& spec, const CurvePtr& aperture, int aperture_nodes,
                       const FieldBatch& u, const std::function<bool(const Point2&)>& in_domain);

/// Point-in-polygon test against the curve sampled at `samples` nodes.
bool inside_curve(const ClosedCurve& curve, const Point2& p, int samples = 1024);
std::vector<Point2> curve_polygon(const ClosedCurve& curve, int samples);
bool inside_polygon(const std::vector<Point2>& poly, const Point2& p);

/// Fixed-boundary node count paired with N2 aperture nodes: 4 round(ratio N2 / 4).
int fixed_node_count(double ratio, int n2);

/// Smallest multiple of n that is >= max(requested, n).
int fine_grid_size(int requested, int n);

// ---------------------------------------------------------------------------
// Example 2: random aperture in the unit square, u = 0 on the square, zero
// normal derivative on the aperture, u = u1 + u2.

struct Example2Setup {
  RandomApertureModel model = RandomApertureModel::example2();
  KernelChoice kernel = KernelChoice::analytical;
  FunctionalSpec functional;
  double fixed_ratio = 5.0;
  int fine_nodes = 512;

  void validate() const;
};

class Example2Problem final : public LevelProblem {
 public:
  explicit Example2Problem(Example2Setup setup);

  std::vector<double> evaluate(RngStream& rng, const std::vector<int>& nodes) const override;
  double cost_model(int nodes) const override;

  const Example2Setup& setup() const { return setup_; }

  /// u = u1 + u2 at `points` for one aperture at N2 nodes.
  FieldBatch solve(const CurvePtr& aperture, int n2) const;
  double functional(const CurvePtr& aperture, int n2) const;

  /// Cached fixed-boundary kernel for N2 (also supplies the Schur G11 factorization).
  std::shared_ptr<const NumericalGreenKernel> numerical_kernel(int n2) const;
  const RectangleKernel& analytical_kernel() const { return *rect_; }
  BoundaryCondition aperture_condition() const;

 private:
  Example2Setup setup_;
  std::shared_ptr<const RectangleKernel> rect_;
  mutable std::mutex mutex_;
  mutable std::map<int, std::shared_ptr<const NumericalGreenKernel>> cache_;
};

// ---------------------------------------------------------------------------
// Example 1: deterministic aperture, u = G(., source) of the unit square,
// Dirichlet data on the aperture; errors against the exact field.

struct Example1Setup {
  KernelChoice kernel = KernelChoice::analytical;
  std::vector<int> meshes{8, 16, 32, 64, 128, 256};
  double fixed_ratio = 5.0;
  Point2 center{0.3, 0.4};
  double semi_x = 0.15;
  double semi_y = 0.10;
  /// Error region: normal offsets [inner, outer] from the aperture.
  double annulus_inner = 0.05;
  double annulus_outer = 0.10;
  int annulus_angular = 128;
  int fine_nodes = 1024;

  void validate() const;
  CurvePtr aperture() const;
};

struct ConvergenceRow {
  int n1 = 0;
  int n2 = 0;
  double mu_error = 0.0, mu_rate = 0.0;
  double u_error = 0.0, u_rate = 0.0;
  double h1_error = 0.0, h1_rate = 0.0;
  double assembly_seconds = 0.0, solve_seconds = 0.0;
};

/// log(e/e_prev) / log(h/h_prev).
double convergence_rate(double e_prev, double e, double h_prev, double h);

/// One row per mesh; the first row's rates are NaN. Throws ConfigError with fewer than 2 meshes.
std::vector<ConvergenceRow> run_example1(const Example1Setup& setup);

struct CostRow {
  int n1 = 0;
  int n2 = 0;
  double assembly_seconds = 0.0;
  double solve_seconds = 0.0;
};

/// Wall-clock assembly and solve time per mesh on the Example-1 geometry.
std::vector<CostRow> cost_breakdown(const Example1Setup& setup);

struct Example2Report {
  KernelChoice kernel = KernelChoice::analytical;
  PilotResult pilot;
  RateFit rates;
  std::vector<double> eps;
  std::vector<MlmcResult> runs;
  // d log(total cost) / d log(eps) over the runs; NaN with fewer than 2 eps values.
  double cost_slope_seconds = 0.0;
  double cost_slope_model = 0.0;
};

/// Table-3 rates from a pilot over levels 0..pilot_levels and one MLMC run per eps.
Example2Report run_example2(const Example2Setup& setup, const std::vector<double>& eps,
                            const MlmcConfig& config);

/// Green's function values on a grid x grid lattice; "square" spans the unit
/// square, "disk" spans [-1,1]^2 around the unit disk (NaN outside), and
/// "halfplane" spans [-1,1]x[0,2]. Row j holds x2 = const. The source node, if hit, is +inf.
struct GreensGrid {
  std::vector<double> x1, x2;
  Eigen::MatrixXd values;  // values(j, i) at (x1[i], x2[j])
};
GreensGrid greens_grid(const std::string& geometry, const Point2& source, int grid);

// CSV emitters; every number printed with 17 significant digits.
std::string format_double(double v);
std::string example1_csv(const std::vector<ConvergenceRow>& rows);
std::string cost_csv(const std::vector<CostRow>& rows);
std::string level_stats_csv(const std::vector<LevelStats>& levels,
                            const std::vector<long>* allocated = nullptr);
std::string eps_cost_csv(const Example2Report& report);
std::string greens_csv(const GreensGrid& g);

}  // namespace greenpot
