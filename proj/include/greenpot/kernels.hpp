#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "greenpot/boundary.hpp"
#include "greenpot/geometry.hpp"

namespace greenpot {

inline constexpr double kInvTwoPi = 0.15915494309189533577;

/// -(1/2pi) ln|x - xi|. Throws KernelError at x = xi.
double fundamental_value(const Point2& x, const Point2& xi);
/// Gradient in x of fundamental_value.
Vec2 fundamental_gradient(const Point2& x, const Point2& xi);

/// Dirichlet Green's function of the upper half-plane x2 > 0.
double halfplane_green(const Point2& x, const Point2& xi);
/// Dirichlet Green's function of the disk |x| < a.
double disk_green(double a, const Point2& x, const Point2& xi);
/// Dirichlet Green's function of (0,a)x(0,b) with an M-term correction series.
double rectangle_green(double a, double b, int m, const Point2& x, const Point2& xi);
/// Smallest M >= 1 whose series remainder bound is <= tol.
int rectangle_truncation_for_tol(double a, double b, double tol);
/// Remainder bound (b/2pi) sum_{n>M} q^n/n with q = exp(-pi a/b).
double rectangle_remainder_bound(double a, double b, int m);

/// Sources preprocessed once and reused across several regular_block calls.
struct PreparedSources {
  std::vector<Point2> points;
  std::shared_ptr<const void> data;
};

/// G(x, xi) = fundamental(x, xi) + psi(x, xi) with psi smooth in the domain.
///
/// Derivatives are always taken in the field point x. Implementations are
/// immutable; every method is safe to call concurrently.
class Kernel {
 public:
  virtual ~Kernel() = default;
  virtual std::string name() const = 0;

  /// False only for the bare fundamental solution.
  virtual bool has_regular_part() const { return true; }
  /// Throws KernelError when p lies outside the (closed) domain of definition.
  virtual void check_domain(const Point2& p) const { (void)p; }

  virtual double regular_value(const Point2& x, const Point2& xi) const = 0;
  virtual Vec2 regular_gradient(const Point2& x, const Point2& xi) const = 0;

  virtual PreparedSources prepare(const std::vector<Point2>& sources) const;
  /// (i,j) entry: psi(targets[i], sources[j]) when dirs is null, otherwise
  /// dirs[i] . grad_x psi(targets[i], sources[j]).
  virtual Eigen::MatrixXd regular_block(const std::vector<Point2>& targets,
                                        const std::vector<Vec2>* dirs,
                                        const PreparedSources& sources) const;

  double value(const Point2& x, const Point2& xi) const;
  Vec2 gradient(const Point2& x, const Point2& xi) const;
  double normal_deriv(const Point2& x, const Vec2& n, const Point2& xi) const {
    return dot(gradient(x, xi), n);
  }
};

using KernelPtr = std::shared_ptr<const Kernel>;

class FundamentalKernel final : public Kernel {
 public:
  std::string name() const override { return "fundamental"; }
  bool has_regular_part() const override { return false; }
  double regular_value(const Point2&, const Point2&) const override { return 0.0; }
  Vec2 regular_gradient(const Point2&, const Point2&) const override { return {}; }
  Eigen::MatrixXd regular_block(const std::vector<Point2>& targets, const std::vector<Vec2>* dirs,
                                const PreparedSources& sources) const override;
};

class HalfPlaneKernel final : public Kernel {
 public:
  std::string name() const override { return "halfplane"; }
  void check_domain(const Point2& p) const override;
  double regular_value(const Point2& x, const Point2& xi) const override;
  Vec2 regular_gradient(const Point2& x, const Point2& xi) const override;
};

class DiskKernel final : public Kernel {
 public:
  explicit DiskKernel(double radius, Point2 center = {0.0, 0.0});
  std::string name() const override { return "disk"; }
  void check_domain(const Point2& p) const override;
  double regular_value(const Point2& x, const Point2& xi) const override;
  Vec2 regular_gradient(const Point2& x, const Point2& xi) const override;
  double radius() const { return a_; }

 private:
  double a_;
  Point2 c_;
};

/// Rectangle (0,a)x(0,b) in the rapidly convergent image-sum form.
class RectangleKernel final : public Kernel {
 public:
  /// m <= 0 selects rectangle_truncation_for_tol(a, b, 1e-12).
  RectangleKernel(double a, double b, int m = 0);
  std::string name() const override { return "rectangle"; }
  void check_domain(const Point2& p) const override;
  double regular_value(const Point2& x, const Point2& xi) const override;
  Vec2 regular_gradient(const Point2& x, const Point2& xi) const override;
  PreparedSources prepare(const std::vector<Point2>& sources) const override;
  Eigen::MatrixXd regular_block(const std::vector<Point2>& targets, const std::vector<Vec2>* dirs,
                                const PreparedSources& sources) const override;

  double width() const { return a_; }
  double height() const { return b_; }
  int terms() const { return m_; }

 private:
  double a_, b_;
  int m_;
  double p_;  // pi / b
};

/// Regular part represented as a fundamental-solution single layer on the
/// fixed boundary; its density solves the fixed-boundary system with the
/// negated condition trace of the fundamental solution as data.
class NumericalGreenKernel final : public Kernel {
 public:
  NumericalGreenKernel(std::vector<DiscretizedBoundary> fixed, BoundaryCondition bc);
  std::string name() const override { return "numerical"; }
  double regular_value(const Point2& x, const Point2& xi) const override;
  Vec2 regular_gradient(const Point2& x, const Point2& xi) const override;
  PreparedSources prepare(const std::vector<Point2>& sources) const override;
  Eigen::MatrixXd regular_block(const std::vector<Point2>& targets, const std::vector<Vec2>* dirs,
                                const PreparedSources& sources) const override;

  const std::vector<DiscretizedBoundary>& fixed_boundaries() const { return fixed_; }
  const BoundaryCondition& condition() const { return bc_; }
  int unknowns() const { return static_cast<int>(nodes_.size()); }
  const Eigen::MatrixXd& g11() const { return g11_; }
  const Eigen::PartialPivLU<Eigen::MatrixXd>& g11_lu() const { return lu_; }
  double rcond() const { return rcond_; }

  /// Column j: g(xi_j), the fixed-boundary rows applied to -fundamental(., xi_j).
  Eigen::MatrixXd trace_rhs(const std::vector<Point2>& sources) const;
  /// Column j: density mu^psi(xi_j) on the fixed nodes.
  Eigen::MatrixXd densities(const std::vector<Point2>& sources) const;
  /// (i,k) entry: w_k fundamental(targets[i], y_k) or its derivative along dirs[i].
  Eigen::MatrixXd layer_matrix(const std::vector<Point2>& targets,
                               const std::vector<Vec2>* dirs) const;

 private:
  std::vector<DiscretizedBoundary> fixed_;
  BoundaryCondition bc_;
  std::vector<Point2> nodes_;
  std::vector<double> weights_;
  // Per fixed-boundary row: collocation point and normal.
  std::vector<Point2> row_points_;
  std::vector<Vec2> row_normals_;
  Eigen::MatrixXd g11_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  double rcond_ = 0.0;
};

/// Factorizes the fixed-boundary fundamental-solution block. Throws SolverError
/// when it is numerically singular (unit conformal radius for Dirichlet data).
std::shared_ptr<const NumericalGreenKernel> build_numerical_green(
    const std::vector<CurvePtr>& fixed_curves, const BoundaryCondition& bc,
    const std::vector<int>& node_counts);

double kernel_normal_derivative(const Kernel& kernel, const Point2& x, const Vec2& n,
                                const Point2& xi);

}  // namespace greenpot
