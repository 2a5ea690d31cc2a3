#pragma once

#include <functional>
#include <vector>

#include "greenpot/geometry.hpp"

namespace greenpot {

enum class BcKind { dirichlet, neumann, robin };

/// alpha u + beta du/dn = rhs, with n the curve's outward normal (eval_frame convention).
struct BoundaryCondition {
  double alpha = 1.0;
  double beta = 0.0;
  /// Boundary data b(x, n). An empty function means b = 0.
  std::function<double(const Point2&, const Vec2&)> rhs;

  BcKind kind() const;
  /// Throws std::invalid_argument when alpha = beta = 0.
  void validate() const;
  double data(const Point2& x, const Vec2& n) const { return rhs ? rhs(x, n) : 0.0; }

  static BoundaryCondition dirichlet(std::function<double(const Point2&, const Vec2&)> g = {});
  static BoundaryCondition neumann(std::function<double(const Point2&, const Vec2&)> g = {});
};

/// Which side of the curve the solution domain occupies.
enum class DomainSide {
  exterior,  // aperture: the domain lies outside the enclosed region
  interior,  // fixed outer boundary: the domain is the enclosed region
};

/// Collocation offset for first-kind rows, in units of h.
inline constexpr double kQualocationOffset = 1.0 / 6.0;

/// Equispaced parameter nodes t_k = k/N on one closed curve.
struct DiscretizedBoundary {
  CurvePtr curve;
  int n = 0;
  double h = 0.0;
  DomainSide side = DomainSide::exterior;
  std::vector<Frame> nodes;

  /// Throws GeometryError for N < 4 or a zero-speed node.
  static DiscretizedBoundary make(CurvePtr curve, int n, DomainSide side);

  /// Coefficient of mu/|eta'| in the one-sided normal derivative of the
  /// single layer: -1/2 when the normal points into the domain, +1/2 otherwise.
  double jump_coefficient() const { return side == DomainSide::exterior ? -0.5 : 0.5; }

  std::vector<Point2> node_points() const;
  /// Row collocation parameter for the given condition kind.
  double collocation_parameter(int row, BcKind kind) const;
};

}  // namespace greenpot
