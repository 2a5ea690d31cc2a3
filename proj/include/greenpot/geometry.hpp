#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "greenpot/errors.hpp"
#include "greenpot/rng.hpp"

namespace greenpot {

struct Vec2 {
  double x1 = 0.0;
  double x2 = 0.0;

  constexpr Vec2 operator+(const Vec2& o) const { return {x1 + o.x1, x2 + o.x2}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x1 - o.x1, x2 - o.x2}; }
  constexpr Vec2 operator*(double s) const { return {x1 * s, x2 * s}; }
  constexpr Vec2 operator/(double s) const { return {x1 / s, x2 / s}; }
  constexpr Vec2 operator-() const { return {-x1, -x2}; }
  Vec2& operator+=(const Vec2& o) {
    x1 += o.x1;
    x2 += o.x2;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;
};

/// Points and displacement vectors share one representation.
using Point2 = Vec2;

constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }
constexpr double dot(const Vec2& a, const Vec2& b) { return a.x1 * b.x1 + a.x2 * b.x2; }
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x1 * b.x2 - a.x2 * b.x1; }
inline double norm(const Vec2& v) { return std::hypot(v.x1, v.x2); }
inline double distance(const Point2& a, const Point2& b) { return norm(a - b); }

enum class Orientation { counterclockwise, clockwise };

/// Local geometry of a curve at one parameter value.
struct Frame {
  Point2 point;
  double speed = 0.0;  // |eta'(t)|
  Vec2 unit_normal;    // outward w.r.t. the region enclosed by the curve
  double curvature = 0.0;  // positive where the enclosed region is convex
};

/// Smooth 1-periodic parameterization t in [0,1) of a closed contour.
///
/// Implementations are immutable and may be shared across threads.
class ClosedCurve {
 public:
  virtual ~ClosedCurve() = default;

  virtual Point2 eval(double t) const = 0;
  virtual Vec2 deriv(double t) const = 0;
  virtual Vec2 second_deriv(double t) const = 0;
  virtual Vec2 third_deriv(double t) const = 0;
  virtual Orientation orientation() const { return Orientation::counterclockwise; }

  /// False for contours with corners; Neumann collocation at nodes is then rejected.
  virtual bool is_smooth() const { return true; }
};

using CurvePtr = std::shared_ptr<const ClosedCurve>;

/// Throws GeometryError when |eta'(t)| < 1e-12.
Frame eval_frame(const ClosedCurve& curve, double t);

/// Derivative of the signed curvature with respect to t.
double curvature_derivative(const ClosedCurve& curve, double t);

/// Star-shaped curve c + R(theta)(cos theta, sin theta), theta = 2 pi t, with a
/// trigonometric polynomial radius R = r0 + sum_n (a_n cos n theta + b_n sin n theta).
class RadialFourierCurve final : public ClosedCurve {
 public:
  RadialFourierCurve(Point2 center, double mean_radius, std::vector<double> cos_coeffs = {},
                     std::vector<double> sin_coeffs = {});

  Point2 eval(double t) const override;
  Vec2 deriv(double t) const override;
  Vec2 second_deriv(double t) const override;
  Vec2 third_deriv(double t) const override;

  /// R and its first three derivatives with respect to theta.
  std::array<double, 4> radius_derivs(double theta) const;
  double radius(double t) const { return radius_derivs(2.0 * M_PI * t)[0]; }
  const Point2& center() const { return center_; }
  double mean_radius() const { return mean_radius_; }

 private:
  Point2 center_;
  double mean_radius_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

CurvePtr make_circle(Point2 center, double radius);

class Ellipse final : public ClosedCurve {
 public:
  Ellipse(Point2 center, double semi_x, double semi_y);
  Point2 eval(double t) const override;
  Vec2 deriv(double t) const override;
  Vec2 second_deriv(double t) const override;
  Vec2 third_deriv(double t) const override;

 private:
  Point2 center_;
  double ax_;
  double ay_;
};

/// Axis-aligned rectangle [0,a]x[0,b], counterclockwise from the origin, each
/// side taking a quarter of the parameter period so that corners sit at
/// t = 0, 1/4, 1/2, 3/4. The derivative at a corner is that of the side it starts.
class RectangleCurve final : public ClosedCurve {
 public:
  RectangleCurve(double a, double b);
  Point2 eval(double t) const override;
  Vec2 deriv(double t) const override;
  Vec2 second_deriv(double t) const override;
  Vec2 third_deriv(double t) const override;
  bool is_smooth() const override { return false; }
  double width() const { return a_; }
  double height() const { return b_; }

 private:
  double a_;
  double b_;
};

/// Parallel curve t -> eta(t) + d * n(t).
class OffsetCurve final : public ClosedCurve {
 public:
  OffsetCurve(CurvePtr base, double d);
  Point2 eval(double t) const override;
  Vec2 deriv(double t) const override;
  Vec2 second_deriv(double t) const override;
  /// Centered difference of second_deriv; the base curve's fourth derivative is not available.
  Vec2 third_deriv(double t) const override;
  Orientation orientation() const override { return base_->orientation(); }
  const ClosedCurve& base() const { return *base_; }
  double offset() const { return d_; }

 private:
  CurvePtr base_;
  double d_;
};

/// Outward parallel contour at distance d. Throws GeometryError when 1 + d*kappa <= 0
/// at any of the 1024 check nodes (the offset would fold over itself).
CurvePtr offset_contour(CurvePtr curve, double d);

/// Random aperture: center = mean_center + (sigma_x U(-1,1), sigma_y U(-1,1)),
/// R(t) = mean_radius + sigma_r sum_{n=1}^{modes} n^{-mode_decay} (a_n cos 2 pi n t + b_n sin 2 pi n t)
/// with a_n, b_n ~ U(-sqrt 3, sqrt 3).
struct RandomApertureModel {
  Point2 mean_center{0.3, 0.4};
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  double mean_radius = 0.15;
  double sigma_r = 0.0;
  int modes = 0;
  double mode_decay = 0.0;

  /// Throws std::invalid_argument unless the radius is provably positive:
  /// mean_radius - sigma_r * 2 sqrt(3) * sum n^{-mode_decay} > 0.
  void validate() const;

  /// Worst-case radius perturbation sigma_r * 2 sqrt(3) * sum n^{-mode_decay}.
  double radius_perturbation_bound() const;

  /// Parameters used for the random-aperture study.
  static RandomApertureModel example2();
};

/// Draws one realization. Consumes 2 + 2*modes uniforms from a copy of rng, in
/// the order center x, center y, a_1..a_s, b_1..b_s.
std::shared_ptr<const RadialFourierCurve> sample_aperture(const RandomApertureModel& model,
                                                          RngStream rng);

}  // namespace greenpot
