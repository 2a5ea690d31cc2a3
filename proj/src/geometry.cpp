#include "greenpot/geometry.hpp"

#include <algorithm>
#include <cstdio>

namespace greenpot {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kMinSpeed = 1e-12;
constexpr int kCheckNodes = 1024;

// Sign that turns cross(eta', eta'') into curvature positive for convex regions.
double orientation_sign(const ClosedCurve& c) {
  return c.orientation() == Orientation::counterclockwise ? 1.0 : -1.0;
}

double wrap01(double t) {
  double r = t - std::floor(t);
  return r >= 1.0 ? 0.0 : r;
}

}  // namespace

Frame eval_frame(const ClosedCurve& curve, double t) {
  const Vec2 d1 = curve.deriv(t);
  const double speed = norm(d1);
  if (!(speed >= kMinSpeed)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "degenerate curve speed %.3g at t=%.17g", speed, t);
    throw GeometryError(buf);
  }
  const Vec2 d2 = curve.second_deriv(t);
  const double s = orientation_sign(curve);
  Frame f;
  f.point = curve.eval(t);
  f.speed = speed;
  // Rotating the tangent by -90 degrees points away from a counterclockwise interior.
  f.unit_normal = Vec2{d1.x2, -d1.x1} * (s / speed);
  f.curvature = s * cross(d1, d2) / (speed * speed * speed);
  return f;
}

double curvature_derivative(const ClosedCurve& curve, double t) {
  const Vec2 d1 = curve.deriv(t);
  const Vec2 d2 = curve.second_deriv(t);
  const Vec2 d3 = curve.third_deriv(t);
  const double sp2 = dot(d1, d1);
  const double sp = std::sqrt(sp2);
  const double s = orientation_sign(curve);
  return s * (cross(d1, d3) / (sp2 * sp) - 3.0 * cross(d1, d2) * dot(d1, d2) / (sp2 * sp2 * sp));
}

// ---------------------------------------------------------------------------

RadialFourierCurve::RadialFourierCurve(Point2 center, double mean_radius,
                                       std::vector<double> cos_coeffs,
                                       std::vector<double> sin_coeffs)
    : center_(center), mean_radius_(mean_radius), cos_(std::move(cos_coeffs)),
      sin_(std::move(sin_coeffs)) {
  if (cos_.size() < sin_.size()) cos_.resize(sin_.size(), 0.0);
  if (sin_.size() < cos_.size()) sin_.resize(cos_.size(), 0.0);
  if (!(mean_radius > 0.0)) throw GeometryError("radial curve needs a positive mean radius");
}

std::array<double, 4> RadialFourierCurve::radius_derivs(double theta) const {
  std::array<double, 4> r{mean_radius_, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < cos_.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double c = std::cos(n * theta);
    const double s = std::sin(n * theta);
    const double even = cos_[i] * c + sin_[i] * s;
    const double odd = -cos_[i] * s + sin_[i] * c;
    r[0] += even;
    r[1] += n * odd;
    r[2] -= n * n * even;
    r[3] -= n * n * n * odd;
  }
  return r;
}

Point2 RadialFourierCurve::eval(double t) const {
  const double th = kTwoPi * t;
  const double r = radius_derivs(th)[0];
  return {center_.x1 + r * std::cos(th), center_.x2 + r * std::sin(th)};
}

Vec2 RadialFourierCurve::deriv(double t) const {
  const double th = kTwoPi * t;
  const auto r = radius_derivs(th);
  const Vec2 e{std::cos(th), std::sin(th)};
  const Vec2 ep{-e.x2, e.x1};
  return (e * r[1] + ep * r[0]) * kTwoPi;
}

Vec2 RadialFourierCurve::second_deriv(double t) const {
  const double th = kTwoPi * t;
  const auto r = radius_derivs(th);
  const Vec2 e{std::cos(th), std::sin(th)};
  const Vec2 ep{-e.x2, e.x1};
  return (e * (r[2] - r[0]) + ep * (2.0 * r[1])) * (kTwoPi * kTwoPi);
}

Vec2 RadialFourierCurve::third_deriv(double t) const {
  const double th = kTwoPi * t;
  const auto r = radius_derivs(th);
  const Vec2 e{std::cos(th), std::sin(th)};
  const Vec2 ep{-e.x2, e.x1};
  return (e * (r[3] - 3.0 * r[1]) + ep * (3.0 * r[2] - r[0])) * (kTwoPi * kTwoPi * kTwoPi);
}

CurvePtr make_circle(Point2 center, double radius) {
  return std::make_shared<RadialFourierCurve>(center, radius);
}

// ---------------------------------------------------------------------------

Ellipse::Ellipse(Point2 center, double semi_x, double semi_y)
    : center_(center), ax_(semi_x), ay_(semi_y) {
  if (!(semi_x > 0.0 && semi_y > 0.0)) throw GeometryError("ellipse semi-axes must be positive");
}

Point2 Ellipse::eval(double t) const {
  const double th = kTwoPi * t;
  return {center_.x1 + ax_ * std::cos(th), center_.x2 + ay_ * std::sin(th)};
}

Vec2 Ellipse::deriv(double t) const {
  const double th = kTwoPi * t;
  return Vec2{-ax_ * std::sin(th), ay_ * std::cos(th)} * kTwoPi;
}

Vec2 Ellipse::second_deriv(double t) const {
  const double th = kTwoPi * t;
  return Vec2{-ax_ * std::cos(th), -ay_ * std::sin(th)} * (kTwoPi * kTwoPi);
}

Vec2 Ellipse::third_deriv(double t) const {
  const double th = kTwoPi * t;
  return Vec2{ax_ * std::sin(th), -ay_ * std::cos(th)} * (kTwoPi * kTwoPi * kTwoPi);
}

// ---------------------------------------------------------------------------

RectangleCurve::RectangleCurve(double a, double b) : a_(a), b_(b) {
  if (!(a > 0.0 && b > 0.0)) throw GeometryError("rectangle sides must be positive");
}

Point2 RectangleCurve::eval(double t) const {
  const double u = 4.0 * wrap01(t);
  const int side = std::min(3, static_cast<int>(u));
  const double s = u - side;
  switch (side) {
    case 0: return {a_ * s, 0.0};
    case 1: return {a_, b_ * s};
    case 2: return {a_ * (1.0 - s), b_};
    default: return {0.0, b_ * (1.0 - s)};
  }
}

Vec2 RectangleCurve::deriv(double t) const {
  const double u = 4.0 * wrap01(t);
  const int side = std::min(3, static_cast<int>(u));
  switch (side) {
    case 0: return {4.0 * a_, 0.0};
    case 1: return {0.0, 4.0 * b_};
    case 2: return {-4.0 * a_, 0.0};
    default: return {0.0, -4.0 * b_};
  }
}

Vec2 RectangleCurve::second_deriv(double) const { return {0.0, 0.0}; }
Vec2 RectangleCurve::third_deriv(double) const { return {0.0, 0.0}; }

// ---------------------------------------------------------------------------

OffsetCurve::OffsetCurve(CurvePtr base, double d) : base_(std::move(base)), d_(d) {
  if (!base_) throw GeometryError("offset of a null curve");
}

Point2 OffsetCurve::eval(double t) const {
  const Frame f = eval_frame(*base_, t);
  return f.point + f.unit_normal * d_;
}

// With n' = kappa * eta' for the outward normal, the offset derivative is a
// scaled copy of the base tangent.
Vec2 OffsetCurve::deriv(double t) const {
  const Frame f = eval_frame(*base_, t);
  return base_->deriv(t) * (1.0 + d_ * f.curvature);
}

Vec2 OffsetCurve::second_deriv(double t) const {
  const Frame f = eval_frame(*base_, t);
  const double dk = curvature_derivative(*base_, t);
  return base_->second_deriv(t) * (1.0 + d_ * f.curvature) + base_->deriv(t) * (d_ * dk);
}

Vec2 OffsetCurve::third_deriv(double t) const {
  constexpr double step = 1e-5;
  return (second_deriv(t + step) - second_deriv(t - step)) / (2.0 * step);
}

CurvePtr offset_contour(CurvePtr curve, double d) {
  if (!curve) throw GeometryError("offset of a null curve");
  if (d == 0.0) return curve;
  for (int k = 0; k < kCheckNodes; ++k) {
    const double t = static_cast<double>(k) / kCheckNodes;
    const Frame f = eval_frame(*curve, t);
    if (1.0 + d * f.curvature <= 0.0) {
      char buf[128];
      std::snprintf(buf, sizeof buf,
                    "offset d=%.6g folds over itself at t=%.6g (curvature %.6g)", d, t,
                    f.curvature);
      throw GeometryError(buf);
    }
  }
  return std::make_shared<OffsetCurve>(std::move(curve), d);
}

// ---------------------------------------------------------------------------

double RandomApertureModel::radius_perturbation_bound() const {
  double s = 0.0;
  for (int n = 1; n <= modes; ++n) s += std::pow(static_cast<double>(n), -mode_decay);
  return sigma_r * 2.0 * std::sqrt(3.0) * s;
}

void RandomApertureModel::validate() const {
  if (!(mean_radius > 0.0)) throw std::invalid_argument("aperture mean_radius must be > 0");
  if (!(sigma_x >= 0.0 && sigma_y >= 0.0 && sigma_r >= 0.0))
    throw std::invalid_argument("aperture sigmas must be >= 0");
  if (modes < 0) throw std::invalid_argument("aperture modes must be >= 0");
  if (!std::isfinite(mode_decay) || mode_decay < 0.0)
    throw std::invalid_argument("aperture mode_decay must be finite and >= 0");
  if (!(mean_radius - radius_perturbation_bound() > 0.0)) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "aperture radius not guaranteed positive: mean_radius %.6g <= bound %.6g",
                  mean_radius, radius_perturbation_bound());
    throw std::invalid_argument(buf);
  }
}

RandomApertureModel RandomApertureModel::example2() {
  RandomApertureModel m;
  m.mean_center = {0.3, 0.4};
  m.sigma_x = 0.05;
  m.sigma_y = 0.05;
  m.mean_radius = 0.15;
  m.sigma_r = 0.01;
  m.modes = 10;
  m.mode_decay = 2.0;
  return m;
}

std::shared_ptr<const RadialFourierCurve> sample_aperture(const RandomApertureModel& model,
                                                          RngStream rng) {
  const double sq3 = std::sqrt(3.0);
  Point2 c = model.mean_center;
  c.x1 += model.sigma_x * rng.uniform(-1.0, 1.0);
  c.x2 += model.sigma_y * rng.uniform(-1.0, 1.0);
  std::vector<double> a(model.modes), b(model.modes);
  for (int n = 0; n < model.modes; ++n) a[n] = rng.uniform(-sq3, sq3);
  for (int n = 0; n < model.modes; ++n) b[n] = rng.uniform(-sq3, sq3);
  for (int n = 0; n < model.modes; ++n) {
    const double w = model.sigma_r * std::pow(static_cast<double>(n + 1), -model.mode_decay);
    a[n] *= w;
    b[n] *= w;
  }
  auto curve = std::make_shared<RadialFourierCurve>(c, model.mean_radius, a, b);
  for (int k = 0; k < kCheckNodes; ++k) {
    const double t = static_cast<double>(k) / kCheckNodes;
    if (!(curve->radius(t) > 0.0)) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "sampled aperture radius %.6g <= 0 at t=%.6g (stream %llu)",
                    curve->radius(t), t, static_cast<unsigned long long>(rng.stream_id()));
      throw GeometryError(buf);
    }
  }
  return curve;
}

}  // namespace greenpot
