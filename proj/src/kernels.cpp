#include "greenpot/kernels.hpp"

#include <complex>
#include <cstdio>

#include "greenpot/bie.hpp"
#include "greenpot/errors.hpp"

namespace greenpot {

using cplx = std::complex<double>;

namespace {

constexpr double kDomainSlack = 1e-12;

[[noreturn]] void throw_coincident(const Point2& x) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "kernel evaluated at coincident points (%.17g, %.17g)", x.x1,
                x.x2);
  throw KernelError(buf);
}

}  // namespace

double fundamental_value(const Point2& x, const Point2& xi) {
  const Vec2 d = x - xi;
  const double r2 = dot(d, d);
  if (r2 == 0.0) throw_coincident(x);
  return -0.5 * kInvTwoPi * std::log(r2);
}

Vec2 fundamental_gradient(const Point2& x, const Point2& xi) {
  const Vec2 d = x - xi;
  const double r2 = dot(d, d);
  if (r2 == 0.0) throw_coincident(x);
  return d * (-kInvTwoPi / r2);
}

// ---------------------------------------------------------------------------

PreparedSources Kernel::prepare(const std::vector<Point2>& sources) const {
  return PreparedSources{sources, nullptr};
}

Eigen::MatrixXd Kernel::regular_block(const std::vector<Point2>& targets,
                                      const std::vector<Vec2>* dirs,
                                      const PreparedSources& sources) const {
  const auto nt = static_cast<Eigen::Index>(targets.size());
  const auto ns = static_cast<Eigen::Index>(sources.points.size());
  Eigen::MatrixXd out(nt, ns);
  for (Eigen::Index j = 0; j < ns; ++j) {
    for (Eigen::Index i = 0; i < nt; ++i) {
      out(i, j) = dirs ? dot((*dirs)[i], regular_gradient(targets[i], sources.points[j]))
                       : regular_value(targets[i], sources.points[j]);
    }
  }
  return out;
}

double Kernel::value(const Point2& x, const Point2& xi) const {
  check_domain(x);
  check_domain(xi);
  return fundamental_value(x, xi) + (has_regular_part() ? regular_value(x, xi) : 0.0);
}

Vec2 Kernel::gradient(const Point2& x, const Point2& xi) const {
  check_domain(x);
  check_domain(xi);
  Vec2 g = fundamental_gradient(x, xi);
  if (has_regular_part()) g += regular_gradient(x, xi);
  return g;
}

double kernel_normal_derivative(const Kernel& kernel, const Point2& x, const Vec2& n,
                                const Point2& xi) {
  return kernel.normal_deriv(x, n, xi);
}

Eigen::MatrixXd FundamentalKernel::regular_block(const std::vector<Point2>& targets,
                                                 const std::vector<Vec2>*,
                                                 const PreparedSources& sources) const {
  return Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(targets.size()),
                               static_cast<Eigen::Index>(sources.points.size()));
}

// ---------------------------------------------------------------------------

void HalfPlaneKernel::check_domain(const Point2& p) const {
  if (!(p.x2 >= -kDomainSlack)) throw KernelError("half-plane kernel: point below x2 = 0");
}

double HalfPlaneKernel::regular_value(const Point2& x, const Point2& xi) const {
  const Vec2 d{x.x1 - xi.x1, x.x2 + xi.x2};
  const double r2 = dot(d, d);
  if (r2 == 0.0) throw_coincident(x);
  return 0.5 * kInvTwoPi * std::log(r2);
}

Vec2 HalfPlaneKernel::regular_gradient(const Point2& x, const Point2& xi) const {
  const Vec2 d{x.x1 - xi.x1, x.x2 + xi.x2};
  const double r2 = dot(d, d);
  if (r2 == 0.0) throw_coincident(x);
  return d * (kInvTwoPi / r2);
}

double halfplane_green(const Point2& x, const Point2& xi) { return HalfPlaneKernel().value(x, xi); }

// ---------------------------------------------------------------------------

DiskKernel::DiskKernel(double radius, Point2 center) : a_(radius), c_(center) {
  if (!(radius > 0.0)) throw std::invalid_argument("disk radius must be positive");
}

void DiskKernel::check_domain(const Point2& p) const {
  if (norm(p - c_) > a_ * (1.0 + kDomainSlack)) throw KernelError("disk kernel: point outside the disk");
}

// psi = (1/4pi) ln((a^4 - 2 a^2 x.xi + |x|^2 |xi|^2) / a^2), centered coordinates.
double DiskKernel::regular_value(const Point2& x, const Point2& xi) const {
  const Vec2 u = x - c_;
  const Vec2 v = xi - c_;
  const double a2 = a_ * a_;
  const double num = a2 * a2 - 2.0 * a2 * dot(u, v) + dot(u, u) * dot(v, v);
  return 0.5 * kInvTwoPi * std::log(num / a2);
}

Vec2 DiskKernel::regular_gradient(const Point2& x, const Point2& xi) const {
  const Vec2 u = x - c_;
  const Vec2 v = xi - c_;
  const double a2 = a_ * a_;
  const double vv = dot(v, v);
  const double num = a2 * a2 - 2.0 * a2 * dot(u, v) + dot(u, u) * vv;
  return (v * (-2.0 * a2) + u * (2.0 * vv)) * (0.5 * kInvTwoPi / num);
}

double disk_green(double a, const Point2& x, const Point2& xi) { return DiskKernel(a).value(x, xi); }

// ---------------------------------------------------------------------------

double rectangle_remainder_bound(double a, double b, int m) {
  const double q = std::exp(-M_PI * a / b);
  // Tail of -ln(1-q) = sum q^n/n, summed directly to avoid cancellation.
  double tail = 0.0;
  double qn = std::pow(q, m + 1);
  for (int n = m + 1; n < m + 4000; ++n) {
    const double t = qn / n;
    tail += t;
    if (t < 1e-18 * tail) break;
    qn *= q;
  }
  return b / (2.0 * M_PI) * tail;
}

int rectangle_truncation_for_tol(double a, double b, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("truncation tolerance must be positive");
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("rectangle sides must be positive");
  int m = 1;
  while (rectangle_remainder_bound(a, b, m) > tol && m < 100000) ++m;
  return m;
}

namespace {

struct RectPoint {
  Point2 p;
  cplx w;      // exp(p z)
  cplx winv;   // exp(-p z)
  double ex;   // exp(p x1)
  std::vector<double> sn, cn;  // sin, cos(n p x2), n = 1..M
};

struct RectSources {
  std::vector<RectPoint> pts;
};

RectPoint rect_point(const Point2& x, double p, int m) {
  RectPoint r;
  r.p = x;
  r.w = std::exp(cplx(p * x.x1, p * x.x2));
  r.winv = std::exp(cplx(-p * x.x1, -p * x.x2));
  r.ex = std::exp(p * x.x1);
  r.sn.resize(m);
  r.cn.resize(m);
  for (int n = 0; n < m; ++n) {
    r.sn[n] = std::sin((n + 1) * p * x.x2);
    r.cn[n] = std::cos((n + 1) * p * x.x2);
  }
  return r;
}

struct RectConsts {
  double a, b, p;
  int m;
  cplx kp, km;                 // exp(+-2pa)
  double e2, e4;               // exp(-2pa), exp(-4pa)
  std::vector<double> inv_den; // 1/(2 nu_n (1 - exp(-2 nu_n a)))
  std::vector<double> nu;
};

RectConsts rect_consts(double a, double b, int m) {
  RectConsts c;
  c.a = a;
  c.b = b;
  c.p = M_PI / b;
  c.m = m;
  c.kp = std::exp(2.0 * c.p * a);
  c.km = std::exp(-2.0 * c.p * a);
  c.e2 = std::exp(-2.0 * c.p * a);
  c.e4 = std::exp(-4.0 * c.p * a);
  c.inv_den.resize(m);
  c.nu.resize(m);
  for (int n = 0; n < m; ++n) {
    const double nu = (n + 1) * c.p;
    c.nu[n] = nu;
    c.inv_den[n] = 1.0 / (2.0 * nu * (-std::expm1(-2.0 * nu * a)));
  }
  return c;
}

// exp(w) - 1 without cancellation for small |w|.
cplx expm1c(cplx w) {
  const double u = w.real();
  const double v = w.imag();
  const double s = std::sin(0.5 * v);
  return {std::expm1(u) * std::cos(v) - 2.0 * s * s, std::exp(u) * std::sin(v)};
}

// ln|(e^w - 1)/w|.
double log_sinc_term(cplx w) {
  if (std::abs(w) < 1e-5) return 0.5 * w.real() + (w * w).real() / 24.0;
  return std::log(std::abs(expm1c(w) / w));
}

// e^w/(e^w - 1) - 1/w.
cplx dlog_sinc_term(cplx w) {
  if (std::abs(w) < 0.05) {
    const cplx w2 = w * w;
    return 0.5 + w * (1.0 / 12.0 + w2 * (-1.0 / 720.0 + w2 * (1.0 / 30240.0)));
  }
  const cplx em1 = expm1c(w);
  return (em1 + 1.0) / em1 - 1.0 / w;
}

// Regular part psi (value or directional x-derivative) of the rectangle Green's function.
double rect_entry(const RectConsts& c, const RectPoint& x, const RectPoint& s, const Vec2* dir) {
  const double p = c.p;
  const cplx t2 = x.w * std::conj(s.w);     // z + conj(zeta)
  const cplx t1 = x.w * std::conj(s.winv);  // z - conj(zeta)
  const cplx t3 = t2 * c.kp;
  const cplx t4 = t2 * c.km;
  const cplx t5 = x.w * s.w;  // z + zeta
  const cplx t6 = t5 * c.kp;
  const cplx t7 = t5 * c.km;
  const cplx wsing(p * (x.p.x1 - s.p.x1), p * (x.p.x2 - s.p.x2));

  // Correction series coefficients.
  const double rx = x.ex, rs = s.ex;
  const double b1 = rx * rs * c.e4, b2 = rx / rs * c.e2, b3 = rs / rx * c.e2,
               b4 = c.e4 / (rx * rs);
  double p1 = 1.0, p2 = 1.0, p3 = 1.0, p4 = 1.0;

  if (!dir) {
    const double logs = std::log(std::abs(t1 - 1.0)) + std::log(std::abs(t2 - 1.0)) +
                        std::log(std::abs(t3 - 1.0)) + std::log(std::abs(t4 - 1.0)) -
                        std::log(std::abs(t5 - 1.0)) - std::log(std::abs(t6 - 1.0)) -
                        std::log(std::abs(t7 - 1.0)) - std::log(p) - log_sinc_term(wsing);
    double series = 0.0;
    for (int n = 0; n < c.m; ++n) {
      p1 *= b1;
      p2 *= b2;
      p3 *= b3;
      p4 *= b4;
      series += (p1 - p2 - p3 + p4) * c.inv_den[n] * s.sn[n] * x.sn[n];
    }
    return kInvTwoPi * logs - (2.0 / c.b) * series;
  }

  // d/dz ln(T - 1) = p T / (T - 1); grad ln|f| = (Re g, -Im g).
  const cplx g = p * (t1 / (t1 - 1.0) + t2 / (t2 - 1.0) + t3 / (t3 - 1.0) + t4 / (t4 - 1.0) -
                      t5 / (t5 - 1.0) - t6 / (t6 - 1.0) - t7 / (t7 - 1.0) -
                      dlog_sinc_term(wsing));
  double gx = kInvTwoPi * g.real();
  double gy = -kInvTwoPi * g.imag();
  double sx = 0.0, sy = 0.0;
  for (int n = 0; n < c.m; ++n) {
    p1 *= b1;
    p2 *= b2;
    p3 *= b3;
    p4 *= b4;
    const double sn_val = (p1 - p2 - p3 + p4) * c.inv_den[n];
    const double sn_dx = (p1 - p2 + p3 - p4) * c.inv_den[n] * c.nu[n];
    sx += sn_dx * s.sn[n] * x.sn[n];
    sy += sn_val * s.sn[n] * c.nu[n] * x.cn[n];
  }
  gx -= (2.0 / c.b) * sx;
  gy -= (2.0 / c.b) * sy;
  return dir->x1 * gx + dir->x2 * gy;
}

}  // namespace

RectangleKernel::RectangleKernel(double a, double b, int m) : a_(a), b_(b), m_(m), p_(M_PI / b) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("rectangle sides must be positive");
  if (M_PI * a / b > 150.0) throw std::invalid_argument("rectangle aspect ratio a/b too large");
  if (m_ <= 0) m_ = rectangle_truncation_for_tol(a, b, 1e-12);
}

void RectangleKernel::check_domain(const Point2& p) const {
  const double sa = kDomainSlack * a_, sb = kDomainSlack * b_;
  if (!(p.x1 >= -sa && p.x1 <= a_ + sa && p.x2 >= -sb && p.x2 <= b_ + sb)) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "rectangle kernel: point (%.6g, %.6g) outside [0,%g]x[0,%g]",
                  p.x1, p.x2, a_, b_);
    throw KernelError(buf);
  }
}

double RectangleKernel::regular_value(const Point2& x, const Point2& xi) const {
  const RectConsts c = rect_consts(a_, b_, m_);
  return rect_entry(c, rect_point(x, p_, m_), rect_point(xi, p_, m_), nullptr);
}

Vec2 RectangleKernel::regular_gradient(const Point2& x, const Point2& xi) const {
  const RectConsts c = rect_consts(a_, b_, m_);
  const RectPoint px = rect_point(x, p_, m_), ps = rect_point(xi, p_, m_);
  const Vec2 e1{1.0, 0.0}, e2{0.0, 1.0};
  return {rect_entry(c, px, ps, &e1), rect_entry(c, px, ps, &e2)};
}

PreparedSources RectangleKernel::prepare(const std::vector<Point2>& sources) const {
  auto data = std::make_shared<RectSources>();
  data->pts.reserve(sources.size());
  for (const auto& s : sources) {
    check_domain(s);
    data->pts.push_back(rect_point(s, p_, m_));
  }
  return PreparedSources{sources, data};
}

Eigen::MatrixXd RectangleKernel::regular_block(const std::vector<Point2>& targets,
                                               const std::vector<Vec2>* dirs,
                                               const PreparedSources& sources) const {
  std::shared_ptr<const RectSources> src = std::static_pointer_cast<const RectSources>(sources.data);
  if (!src) src = std::static_pointer_cast<const RectSources>(prepare(sources.points).data);
  const RectConsts c = rect_consts(a_, b_, m_);
  std::vector<RectPoint> tp;
  tp.reserve(targets.size());
  for (const auto& t : targets) {
    check_domain(t);
    tp.push_back(rect_point(t, p_, m_));
  }
  const auto nt = static_cast<Eigen::Index>(tp.size());
  const auto ns = static_cast<Eigen::Index>(src->pts.size());
  Eigen::MatrixXd out(nt, ns);
  for (Eigen::Index j = 0; j < ns; ++j)
    for (Eigen::Index i = 0; i < nt; ++i)
      out(i, j) = rect_entry(c, tp[i], src->pts[j], dirs ? &(*dirs)[i] : nullptr);
  return out;
}

double rectangle_green(double a, double b, int m, const Point2& x, const Point2& xi) {
  if (m < 1) throw std::invalid_argument("rectangle truncation must be >= 1");
  return RectangleKernel(a, b, m).value(x, xi);
}

// ---------------------------------------------------------------------------

NumericalGreenKernel::NumericalGreenKernel(std::vector<DiscretizedBoundary> fixed,
                                           BoundaryCondition bc)
    : fixed_(std::move(fixed)), bc_(std::move(bc)) {
  bc_.validate();
  if (fixed_.empty()) throw std::invalid_argument("numerical Green kernel needs a fixed boundary");
  const BcKind kind = bc_.kind();
  for (const auto& b : fixed_) {
    for (const auto& f : b.nodes) {
      nodes_.push_back(f.point);
      weights_.push_back(b.h);
    }
    for (const auto& f : collocation_frames(b, kind)) {
      row_points_.push_back(f.point);
      row_normals_.push_back(f.unit_normal);
    }
  }
  const auto n = static_cast<Eigen::Index>(nodes_.size());
  g11_.resize(n, n);
  const FundamentalKernel fk;
  Eigen::Index r0 = 0;
  for (const auto& rb : fixed_) {
    Eigen::Index c0 = 0;
    for (const auto& cb : fixed_) {
      g11_.block(r0, c0, rb.n, cb.n) = assemble_block(fk, rb, bc_, cb, &rb == &cb);
      c0 += cb.n;
    }
    r0 += rb.n;
  }
  lu_.compute(g11_);
  rcond_ = lu_.rcond();
  if (!(rcond_ > 1e-14)) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "fixed-boundary matrix is singular (rcond %.3g); for Dirichlet data this "
                  "happens when the boundary's conformal radius is 1, rescale the geometry",
                  rcond_);
    throw SolverError(buf);
  }
}

Eigen::MatrixXd NumericalGreenKernel::trace_rhs(const std::vector<Point2>& sources) const {
  const auto nr = static_cast<Eigen::Index>(row_points_.size());
  const auto ns = static_cast<Eigen::Index>(sources.size());
  Eigen::MatrixXd g(nr, ns);
  const double al = bc_.alpha, be = bc_.beta;
  for (Eigen::Index j = 0; j < ns; ++j) {
    for (Eigen::Index i = 0; i < nr; ++i) {
      double v = 0.0;
      if (al != 0.0) v += al * fundamental_value(row_points_[i], sources[j]);
      if (be != 0.0) v += be * dot(row_normals_[i], fundamental_gradient(row_points_[i], sources[j]));
      g(i, j) = -v;
    }
  }
  return g;
}

Eigen::MatrixXd NumericalGreenKernel::densities(const std::vector<Point2>& sources) const {
  return lu_.solve(trace_rhs(sources));
}

Eigen::MatrixXd NumericalGreenKernel::layer_matrix(const std::vector<Point2>& targets,
                                                   const std::vector<Vec2>* dirs) const {
  const auto nt = static_cast<Eigen::Index>(targets.size());
  const auto nk = static_cast<Eigen::Index>(nodes_.size());
  Eigen::MatrixXd a(nt, nk);
  for (Eigen::Index k = 0; k < nk; ++k) {
    const double w = weights_[k];
    for (Eigen::Index i = 0; i < nt; ++i) {
      a(i, k) = dirs ? w * dot((*dirs)[i], fundamental_gradient(targets[i], nodes_[k]))
                     : w * fundamental_value(targets[i], nodes_[k]);
    }
  }
  return a;
}

double NumericalGreenKernel::regular_value(const Point2& x, const Point2& xi) const {
  return (layer_matrix({x}, nullptr) * densities({xi}))(0, 0);
}

Vec2 NumericalGreenKernel::regular_gradient(const Point2& x, const Point2& xi) const {
  const Eigen::MatrixXd mu = densities({xi});
  const std::vector<Vec2> d1{{1.0, 0.0}}, d2{{0.0, 1.0}};
  return {(layer_matrix({x}, &d1) * mu)(0, 0), (layer_matrix({x}, &d2) * mu)(0, 0)};
}

PreparedSources NumericalGreenKernel::prepare(const std::vector<Point2>& sources) const {
  return PreparedSources{sources, std::make_shared<const Eigen::MatrixXd>(densities(sources))};
}

Eigen::MatrixXd NumericalGreenKernel::regular_block(const std::vector<Point2>& targets,
                                                    const std::vector<Vec2>* dirs,
                                                    const PreparedSources& sources) const {
  auto mu = std::static_pointer_cast<const Eigen::MatrixXd>(sources.data);
  if (!mu) mu = std::make_shared<const Eigen::MatrixXd>(densities(sources.points));
  return layer_matrix(targets, dirs) * (*mu);
}

std::shared_ptr<const NumericalGreenKernel> build_numerical_green(
    const std::vector<CurvePtr>& fixed_curves, const BoundaryCondition& bc,
    const std::vector<int>& node_counts) {
  if (fixed_curves.size() != node_counts.size())
    throw std::invalid_argument("one node count per fixed curve required");
  std::vector<DiscretizedBoundary> fixed;
  for (std::size_t i = 0; i < fixed_curves.size(); ++i)
    fixed.push_back(DiscretizedBoundary::make(fixed_curves[i], node_counts[i], DomainSide::interior));
  return std::make_shared<const NumericalGreenKernel>(std::move(fixed), bc);
}

}  // namespace greenpot
