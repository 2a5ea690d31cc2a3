#include "greenpot/bie.hpp"

#include <cstdio>
#include <map>
#include <mutex>

#include "greenpot/errors.hpp"

namespace greenpot {

// ---------------------------------------------------------------------------
// Boundary conditions and discretizations

BcKind BoundaryCondition::kind() const {
  if (beta == 0.0) return BcKind::dirichlet;
  if (alpha == 0.0) return BcKind::neumann;
  return BcKind::robin;
}

void BoundaryCondition::validate() const {
  if (alpha == 0.0 && beta == 0.0) throw std::invalid_argument("boundary condition with alpha = beta = 0");
  if (!std::isfinite(alpha) || !std::isfinite(beta))
    throw std::invalid_argument("boundary condition coefficients must be finite");
}

BoundaryCondition BoundaryCondition::dirichlet(std::function<double(const Point2&, const Vec2&)> g) {
  return BoundaryCondition{1.0, 0.0, std::move(g)};
}

BoundaryCondition BoundaryCondition::neumann(std::function<double(const Point2&, const Vec2&)> g) {
  return BoundaryCondition{0.0, 1.0, std::move(g)};
}

DiscretizedBoundary DiscretizedBoundary::make(CurvePtr curve, int n, DomainSide side) {
  if (!curve) throw GeometryError("discretization of a null curve");
  if (n < 4) throw GeometryError("boundary discretization needs N >= 4");
  DiscretizedBoundary b;
  b.curve = std::move(curve);
  b.n = n;
  b.h = 1.0 / n;
  b.side = side;
  b.nodes.reserve(n);
  for (int k = 0; k < n; ++k) b.nodes.push_back(eval_frame(*b.curve, k * b.h));
  return b;
}

std::vector<Point2> DiscretizedBoundary::node_points() const {
  std::vector<Point2> p;
  p.reserve(nodes.size());
  for (const auto& f : nodes) p.push_back(f.point);
  return p;
}

double DiscretizedBoundary::collocation_parameter(int row, BcKind kind) const {
  return kind == BcKind::neumann ? row * h : (row + kQualocationOffset) * h;
}

std::vector<Frame> collocation_frames(const DiscretizedBoundary& rows, BcKind kind) {
  if (kind == BcKind::neumann) return rows.nodes;
  std::vector<Frame> f;
  f.reserve(rows.n);
  for (int r = 0; r < rows.n; ++r) f.push_back(eval_frame(*rows.curve, rows.collocation_parameter(r, kind)));
  return f;
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

std::vector<Point2> points_of(const std::vector<Frame>& frames) {
  std::vector<Point2> p;
  p.reserve(frames.size());
  for (const auto& f : frames) p.push_back(f.point);
  return p;
}

std::vector<Vec2> normals_of(const std::vector<Frame>& frames) {
  std::vector<Vec2> n;
  n.reserve(frames.size());
  for (const auto& f : frames) n.push_back(f.unit_normal);
  return n;
}

// Kernel values (or normal derivatives along `dirs`) between targets and the
// nodes of `cols`, without quadrature weights. Coincident pairs are skipped
// (left at zero) when skip_diagonal is set.
Eigen::MatrixXd kernel_matrix(const Kernel& kernel, const std::vector<Point2>& targets,
                              const std::vector<Vec2>* dirs, const std::vector<Point2>& sources,
                              const PreparedSources* prepared, bool skip_diagonal) {
  const auto nt = static_cast<Eigen::Index>(targets.size());
  const auto ns = static_cast<Eigen::Index>(sources.size());
  Eigen::MatrixXd m(nt, ns);
  for (Eigen::Index k = 0; k < ns; ++k) {
    for (Eigen::Index i = 0; i < nt; ++i) {
      if (skip_diagonal && i == k) {
        m(i, k) = 0.0;
        continue;
      }
      m(i, k) = dirs ? dot((*dirs)[i], fundamental_gradient(targets[i], sources[k]))
                     : fundamental_value(targets[i], sources[k]);
    }
  }
  if (kernel.has_regular_part()) {
    if (prepared) {
      m += kernel.regular_block(targets, dirs, *prepared);
    } else {
      m += kernel.regular_block(targets, dirs, kernel.prepare(sources));
    }
  }
  return m;
}

void require_smooth_for_derivative_rows(const DiscretizedBoundary& rows, BcKind kind) {
  if (kind != BcKind::dirichlet && !rows.curve->is_smooth())
    throw GeometryError("Neumann/Robin rows need a smooth curve; this boundary has corners");
}

}  // namespace

Eigen::MatrixXd assemble_block_prepared(const Kernel& kernel, const DiscretizedBoundary& rows,
                                        const BoundaryCondition& bc,
                                        const DiscretizedBoundary& cols, bool same,
                                        const PreparedSources* prepared) {
  bc.validate();
  const BcKind kind = bc.kind();
  require_smooth_for_derivative_rows(rows, kind);
  const std::vector<Frame> frames = collocation_frames(rows, kind);
  const std::vector<Point2> targets = points_of(frames);
  const std::vector<Point2> sources = cols.node_points();
  PreparedSources local;
  if (kernel.has_regular_part() && !prepared) {
    local = kernel.prepare(sources);
    prepared = &local;
  }

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows.n, cols.n);
  if (bc.alpha != 0.0) m += (bc.alpha * cols.h) * kernel_matrix(kernel, targets, nullptr, sources, prepared, false);
  if (bc.beta != 0.0) {
    const std::vector<Vec2> normals = normals_of(frames);
    const bool at_nodes = same && kind == BcKind::neumann;
    Eigen::MatrixXd d = kernel_matrix(kernel, targets, &normals, sources, prepared, at_nodes);
    if (at_nodes) {
      // The regular part was added on the diagonal; add the curvature limit.
      for (int k = 0; k < rows.n; ++k) d(k, k) += -frames[k].curvature / (4.0 * M_PI);
    }
    m += (bc.beta * cols.h) * d;
    if (same) {
      const double jump = rows.jump_coefficient();
      for (int r = 0; r < rows.n; ++r) {
        const double c = bc.beta * jump / frames[r].speed;
        if (kind == BcKind::neumann) {
          m(r, r) += c;
        } else {
          // mu at (r + 1/6)h from the linear interpolant of the nodes r, r+1.
          m(r, r) += c * (1.0 - kQualocationOffset);
          m(r, (r + 1) % rows.n) += c * kQualocationOffset;
        }
      }
    }
  }
  return m;
}

Eigen::MatrixXd assemble_block(const Kernel& kernel, const DiscretizedBoundary& rows,
                               const BoundaryCondition& bc, const DiscretizedBoundary& cols,
                               bool same) {
  return assemble_block_prepared(kernel, rows, bc, cols, same, nullptr);
}

Eigen::VectorXd collocation_rhs(const DiscretizedBoundary& rows, const BoundaryCondition& bc) {
  const std::vector<Frame> frames = collocation_frames(rows, bc.kind());
  Eigen::VectorXd f(rows.n);
  for (int r = 0; r < rows.n; ++r) f(r) = bc.data(frames[r].point, frames[r].unit_normal);
  return f;
}

BieSystem assemble_system(const Kernel& kernel, const DiscretizedBoundary& boundary,
                          const BoundaryCondition& bc) {
  BieSystem s;
  s.matrix = assemble_block(kernel, boundary, bc, boundary, true);
  s.rhs = collocation_rhs(boundary, bc);
  s.row_kinds.assign(boundary.n, bc.kind());
  return s;
}

BieSystem assemble_two_point_system(const Kernel& kernel, const DiscretizedBoundary& boundary,
                                    const BoundaryCondition& bc) {
  if (bc.kind() != BcKind::dirichlet)
    throw std::invalid_argument("two-point qualocation reference is defined for first-kind rows only");
  const int n = boundary.n;
  const double h = boundary.h;
  std::vector<Point2> lo, hi;  // points at (k + 1/6)h and (k + 5/6)h
  std::vector<Vec2> nlo, nhi;
  for (int k = 0; k < n; ++k) {
    const Frame a = eval_frame(*boundary.curve, (k + 1.0 / 6.0) * h);
    const Frame b = eval_frame(*boundary.curve, (k + 5.0 / 6.0) * h);
    lo.push_back(a.point);
    hi.push_back(b.point);
    nlo.push_back(a.unit_normal);
    nhi.push_back(b.unit_normal);
  }
  const std::vector<Point2> sources = boundary.node_points();
  const PreparedSources prep = kernel.prepare(sources);
  const Eigen::MatrixXd vlo = (bc.alpha * h) * kernel_matrix(kernel, lo, nullptr, sources, &prep, false);
  const Eigen::MatrixXd vhi = (bc.alpha * h) * kernel_matrix(kernel, hi, nullptr, sources, &prep, false);

  // Row l tests against the hat function centered at node l.
  constexpr double wn = 0.5 * (5.0 / 6.0), wf = 0.5 * (1.0 / 6.0);
  BieSystem s;
  s.matrix.resize(n, n);
  s.rhs.resize(n);
  for (int l = 0; l < n; ++l) {
    const int lm = (l + n - 1) % n;
    s.matrix.row(l) = wn * vlo.row(l) + wf * vhi.row(l) + wf * vlo.row(lm) + wn * vhi.row(lm);
    s.rhs(l) = wn * bc.data(lo[l], nlo[l]) + wf * bc.data(hi[l], nhi[l]) +
               wf * bc.data(lo[lm], nlo[lm]) + wn * bc.data(hi[lm], nhi[lm]);
  }
  s.row_kinds.assign(n, BcKind::dirichlet);
  return s;
}

// ---------------------------------------------------------------------------
// Solves

Eigen::VectorXd solve_dense(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const char* what) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw SolverError("dimension mismatch in dense solve");
  if (!a.allFinite() || !b.allFinite()) throw SolverError(std::string(what) + ": non-finite entries");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const double rc = lu.rcond();
  if (!(rc > 1e-14)) {
    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "%s is singular or ill-conditioned (rcond %.3g); first-kind logarithmic "
                  "equations fail when the boundary's conformal radius is 1",
                  what, rc);
    throw SolverError(buf);
  }
  Eigen::VectorXd x = lu.solve(b);
  const double bn = b.lpNorm<Eigen::Infinity>();
  const double res = (a * x - b).lpNorm<Eigen::Infinity>();
  if (res > 1e-10 * bn) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: residual %.3g exceeds 1e-10 * |rhs| = %.3g", what, res, 1e-10 * bn);
    throw SolverError(buf);
  }
  return x;
}

DensitySolution solve_density(const BieSystem& system,
                              std::shared_ptr<const DiscretizedBoundary> boundary) {
  if (boundary && boundary->n != system.rhs.size()) throw SolverError("density/boundary size mismatch");
  DensitySolution d;
  const bool dirichlet = !system.row_kinds.empty() && system.row_kinds[0] == BcKind::dirichlet;
  d.mu = solve_dense(system.matrix, system.rhs, dirichlet ? "first-kind system" : "boundary system");
  d.boundary = std::move(boundary);
  return d;
}

double neumann_diagonal(const Kernel& kernel, const DiscretizedBoundary& boundary, int k) {
  const Frame& f = boundary.nodes.at(static_cast<std::size_t>(k));
  double v = -f.curvature / (4.0 * M_PI);
  if (kernel.has_regular_part()) v += dot(f.unit_normal, kernel.regular_gradient(f.point, f.point));
  return v;
}

// ---------------------------------------------------------------------------
// Fixed + aperture systems

namespace {

int total_nodes(const std::vector<DiscretizedBoundary>& bs) {
  int n = 0;
  for (const auto& b : bs) n += b.n;
  return n;
}

}  // namespace

FullBoundaryBlocks assemble_coupling_blocks(const std::vector<DiscretizedBoundary>& fixed,
                                            const BoundaryCondition& fixed_bc,
                                            const DiscretizedBoundary& aperture,
                                            const BoundaryCondition& aperture_bc) {
  const FundamentalKernel fk;
  const int n1 = total_nodes(fixed);
  const int n2 = aperture.n;
  FullBoundaryBlocks b;
  b.g12.resize(n1, n2);
  b.g21.resize(n2, n1);
  b.f1.resize(n1);
  int r0 = 0;
  for (const auto& fb : fixed) {
    b.g12.middleRows(r0, fb.n) = assemble_block(fk, fb, fixed_bc, aperture, false);
    b.g21.middleCols(r0, fb.n) = assemble_block(fk, aperture, aperture_bc, fb, false);
    b.f1.segment(r0, fb.n) = collocation_rhs(fb, fixed_bc);
    r0 += fb.n;
  }
  b.g22 = assemble_block(fk, aperture, aperture_bc, aperture, true);
  b.f2 = collocation_rhs(aperture, aperture_bc);
  (void)n2;
  return b;
}

FullBoundaryBlocks assemble_full_blocks(const std::vector<DiscretizedBoundary>& fixed,
                                        const BoundaryCondition& fixed_bc,
                                        const DiscretizedBoundary& aperture,
                                        const BoundaryCondition& aperture_bc) {
  FullBoundaryBlocks b = assemble_coupling_blocks(fixed, fixed_bc, aperture, aperture_bc);
  const FundamentalKernel fk;
  const int n1 = total_nodes(fixed);
  b.g11.resize(n1, n1);
  int r0 = 0;
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    int c0 = 0;
    for (std::size_t j = 0; j < fixed.size(); ++j) {
      b.g11.block(r0, c0, fixed[i].n, fixed[j].n) = assemble_block(fk, fixed[i], fixed_bc, fixed[j], i == j);
      c0 += fixed[j].n;
    }
    r0 += fixed[i].n;
  }
  return b;
}

BieSystem assemble_monolithic(const std::vector<DiscretizedBoundary>& fixed,
                              const BoundaryCondition& fixed_bc,
                              const DiscretizedBoundary& aperture,
                              const BoundaryCondition& aperture_bc) {
  // Entry-by-entry assembly over a flat node list, independent of assemble_block.
  struct Row {
    const DiscretizedBoundary* b;
    const BoundaryCondition* bc;
    int local;
  };
  std::vector<Row> rows;
  for (const auto& fb : fixed)
    for (int k = 0; k < fb.n; ++k) rows.push_back({&fb, &fixed_bc, k});
  for (int k = 0; k < aperture.n; ++k) rows.push_back({&aperture, &aperture_bc, k});

  const auto n = static_cast<Eigen::Index>(rows.size());
  BieSystem s;
  s.matrix.resize(n, n);
  s.rhs.resize(n);
  s.row_kinds.resize(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Row& ri = rows[i];
    const BcKind kind = ri.bc->kind();
    require_smooth_for_derivative_rows(*ri.b, kind);
    const Frame c = kind == BcKind::neumann
                        ? ri.b->nodes[ri.local]
                        : eval_frame(*ri.b->curve, ri.b->collocation_parameter(ri.local, kind));
    s.rhs(i) = ri.bc->data(c.point, c.unit_normal);
    s.row_kinds[i] = kind;
    for (Eigen::Index j = 0; j < n; ++j) {
      const Row& cj = rows[j];
      const Frame& y = cj.b->nodes[cj.local];
      const double h = cj.b->h;
      const bool same_curve = ri.b == cj.b;
      double v = 0.0;
      if (ri.bc->alpha != 0.0) v += ri.bc->alpha * h * fundamental_value(c.point, y.point);
      if (ri.bc->beta != 0.0) {
        double dn;
        if (same_curve && kind == BcKind::neumann && ri.local == cj.local) {
          dn = -c.curvature / (4.0 * M_PI);
        } else {
          dn = dot(c.unit_normal, fundamental_gradient(c.point, y.point));
        }
        v += ri.bc->beta * h * dn;
        if (same_curve) {
          const double jump = ri.b->jump_coefficient() / c.speed;
          if (kind == BcKind::neumann && ri.local == cj.local) v += ri.bc->beta * jump;
          if (kind == BcKind::robin) {
            if (cj.local == ri.local) v += ri.bc->beta * jump * (5.0 / 6.0);
            if (cj.local == (ri.local + 1) % ri.b->n) v += ri.bc->beta * jump * (1.0 / 6.0);
          }
        }
      }
      s.matrix(i, j) = v;
    }
  }
  return s;
}

SchurSolution schur_solve(const FullBoundaryBlocks& blocks,
                          const Eigen::PartialPivLU<Eigen::MatrixXd>* g11_lu) {
  Eigen::PartialPivLU<Eigen::MatrixXd> local;
  if (!g11_lu) {
    if (blocks.g11.size() == 0) throw SolverError("schur_solve: no G11 block or factorization");
    local.compute(blocks.g11);
    if (!(local.rcond() > 1e-14)) throw SolverError("schur_solve: G11 is singular");
    g11_lu = &local;
  }
  const Eigen::MatrixXd x = g11_lu->solve(blocks.g12);
  const Eigen::VectorXd y = g11_lu->solve(blocks.f1);
  SchurSolution s;
  s.schur = blocks.g22 - blocks.g21 * x;
  s.mu2 = solve_dense(s.schur, blocks.f2 - blocks.g21 * y, "Schur complement");
  s.mu1 = y - x * s.mu2;
  return s;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

void check_clearance(const DiscretizedBoundary& b, const Point2& x) {
  for (const auto& f : b.nodes) {
    if (distance(x, f.point) <= f.speed * b.h) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "field point (%.6g, %.6g) lies within one mesh width of the boundary", x.x1, x.x2);
      throw KernelError(buf);
    }
  }
}

const DiscretizedBoundary& boundary_of(const DensitySolution& d) {
  if (!d.boundary) throw std::invalid_argument("density without boundary");
  if (d.mu.size() != d.boundary->n) throw std::invalid_argument("density length differs from N");
  return *d.boundary;
}

}  // namespace

double eval_potential(const Kernel& kernel, const DensitySolution& density, const Point2& x) {
  const DiscretizedBoundary& b = boundary_of(density);
  check_clearance(b, x);
  double s = 0.0;
  for (int k = 0; k < b.n; ++k) s += kernel.value(x, b.nodes[k].point) * density.mu(k);
  return b.h * s;
}

Vec2 eval_potential_gradient(const Kernel& kernel, const DensitySolution& density, const Point2& x) {
  const DiscretizedBoundary& b = boundary_of(density);
  check_clearance(b, x);
  Vec2 s;
  for (int k = 0; k < b.n; ++k) s += kernel.gradient(x, b.nodes[k].point) * density.mu(k);
  return s * b.h;
}

Eigen::MatrixXd trig_interpolation_matrix(int n, int m) {
  if (n < 1 || m < 1) throw std::invalid_argument("interpolation sizes must be positive");
  Eigen::MatrixXd u(m, n);
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < n; ++k) {
      // Parameter offset reduced to (-1/2, 1/2].
      double tau = static_cast<double>(j) / m - static_cast<double>(k) / n;
      tau -= std::round(tau);
      const double s = std::sin(M_PI * n * tau);
      double v;
      if (std::abs(tau) < 1e-15) {
        v = 1.0;
      } else if (n % 2 == 0) {
        v = s / (n * std::tan(M_PI * tau));
      } else {
        v = s / (n * std::sin(M_PI * tau));
      }
      u(j, k) = v;
    }
  }
  return u;
}

namespace {

std::shared_ptr<const Eigen::MatrixXd> cached_interpolation(int n, int m) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const Eigen::MatrixXd>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{n, m}];
  if (!slot) slot = std::make_shared<const Eigen::MatrixXd>(trig_interpolation_matrix(n, m));
  return slot;
}

}  // namespace

NearFieldEvaluator::NearFieldEvaluator(CurvePtr curve, int fine_nodes, std::vector<Point2> targets,
                                       bool with_gradient)
    : curve_(std::move(curve)), m_(fine_nodes), targets_(std::move(targets)) {
  if (m_ < 4) throw std::invalid_argument("fine grid needs at least 4 nodes");
  const auto nt = static_cast<Eigen::Index>(targets_.size());
  std::vector<Point2> fine(m_);
  for (int j = 0; j < m_; ++j) fine[j] = curve_->eval(static_cast<double>(j) / m_);
  const double w = 1.0 / m_;
  fine_value_.resize(nt, m_);
  if (with_gradient) fine_grad_.resize(2 * nt, m_);
  for (int j = 0; j < m_; ++j) {
    for (Eigen::Index i = 0; i < nt; ++i) {
      fine_value_(i, j) = w * fundamental_value(targets_[i], fine[j]);
      if (with_gradient) {
        const Vec2 g = fundamental_gradient(targets_[i], fine[j]);
        fine_grad_(i, j) = w * g.x1;
        fine_grad_(nt + i, j) = w * g.x2;
      }
    }
  }
}

Eigen::VectorXd NearFieldEvaluator::fine_density(const DensitySolution& density) const {
  const DiscretizedBoundary& b = boundary_of(density);
  if (b.curve != curve_) throw std::invalid_argument("density lives on a different curve");
  return (*cached_interpolation(b.n, m_)) * density.mu;
}

Eigen::VectorXd NearFieldEvaluator::values(const Kernel& kernel, const DensitySolution& density,
                                           const PreparedSources* prepared) const {
  Eigen::VectorXd u = fine_value_ * fine_density(density);
  if (kernel.has_regular_part()) {
    const DiscretizedBoundary& b = *density.boundary;
    const Eigen::MatrixXd r = prepared ? kernel.regular_block(targets_, nullptr, *prepared)
                                       : kernel.regular_block(targets_, nullptr, kernel.prepare(b.node_points()));
    u += b.h * (r * density.mu);
  }
  return u;
}

Eigen::VectorXd NearFieldEvaluator::gradients(const Kernel& kernel, const DensitySolution& density) const {
  if (fine_grad_.size() == 0) throw std::logic_error("NearFieldEvaluator built without gradients");
  Eigen::VectorXd g = fine_grad_ * fine_density(density);
  if (kernel.has_regular_part()) {
    const DiscretizedBoundary& b = *density.boundary;
    const PreparedSources prep = kernel.prepare(b.node_points());
    const auto nt = static_cast<Eigen::Index>(targets_.size());
    const std::vector<Vec2> e1(targets_.size(), Vec2{1.0, 0.0}), e2(targets_.size(), Vec2{0.0, 1.0});
    g.head(nt) += b.h * (kernel.regular_block(targets_, &e1, prep) * density.mu);
    g.tail(nt) += b.h * (kernel.regular_block(targets_, &e2, prep) * density.mu);
  }
  return g;
}

}  // namespace greenpot
