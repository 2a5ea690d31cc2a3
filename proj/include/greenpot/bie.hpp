#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "greenpot/boundary.hpp"
#include "greenpot/kernels.hpp"

namespace greenpot {

/// Dense collocation system G mu = phi with one row per node of the boundary.
struct BieSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
  std::vector<BcKind> row_kinds;
};

struct DensitySolution {
  Eigen::VectorXd mu;  // mu_k = nu(eta(kh)) |eta'(kh)|
  std::shared_ptr<const DiscretizedBoundary> boundary;
};

/// Row parameters and frames at which the condition is collocated.
std::vector<Frame> collocation_frames(const DiscretizedBoundary& rows, BcKind kind);

/// Rows: the condition of `rows` collocated per its kind. Columns: trapezoidal
/// single layer over `cols` with `kernel`. `same` marks rows == cols, which
/// activates the jump term and the Neumann diagonal limit.
Eigen::MatrixXd assemble_block(const Kernel& kernel, const DiscretizedBoundary& rows,
                               const BoundaryCondition& bc, const DiscretizedBoundary& cols,
                               bool same);

/// As assemble_block with the column sources already prepared by the kernel.
Eigen::MatrixXd assemble_block_prepared(const Kernel& kernel, const DiscretizedBoundary& rows,
                                        const BoundaryCondition& bc,
                                        const DiscretizedBoundary& cols, bool same,
                                        const PreparedSources* prepared);

/// Boundary data of `bc` at the row collocation points.
Eigen::VectorXd collocation_rhs(const DiscretizedBoundary& rows, const BoundaryCondition& bc);

/// Single-boundary system with the kernel's regular part carrying the fixed boundary.
BieSystem assemble_system(const Kernel& kernel, const DiscretizedBoundary& boundary,
                          const BoundaryCondition& bc);

/// Reference system for first-kind rows: two-point qualocation at offsets
/// 1/6 and 5/6 with weights 1/2, projected on piecewise-linear test functions.
BieSystem assemble_two_point_system(const Kernel& kernel, const DiscretizedBoundary& boundary,
                                    const BoundaryCondition& bc);

/// Dense LU solve. Throws SolverError when rcond < 1e-14 or the residual check fails.
Eigen::VectorXd solve_dense(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                            const char* what = "system");
DensitySolution solve_density(const BieSystem& system,
                              std::shared_ptr<const DiscretizedBoundary> boundary);

/// Kernel diagonal limit of the Neumann row at node k: -kappa/(4pi) plus the
/// regular part's normal derivative at the coincident point.
double neumann_diagonal(const Kernel& kernel, const DiscretizedBoundary& boundary, int k);

/// Fundamental-solution system on fixed + aperture boundaries, fixed unknowns first.
struct FullBoundaryBlocks {
  Eigen::MatrixXd g11, g12, g21, g22;
  Eigen::VectorXd f1, f2;
};

FullBoundaryBlocks assemble_full_blocks(const std::vector<DiscretizedBoundary>& fixed,
                                        const BoundaryCondition& fixed_bc,
                                        const DiscretizedBoundary& aperture,
                                        const BoundaryCondition& aperture_bc);

/// As assemble_full_blocks but reusing a precomputed g11 (and leaving it empty in the result).
FullBoundaryBlocks assemble_coupling_blocks(const std::vector<DiscretizedBoundary>& fixed,
                                            const BoundaryCondition& fixed_bc,
                                            const DiscretizedBoundary& aperture,
                                            const BoundaryCondition& aperture_bc);

/// Whole (N1+N2) matrix assembled in one pass over the concatenated boundaries.
BieSystem assemble_monolithic(const std::vector<DiscretizedBoundary>& fixed,
                              const BoundaryCondition& fixed_bc,
                              const DiscretizedBoundary& aperture,
                              const BoundaryCondition& aperture_bc);

struct SchurSolution {
  Eigen::VectorXd mu2;
  Eigen::VectorXd mu1;
  Eigen::MatrixXd schur;  // G22 - G21 G11^{-1} G12
};

/// Eliminates the fixed unknowns. `g11_lu` may be supplied to reuse a factorization.
SchurSolution schur_solve(const FullBoundaryBlocks& blocks,
                          const Eigen::PartialPivLU<Eigen::MatrixXd>* g11_lu = nullptr);

/// u(x) = h sum_k G(x, eta(kh)) mu_k. Throws KernelError when x is within one
/// physical mesh width of a node.
double eval_potential(const Kernel& kernel, const DensitySolution& density, const Point2& x);
Vec2 eval_potential_gradient(const Kernel& kernel, const DensitySolution& density,
                             const Point2& x);

/// Trigonometric interpolation of N equispaced samples to M equispaced points (M multiple of N).
Eigen::MatrixXd trig_interpolation_matrix(int n, int m);

/// Evaluates a single layer at fixed targets close to its curve.
///
/// The fundamental part integrates the trigonometric interpolant of mu on a
/// fine grid; the regular part uses the coarse nodes. Both matrices that only
/// depend on the geometry are built once, so one instance serves every mesh
/// level of a realization.
class NearFieldEvaluator {
 public:
  NearFieldEvaluator(CurvePtr curve, int fine_nodes, std::vector<Point2> targets,
                     bool with_gradient = false);

  /// `prepared` may carry kernel.prepare(nodes) of the density's boundary.
  Eigen::VectorXd values(const Kernel& kernel, const DensitySolution& density,
                         const PreparedSources* prepared = nullptr) const;
  /// Rows: d/dx1 then d/dx2 stacked as [targets; targets]. Requires with_gradient.
  Eigen::VectorXd gradients(const Kernel& kernel, const DensitySolution& density) const;

  const std::vector<Point2>& targets() const { return targets_; }
  int fine_nodes() const { return m_; }

 private:
  Eigen::VectorXd fine_density(const DensitySolution& density) const;

  CurvePtr curve_;
  int m_;
  std::vector<Point2> targets_;
  Eigen::MatrixXd fine_value_;  // targets x fine nodes, weights included
  Eigen::MatrixXd fine_grad_;   // 2*targets x fine nodes
};

}  // namespace greenpot
