#ifndef BAP_QP_KERNEL_HPP
#define BAP_QP_KERNEL_HPP

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "bap/geometry.hpp"

namespace bap {

// Exact projection onto an intersection of halfspaces with per-halfspace
// KKT multipliers:
//   input - point = sum_r multipliers[r] * normal_r   (stationarity)
//   multipliers[r] > 0  =>  <normal_r, point> = offset_r   (complementarity)
//   <normal_r, point> <= offset_r                      (feasibility)
struct ProjectionResult {
  Eigen::VectorXd point;
  Eigen::VectorXd multipliers;
  std::vector<int> active_set;  // indices with multiplier > 0
  int iterations = 0;
};

// Dual active-set projection (Lawson-Hanson NNLS on the dual
// min 1/2 l^T FF^T l - (Fx - c)^T l over l >= 0).  Throws InfeasibleError
// when the intersection is empty (dual unbounded, Farkas certificate) and
// NumericalFailure past the 50*(K+1) pivot cap.
ProjectionResult project_polyhedron(const Eigen::VectorXd& x, const PolyhedralSet& set);

// Warmstart Dykstra projection: cyclic single-halfspace Dykstra seeded with
// the given multipliers, swept until the largest per-iterate move in a sweep
// drops below tol (scaled by the observed sweep contraction so the geometric
// tail is accounted for).  Converges to the same point as project_polyhedron.
ProjectionResult project_polyhedron_warmstart(const Eigen::VectorXd& x,
                                              const PolyhedralSet& set,
                                              const Eigen::VectorXd& warm, double tol);

// One dual block of the SHQP step: a set index, its halfspace bundle
// P_i (supersets of C_i), and the multipliers decomposing the block's dual
// vector y_i = sum_r lambda_r f_r over the bundle.
struct DualBlock {
  int set_index = -1;
  std::vector<Halfspace> bundle;
  Eigen::VectorXd lambda;

  Eigen::VectorXd dual_vector() const;
};

// Line 14 of the cycle: exact joint minimizer of
//   1/2 || d - sum_fixed e_i - sum_free y_i ||^2 + sum_free delta*(y_i, P_i)
// over the free blocks, each returned in decomposed multiplier form.  The
// incoming lambdas are the QP warm start.  An unbounded dual (bundles with
// no common feasible point) raises NumericalFailure.
std::vector<DualBlock> shqp_block_minimize(
    const Eigen::VectorXd& d, const std::vector<std::pair<int, Eigen::VectorXd>>& fixed,
    std::vector<DualBlock> free_blocks);

}  // namespace bap

#endif  // BAP_QP_KERNEL_HPP
