#pragma once

// Independent ground-truth computations used by the tests.  Nothing here
// shares code with qp_kernel or dykstra_core: projections are obtained by
// enumerating candidate active sets, and the lasso reference is a proximal
// coordinate-descent loop.  Deliberately slow and simple.

#include <cstdint>

#include <Eigen/Dense>

#include "bap/dykstra_core.hpp"
#include "bap/lasso_adapter.hpp"

namespace bap {

struct ProjectionCertificate {
  Eigen::VectorXd x_star;
  // One multiplier per finite halfspace, stacked set by set in declaration
  // order; zero outside the winning active set.
  Eigen::VectorXd multipliers;
  std::vector<int> active;  // indices into the stacked constraint list
  std::uint64_t subsets_checked = 0;
};

// Exact projection of inst.d onto the intersection of all sets, found by
// solving the equality-constrained least-distance problem for every subset
// of the stacked finite constraints and keeping the KKT-consistent feasible
// candidate (ties: smallest multiplier norm, then smallest subset mask).
// Requires at most 20 finite constraints in total (UnsupportedScale), and
// throws InfeasibleError when no candidate survives.  `parallel` only
// distributes the enumeration; results are identical either way.
ProjectionCertificate brute_force_projection(const Instance& inst, bool parallel = true);

// Max over sampled feasible x of <d - x*, x - x*>; the variational
// inequality characterizing the projection makes this <= 0 up to roundoff.
// Samples are drawn on feasible segments emanating from x*.
double variational_inequality_margin(const Instance& inst, const Eigen::VectorXd& x_star,
                                     int samples = 1000, std::uint64_t seed = 33550336);

struct LassoReference {
  Eigen::VectorXd x;
  double objective = 0.0;
  int sweeps = 0;
};

// Proximal coordinate descent with soft-thresholding, run until the
// coordinate-wise KKT residual drops below tol.  Throws NumericalFailure
// (carrying the best iterate) if the sweep cap is exceeded.
LassoReference lasso_reference(const LassoProblem& p, double tol);

// Max over a sampled perturbation family { ||b~ - b||_inf <= delta2,
// ||d~ - d|| <= delta2 } of ||P_S(d) - P_S~(d~)|| where S = {z : Az <= b},
// projections via brute force.  Rows of A must be linearly independent
// (ContractViolation otherwise), which also keeps every perturbed system
// feasible.  The family is a fixed seeded direction set scaled by a fixed
// geometric ladder of magnitudes <= delta2, so the sample sets for two
// radii are nested and the returned displacement is monotone in delta2.
double sensitivity_probe(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                         const Eigen::VectorXd& d, double delta2, bool parallel = true);

}  // namespace bap
