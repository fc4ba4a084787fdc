#pragma once

// Reduction of the least-squares lasso problem
//
//   min_x 1/2 ||A x - b||^2 + lambda ||x||_1
//
// to a best-approximation problem: project d = b onto the intersection of the
// slabs S_i = { z : |<a_i, z>| <= lambda/||A_i|| } with a_i = A_i/||A_i||, one
// slab per column of A.  The dual variable y_i of slab i carries the signed
// coefficient: y_i = x_i ||A_i|| a_i, so x_i = <y_i, a_i> / ||A_i||.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bap/dykstra_core.hpp"
#include "bap/geometry.hpp"

namespace bap {

struct LassoProblem {
  Eigen::MatrixXd A;  // m x n, no zero column
  Eigen::VectorXd b;  // length m
  double lambda = 0.0;

  int rows() const { return static_cast<int>(A.rows()); }
  int cols() const { return static_cast<int>(A.cols()); }
};

// Throws ContractViolation on a zero column, non-positive lambda, or a
// b/A row-count mismatch.  Column indices in messages are 1-based to match
// the set indexing used by the solver.
void validate_lasso(const LassoProblem& p);

// One slab S_i, kept as (axis, half_width) alongside its 2-halfspace form.
struct SlabSet {
  Eigen::VectorXd axis;     // unit vector A_i/||A_i||
  double half_width = 0.0;  // lambda/||A_i||

  // { <axis, z> <= half_width, <-axis, z> <= half_width }, in that order.
  PolyhedralSet as_polyhedron() const;
};

SlabSet slab_for_column(const LassoProblem& p, int column);

// d = b, sets = slabs S_1..S_n; known_projection left empty.
Instance to_dual_bap(const LassoProblem& p);

// x_i = <y_i, axis_i> / ||A_i||.  Each y_i must be parallel to its axis
// (within kRayTol); a transverse component signals a solver bug and raises
// ConsistencyError.
Eigen::VectorXd recover_x(const LassoProblem& p, const DualState& y);

// 1/2 ||A x - b||^2 + lambda ||x||_1.
double lasso_objective(const LassoProblem& p, const Eigen::VectorXd& x);

// Plain CSV, one row per line, comma-separated, no header.  Throws ParseError
// naming the offending line.  A vector file must be a single column or a
// single row.
Eigen::MatrixXd read_matrix_csv(const std::string& path);
Eigen::VectorXd read_vector_csv(const std::string& path);

}  // namespace bap
