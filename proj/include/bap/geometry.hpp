#ifndef BAP_GEOMETRY_HPP
#define BAP_GEOMETRY_HPP

#include <Eigen/Core>
#include <limits>
#include <vector>

#include "bap/errors.hpp"

namespace bap {

// Offset value encoding the trivial halfspace equal to the whole space.
inline constexpr double kInfiniteOffset = std::numeric_limits<double>::infinity();

// Tolerance for the unit-normal invariant of Halfspace.
inline constexpr double kUnitNormTol = 1e-12;

// tau_ray: relative tolerance for deciding whether a vector is a nonnegative
// multiple of a halfspace normal (exact ray membership is measure-zero in
// floating point).
inline constexpr double kRayTol = 1e-9;

// tau_angle: singular values within this of 1 are treated as intersection
// directions when deflating M cap N in the Friedrichs angle.
inline constexpr double kAngleTol = 1e-8;

// Closed halfspace {x : <normal, x> <= offset} with ||normal|| = 1.
// offset = +infinity encodes the whole space.
struct Halfspace {
  Eigen::VectorXd normal;
  double offset = kInfiniteOffset;

  // Validates the unit-normal invariant.
  Halfspace(Eigen::VectorXd normal_in, double offset_in);

  // Builds {x : <direction, x> <= rhs} from an unnormalized direction,
  // scaling both sides by 1/||direction||.
  static Halfspace through(const Eigen::VectorXd& direction, double rhs);

  bool is_trivial() const { return offset == kInfiniteOffset; }
  int dim() const { return static_cast<int>(normal.size()); }
};

// Ordered intersection of halfspaces; a single set C_i of the instance.
struct PolyhedralSet {
  std::vector<Halfspace> halfspaces;

  int size() const { return static_cast<int>(halfspaces.size()); }
  int dim() const;

  bool contains(const Eigen::VectorXd& x, double tol = kRayTol) const;
};

// P_{H}(x): closed-form projection onto a halfspace.
Eigen::VectorXd project_halfspace(const Eigen::VectorXd& x, const Halfspace& h);

// delta*(y, H): offset * lambda if y = lambda * normal with lambda >= 0,
// 0 at y = 0, +infinity otherwise (slabs are unbounded off the normal ray).
double support_halfspace(const Eigen::VectorXd& y, const Halfspace& h);

// Support value of y = sum_r lambda_r f_r under the decomposition
// convention: sum_r lambda_r c_r.  +infinity if any positive multiplier
// sits on a trivial (infinite-offset) halfspace.
double support_decomposed(const Eigen::VectorXd& multipliers, const PolyhedralSet& set);

// Linear subspace represented by an orthonormal basis; zero columns
// represent the trivial subspace {0}.
struct SubspaceBasis {
  Eigen::MatrixXd columns;

  explicit SubspaceBasis(Eigen::MatrixXd cols);

  int ambient_dim() const { return static_cast<int>(columns.rows()); }
  int dim() const { return static_cast<int>(columns.cols()); }
};

// Orthonormal basis of the column span (rank decided at `tol`).
SubspaceBasis orthonormal_span(const Eigen::MatrixXd& vectors, double tol = 1e-10);

// Intersection of subspaces via the nullspace of sum_i (I - P_i).
SubspaceBasis intersect_subspaces(const std::vector<SubspaceBasis>& subspaces);

// Orthogonal projector matrix B B^T of a basis.
Eigen::MatrixXd projector_matrix(const SubspaceBasis& basis);

// Cosine of the Friedrichs angle c(M, N): largest principal-angle cosine
// after deflating M cap N (singular values >= 1 - kAngleTol).
double friedrichs_angle(const SubspaceBasis& m, const SubspaceBasis& n);

// alpha = sqrt(1 - prod_{l=2}^{k} (1 - c^2(M_l, M_1 cap ... cap M_{l-1}))),
// the contraction constant of the product of projectors (Deutsch-Hundal).
double dh97_alpha(const std::vector<SubspaceBasis>& subspaces);

// Spectral norm ||A||_2 estimated by power iteration on A^T A with seeded
// restarts.  Only ever underestimates, so "estimate <= bound" checks are
// conservative.
double power_iteration_norm(const Eigen::MatrixXd& a, int iterations = 500,
                            int restarts = 4, unsigned seed = 12345);

}  // namespace bap

#endif  // BAP_GEOMETRY_HPP
