#include "bap/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace bap {

Halfspace::Halfspace(Eigen::VectorXd normal_in, double offset_in)
    : normal(std::move(normal_in)), offset(offset_in) {
  if (normal.size() == 0) {
    throw ContractViolation("Halfspace: empty normal");
  }
  const double nrm = normal.norm();
  if (std::abs(nrm - 1.0) > kUnitNormTol) {
    std::ostringstream msg;
    msg << "Halfspace: normal must be unit length, got ||f|| = " << nrm;
    throw ContractViolation(msg.str());
  }
}

Halfspace Halfspace::through(const Eigen::VectorXd& direction, double rhs) {
  const double nrm = direction.norm();
  if (nrm <= 0.0 || !std::isfinite(nrm)) {
    throw ContractViolation("Halfspace::through: direction must be nonzero and finite");
  }
  if (rhs == kInfiniteOffset) {
    return Halfspace(direction / nrm, kInfiniteOffset);
  }
  return Halfspace(direction / nrm, rhs / nrm);
}

int PolyhedralSet::dim() const {
  if (halfspaces.empty()) {
    throw ContractViolation("PolyhedralSet: no halfspaces");
  }
  return halfspaces.front().dim();
}

bool PolyhedralSet::contains(const Eigen::VectorXd& x, double tol) const {
  for (const Halfspace& h : halfspaces) {
    if (h.is_trivial()) continue;
    if (h.normal.dot(x) > h.offset + tol) return false;
  }
  return true;
}

Eigen::VectorXd project_halfspace(const Eigen::VectorXd& x, const Halfspace& h) {
  if (x.size() != h.normal.size()) {
    throw DimensionMismatch("project_halfspace: point and normal dimensions differ");
  }
  if (h.is_trivial()) return x;
  const double violation = h.normal.dot(x) - h.offset;
  if (violation <= 0.0) return x;
  return x - violation * h.normal;
}

double support_halfspace(const Eigen::VectorXd& y, const Halfspace& h) {
  if (y.size() != h.normal.size()) {
    throw DimensionMismatch("support_halfspace: vector and normal dimensions differ");
  }
  const double ynorm = y.norm();
  if (ynorm == 0.0) return 0.0;
  // y is a nonnegative multiple of the normal iff <y, f> = ||y|| (unit f).
  const double along = y.dot(h.normal);
  if (std::abs(along - ynorm) <= kRayTol * ynorm) {
    if (h.is_trivial()) return std::numeric_limits<double>::infinity();
    return along * h.offset;
  }
  return std::numeric_limits<double>::infinity();
}

double support_decomposed(const Eigen::VectorXd& multipliers, const PolyhedralSet& set) {
  if (multipliers.size() != set.size()) {
    throw DimensionMismatch("support_decomposed: one multiplier per halfspace required");
  }
  double total = 0.0;
  for (int r = 0; r < set.size(); ++r) {
    const double lam = multipliers[r];
    if (lam < -kRayTol) {
      throw ContractViolation("support_decomposed: negative multiplier");
    }
    if (set.halfspaces[r].is_trivial()) {
      if (lam > kRayTol) return std::numeric_limits<double>::infinity();
      continue;
    }
    total += lam * set.halfspaces[r].offset;
  }
  return total;
}

SubspaceBasis::SubspaceBasis(Eigen::MatrixXd cols) : columns(std::move(cols)) {
  if (columns.rows() == 0) {
    throw ContractViolation("SubspaceBasis: ambient dimension zero");
  }
  if (columns.cols() == 0) return;  // the subspace {0}
  const Eigen::MatrixXd gram = columns.transpose() * columns;
  const double defect =
      (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
  if (defect > 1e-10) {
    std::ostringstream msg;
    msg << "SubspaceBasis: columns not orthonormal (defect " << defect << ")";
    throw ContractViolation(msg.str());
  }
}

SubspaceBasis orthonormal_span(const Eigen::MatrixXd& vectors, double tol) {
  if (vectors.rows() == 0) {
    throw ContractViolation("orthonormal_span: ambient dimension zero");
  }
  if (vectors.cols() == 0) {
    return SubspaceBasis(Eigen::MatrixXd(vectors.rows(), 0));
  }
  // SVD-based span extraction: left singular vectors of above-tolerance
  // singular values.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(vectors, Eigen::ComputeThinU);
  const double scale = svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()[i] > tol * std::max(1.0, scale)) ++rank;
  }
  return SubspaceBasis(svd.matrixU().leftCols(rank));
}

Eigen::MatrixXd projector_matrix(const SubspaceBasis& basis) {
  if (basis.dim() == 0) {
    return Eigen::MatrixXd::Zero(basis.ambient_dim(), basis.ambient_dim());
  }
  return basis.columns * basis.columns.transpose();
}

SubspaceBasis intersect_subspaces(const std::vector<SubspaceBasis>& subspaces) {
  if (subspaces.empty()) {
    throw ContractViolation("intersect_subspaces: empty list");
  }
  const int n = subspaces.front().ambient_dim();
  for (const SubspaceBasis& s : subspaces) {
    if (s.ambient_dim() != n) {
      throw DimensionMismatch("intersect_subspaces: mixed ambient dimensions");
    }
  }
  // x is in every subspace iff sum_i (I - P_i) x = 0; the sum is PSD so its
  // nullspace (eigenvalues below tolerance) is exactly the intersection.
  Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(n, n);
  for (const SubspaceBasis& s : subspaces) {
    accum += Eigen::MatrixXd::Identity(n, n) - projector_matrix(s);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(accum);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  int null_dim = 0;
  for (int i = 0; i < n; ++i) {
    if (eig.eigenvalues()[i] < 1e-10 * scale) ++null_dim;
  }
  // Eigenvalues are ascending, so the nullspace occupies the leading columns.
  return SubspaceBasis(eig.eigenvectors().leftCols(null_dim));
}

double friedrichs_angle(const SubspaceBasis& m, const SubspaceBasis& n) {
  if (m.ambient_dim() != n.ambient_dim()) {
    throw DimensionMismatch("friedrichs_angle: mixed ambient dimensions");
  }
  if (m.dim() == 0 || n.dim() == 0) return 0.0;  // {0} is contained in anything
  // Principal-angle cosines are the singular values of M^T N; the ones equal
  // to 1 correspond to M cap N and are deflated away.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.columns.transpose() * n.columns);
  double best = 0.0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    const double sigma = std::min(svd.singularValues()[i], 1.0);
    if (sigma >= 1.0 - kAngleTol) continue;
    best = std::max(best, sigma);
  }
  return best;
}

double dh97_alpha(const std::vector<SubspaceBasis>& subspaces) {
  if (subspaces.empty()) {
    throw ContractViolation("dh97_alpha: empty list");
  }
  const int n = subspaces.front().ambient_dim();
  for (const SubspaceBasis& s : subspaces) {
    if (s.ambient_dim() != n) {
      throw DimensionMismatch("dh97_alpha: mixed ambient dimensions");
    }
  }
  const int k = static_cast<int>(subspaces.size());
  double product = 1.0;
  std::vector<SubspaceBasis> prefix{subspaces[0]};
  for (int l = 1; l < k; ++l) {
    const SubspaceBasis inter = intersect_subspaces(prefix);
    const double c = friedrichs_angle(subspaces[l], inter);
    product *= 1.0 - c * c;
    prefix.push_back(subspaces[l]);
  }
  return std::sqrt(std::max(0.0, 1.0 - product));
}

double power_iteration_norm(const Eigen::MatrixXd& a, int iterations, int restarts,
                            unsigned seed) {
  if (a.size() == 0) {
    throw ContractViolation("power_iteration_norm: empty matrix");
  }
  const Eigen::MatrixXd ata = a.transpose() * a;
  const int n = static_cast<int>(ata.rows());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double best = 0.0;
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    double vnorm = v.norm();
    if (vnorm == 0.0) continue;
    v /= vnorm;
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
      Eigen::VectorXd w = ata * v;
      const double wnorm = w.norm();
      if (wnorm == 0.0) {
        lambda = 0.0;
        break;
      }
      lambda = v.dot(w);
      v = w / wnorm;
    }
    best = std::max(best, std::sqrt(std::max(0.0, lambda)));
  }
  return best;
}

}  // namespace bap
