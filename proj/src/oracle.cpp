#include "bap/oracle.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "bap/errors.hpp"

namespace bap {

namespace {

constexpr int kEnumerationCap = 20;

// All finite halfspaces of the instance stacked into one row system.
struct StackedConstraints {
  Eigen::MatrixXd f;  // T x n, unit rows
  Eigen::VectorXd c;  // length T
};

StackedConstraints stack_finite(const Instance& inst) {
  int count = 0;
  for (const PolyhedralSet& set : inst.sets) {
    for (const Halfspace& h : set.halfspaces) {
      if (!h.is_trivial()) ++count;
    }
  }
  StackedConstraints sc;
  sc.f.resize(count, inst.dim);
  sc.c.resize(count);
  int t = 0;
  for (const PolyhedralSet& set : inst.sets) {
    for (const Halfspace& h : set.halfspaces) {
      if (h.is_trivial()) continue;
      sc.f.row(t) = h.normal.transpose();
      sc.c[t] = h.offset;
      ++t;
    }
  }
  return sc;
}

// Least-distance candidate for one active subset: minimize 1/2||x-d||^2
// subject to F_S x = c_S, via the min-norm multiplier solve
// (F_S F_S^T) nu = F_S d - c_S.  Returns the multiplier norm if the
// candidate is KKT-consistent and globally feasible, +inf otherwise.
double evaluate_subset(const StackedConstraints& sc, const Eigen::VectorXd& d,
                       std::int64_t mask, double tol, Eigen::VectorXd* x_out,
                       Eigen::VectorXd* nu_out, std::vector<int>* rows_out) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const int t_count = static_cast<int>(sc.f.rows());
  std::vector<int> rows;
  for (int t = 0; t < t_count; ++t) {
    if (mask & (std::int64_t{1} << t)) rows.push_back(t);
  }
  const int k = static_cast<int>(rows.size());
  Eigen::VectorXd x = d;
  Eigen::VectorXd nu(k);
  if (k > 0) {
    Eigen::MatrixXd fs(k, d.size());
    Eigen::VectorXd cs(k);
    for (int r = 0; r < k; ++r) {
      fs.row(r) = sc.f.row(rows[r]);
      cs[r] = sc.c[rows[r]];
    }
    const Eigen::MatrixXd gram = fs * fs.transpose();
    nu = gram.completeOrthogonalDecomposition().solve(fs * d - cs);
    x = d - fs.transpose() * nu;
    // Inconsistent equality subsets leave a residual under the min-norm
    // solve; they are not candidates.
    if ((fs * x - cs).cwiseAbs().maxCoeff() > tol) return kInf;
    if (nu.minCoeff() < -tol) return kInf;
  }
  if (t_count > 0 && (sc.f * x - sc.c).maxCoeff() > tol) return kInf;
  if (x_out) *x_out = x;
  if (nu_out) *nu_out = nu;
  if (rows_out) *rows_out = rows;
  return k > 0 ? nu.norm() : 0.0;
}

}  // namespace

ProjectionCertificate brute_force_projection(const Instance& inst, bool parallel) {
  validate_instance(inst);
  const StackedConstraints sc = stack_finite(inst);
  const int t_count = static_cast<int>(sc.f.rows());
  if (t_count > kEnumerationCap) {
    throw UnsupportedScale("brute_force_projection: " + std::to_string(t_count) +
                           " constraints exceed the enumeration cap of " +
                           std::to_string(kEnumerationCap));
  }
  const double tol = 1e-9 * (1.0 + inst.d.norm());
  const std::int64_t mask_count = std::int64_t{1} << t_count;

  std::vector<double> score(static_cast<std::size_t>(mask_count));
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t mask = 0; mask < mask_count; ++mask) {
      score[static_cast<std::size_t>(mask)] =
          evaluate_subset(sc, inst.d, mask, tol, nullptr, nullptr, nullptr);
    }
  } else {
    for (std::int64_t mask = 0; mask < mask_count; ++mask) {
      score[static_cast<std::size_t>(mask)] =
          evaluate_subset(sc, inst.d, mask, tol, nullptr, nullptr, nullptr);
    }
  }

  // Smallest multiplier norm wins; the ascending scan breaks exact ties
  // toward the lexicographically smallest subset.
  std::int64_t best_mask = -1;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::int64_t mask = 0; mask < mask_count; ++mask) {
    const double s = score[static_cast<std::size_t>(mask)];
    if (s < best_score) {
      best_score = s;
      best_mask = mask;
    }
  }
  if (best_mask < 0) {
    throw InfeasibleError(
        "brute_force_projection: no KKT-consistent feasible candidate; "
        "the intersection is empty");
  }

  ProjectionCertificate cert;
  Eigen::VectorXd nu;
  std::vector<int> rows;
  evaluate_subset(sc, inst.d, best_mask, tol, &cert.x_star, &nu, &rows);
  cert.multipliers = Eigen::VectorXd::Zero(t_count);
  for (int r = 0; r < static_cast<int>(rows.size()); ++r) cert.multipliers[rows[r]] = nu[r];
  cert.active = rows;
  cert.subsets_checked = static_cast<std::uint64_t>(mask_count);
  return cert;
}

double variational_inequality_margin(const Instance& inst, const Eigen::VectorXd& x_star,
                                     int samples, std::uint64_t seed) {
  validate_instance(inst);
  if (x_star.size() != inst.dim) {
    throw DimensionMismatch("variational_inequality_margin: x* has wrong dimension");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Eigen::VectorXd residual = inst.d - x_star;
  const double reach = 10.0 * (1.0 + residual.norm());

  double margin = 0.0;  // x = x* itself attains 0
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd u(inst.dim);
    for (int j = 0; j < inst.dim; ++j) u[j] = gauss(rng);
    const double norm = u.norm();
    if (norm == 0.0) continue;
    u /= norm;
    // Longest feasible step from x* along u, capped for unbounded directions.
    double t_max = reach;
    for (const PolyhedralSet& set : inst.sets) {
      for (const Halfspace& h : set.halfspaces) {
        if (h.is_trivial()) continue;
        const double du = h.normal.dot(u);
        if (du <= 1e-15) continue;
        const double slack = std::max(0.0, h.offset - h.normal.dot(x_star));
        t_max = std::min(t_max, slack / du);
      }
    }
    const double t = 0.999 * t_max * unif(rng);
    margin = std::max(margin, t * residual.dot(u));
  }
  return margin;
}

LassoReference lasso_reference(const LassoProblem& p, double tol) {
  validate_lasso(p);
  if (!(tol > 0.0)) throw ContractViolation("lasso_reference: tol must be positive");
  const int n = p.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = p.b;  // residual b - A x
  Eigen::VectorXd col_sq(n);
  for (int i = 0; i < n; ++i) col_sq[i] = p.A.col(i).squaredNorm();

  constexpr int kSweepCap = 50000;
  for (int sweep = 1; sweep <= kSweepCap; ++sweep) {
    for (int i = 0; i < n; ++i) {
      const double cand = x[i] + p.A.col(i).dot(r) / col_sq[i];
      const double thr = p.lambda / col_sq[i];
      const double next = std::copysign(std::max(0.0, std::abs(cand) - thr), cand);
      const double delta = next - x[i];
      if (delta != 0.0) {
        r -= p.A.col(i) * delta;
        x[i] = next;
      }
    }
    // Refresh the residual before the optimality check so incremental drift
    // cannot fake convergence.
    r = p.b - p.A * x;
    const Eigen::VectorXd g = -p.A.transpose() * r;  // gradient of the smooth part
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      double viol;
      if (x[i] > 0.0) {
        viol = std::abs(g[i] + p.lambda);
      } else if (x[i] < 0.0) {
        viol = std::abs(g[i] - p.lambda);
      } else {
        viol = std::max(0.0, std::abs(g[i]) - p.lambda);
      }
      worst = std::max(worst, viol);
    }
    if (worst < tol) {
      return LassoReference{x, lasso_objective(p, x), sweep};
    }
  }
  throw NumericalFailure("lasso_reference: no convergence within " +
                             std::to_string(kSweepCap) + " sweeps",
                         x);
}

namespace {

// Fixed seeded perturbation directions: sign corners for b (inf-ball
// extremes) paired with unit directions for d.
struct PerturbationDirections {
  std::vector<Eigen::VectorXd> b_signs;  // entries in {-1,+1}
  std::vector<Eigen::VectorXd> d_dirs;   // unit 2-norm
};

PerturbationDirections make_directions(int rows, int dim) {
  PerturbationDirections dirs;
  std::mt19937_64 rng(0x5EED0917ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);

  dirs.b_signs.push_back(Eigen::VectorXd::Constant(rows, 1.0));
  dirs.b_signs.push_back(Eigen::VectorXd::Constant(rows, -1.0));
  const int corner_budget = std::min<std::int64_t>(std::int64_t{1} << rows, 8);
  while (static_cast<int>(dirs.b_signs.size()) < corner_budget) {
    Eigen::VectorXd s(rows);
    for (int r = 0; r < rows; ++r) s[r] = coin(rng) ? 1.0 : -1.0;
    dirs.b_signs.push_back(s);
  }

  for (int j = 0; j < std::min(dim, 3); ++j) {
    dirs.d_dirs.push_back(Eigen::VectorXd::Unit(dim, j));
    dirs.d_dirs.push_back(-Eigen::VectorXd::Unit(dim, j));
  }
  while (static_cast<int>(dirs.d_dirs.size()) < 8) {
    Eigen::VectorXd u(dim);
    for (int j = 0; j < dim; ++j) u[j] = gauss(rng);
    if (u.norm() == 0.0) continue;
    dirs.d_dirs.push_back(u / u.norm());
  }
  return dirs;
}

Instance row_system_instance(const Eigen::MatrixXd& a, const Eigen::VectorXd& row_norms,
                            const Eigen::VectorXd& b, const Eigen::VectorXd& d) {
  Instance inst;
  inst.dim = static_cast<int>(a.cols());
  inst.d = d;
  PolyhedralSet set;
  for (int r = 0; r < a.rows(); ++r) {
    set.halfspaces.emplace_back(Eigen::VectorXd(a.row(r).transpose() / row_norms[r]),
                                b[r] / row_norms[r]);
  }
  inst.sets.push_back(std::move(set));
  return inst;
}

}  // namespace

double sensitivity_probe(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                         const Eigen::VectorXd& d, double delta2, bool parallel) {
  if (a.rows() == 0 || a.cols() == 0) {
    throw ContractViolation("sensitivity_probe: A is empty");
  }
  if (b.size() != a.rows() || d.size() != a.cols()) {
    throw DimensionMismatch("sensitivity_probe: size mismatch between A, b, d");
  }
  if (!(delta2 >= 0.0)) throw ContractViolation("sensitivity_probe: delta2 must be >= 0");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const double sigma_max = svd.singularValues()[0];
  const double sigma_min = svd.singularValues()[svd.singularValues().size() - 1];
  if (a.rows() > a.cols() || sigma_min <= 1e-10 * std::max(1.0, sigma_max)) {
    throw ContractViolation("sensitivity_probe: rows of A must be linearly independent");
  }
  Eigen::VectorXd row_norms(a.rows());
  for (int r = 0; r < a.rows(); ++r) row_norms[r] = a.row(r).norm();

  const Eigen::VectorXd x_base =
      brute_force_projection(row_system_instance(a, row_norms, b, d), false).x_star;

  // Magnitude ladder fixed in absolute terms so the sample families for two
  // radii are nested: probe(delta') uses a subset of probe(delta)'s samples
  // whenever delta' <= delta, making the sweep monotone by construction.
  std::vector<double> scales;
  for (int j = 0; j < 47; ++j) {
    const double t = std::ldexp(1.0, -j);  // 1, 1/2, 1/4, ...
    if (t <= delta2) scales.push_back(t);
  }

  const PerturbationDirections dirs =
      make_directions(static_cast<int>(a.rows()), static_cast<int>(a.cols()));
  struct Item {
    int sb;
    int ud;
    double t;
  };
  std::vector<Item> items;
  for (int sb = 0; sb < static_cast<int>(dirs.b_signs.size()); ++sb) {
    for (int ud = 0; ud < static_cast<int>(dirs.d_dirs.size()); ++ud) {
      for (double t : scales) items.push_back(Item{sb, ud, t});
    }
  }

  std::vector<double> displacement(items.size(), 0.0);
  auto evaluate = [&](std::size_t k) {
    const Item& item = items[k];
    const Eigen::VectorXd b_pert = b + item.t * dirs.b_signs[item.sb];
    const Eigen::VectorXd d_pert = d + item.t * dirs.d_dirs[item.ud];
    const Eigen::VectorXd x_pert =
        brute_force_projection(row_system_instance(a, row_norms, b_pert, d_pert), false).x_star;
    displacement[k] = (x_pert - x_base).norm();
  };
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < items.size(); ++k) evaluate(k);
  } else {
    for (std::size_t k = 0; k < items.size(); ++k) evaluate(k);
  }

  double worst = 0.0;
  for (double v : displacement) worst = std::max(worst, v);
  return worst;
}

}  // namespace bap
