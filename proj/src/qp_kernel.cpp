#include "bap/qp_kernel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace bap {

namespace {

// Nonnegative quadratic program  min 1/2 l^T G l - h^T l  s.t. l >= 0,
// with G = F F^T (rows of F are unit normals) and h = F x - c.  This is the
// Fenchel dual of projecting x onto {z : F z <= c}; the projection is
// x - F^T l.  Lawson-Hanson active-set iteration with:
//   * minimum-norm passive solves (COD pseudoinverse) so degenerate active
//     normals get a deterministic multiplier decomposition,
//   * Bland smallest-index tie-breaking on entering variables,
//   * a nullspace ray branch when the passive system is inconsistent, which
//     either walks a coordinate to zero or certifies primal infeasibility
//     (u >= 0 in null(F_P^T) with c_P^T u < 0 is a Farkas certificate).
Eigen::VectorXd nnls_dual_active_set(const Eigen::MatrixXd& f, const Eigen::VectorXd& c,
                                     const Eigen::VectorXd& x, Eigen::VectorXd lambda,
                                     int pivot_cap, int* iterations_out) {
  const int t = static_cast<int>(f.rows());
  const Eigen::MatrixXd g = f * f.transpose();
  const Eigen::VectorXd h = f * x - c;

  const double scale = 1.0 + (h.size() > 0 ? h.cwiseAbs().maxCoeff() : 0.0);
  const double enter_tol = 1e-12 * scale;
  const double solve_tol = 1e-11 * scale;

  lambda = lambda.cwiseMax(0.0);
  std::vector<bool> passive(t, false);
  int passive_count = 0;
  for (int r = 0; r < t; ++r) {
    if (lambda[r] > 0.0) {
      passive[r] = true;
      ++passive_count;
    }
  }

  int iters = 0;
  // A warm start must first re-solve its passive system before optimality
  // can be judged.
  bool need_inner = passive_count > 0;

  auto fail = [&](const char* what) {
    std::ostringstream msg;
    msg << what << " after " << iters << " pivots";
    throw NumericalFailure(msg.str(), x - f.transpose() * lambda);
  };

  while (true) {
    if (!need_inner) {
      // Entering step: most violated dual gradient; the ascending scan with a
      // strict comparison gives Bland's smallest-index rule on ties.
      const Eigen::VectorXd w = h - g * lambda;
      int enter = -1;
      double best = enter_tol;
      for (int r = 0; r < t; ++r) {
        if (passive[r]) continue;
        if (w[r] > best) {
          best = w[r];
          enter = r;
        }
      }
      if (enter < 0) break;  // KKT satisfied
      passive[enter] = true;
      ++passive_count;
    }
    need_inner = false;

    // Inner loop: restore lambda_P to the (clipped) passive minimizer.
    while (true) {
      if (++iters > pivot_cap) fail("projection active-set pivot cap exceeded");
      if (passive_count == 0) break;

      std::vector<int> idx;
      idx.reserve(passive_count);
      for (int r = 0; r < t; ++r) {
        if (passive[r]) idx.push_back(r);
      }
      const int p = static_cast<int>(idx.size());
      Eigen::MatrixXd gpp(p, p);
      Eigen::VectorXd hp(p);
      for (int a = 0; a < p; ++a) {
        hp[a] = h[idx[a]];
        for (int b = 0; b < p; ++b) gpp(a, b) = g(idx[a], idx[b]);
      }
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gpp);
      const Eigen::VectorXd z = cod.solve(hp);
      const Eigen::VectorXd residual = gpp * z - hp;

      if (residual.norm() > solve_tol) {
        // Inconsistent system: r := hp - gpp z lies in null(gpp) and is a
        // strict descent ray for the dual.  Walk until a coordinate hits
        // zero; if none can, the dual is unbounded and the primal is empty.
        const Eigen::VectorXd u = -residual;
        double step = std::numeric_limits<double>::infinity();
        int leave = -1;
        for (int a = 0; a < p; ++a) {
          if (u[a] < -1e-14 * scale) {
            const double tstep = -lambda[idx[a]] / u[a];
            if (tstep < step) {
              step = tstep;
              leave = a;
            }
          }
        }
        if (leave < 0) {
          throw InfeasibleError(
              "project_polyhedron: halfspace intersection is empty (unbounded dual)");
        }
        for (int a = 0; a < p; ++a) lambda[idx[a]] += step * u[a];
        lambda[idx[leave]] = 0.0;
        passive[idx[leave]] = false;
        --passive_count;
        for (int a = 0; a < p; ++a) {
          if (lambda[idx[a]] <= 0.0 && passive[idx[a]]) {
            lambda[idx[a]] = 0.0;
            // keep in passive unless exactly the leaver; tiny negatives clamp
          }
        }
        continue;
      }

      bool interior = true;
      for (int a = 0; a < p; ++a) {
        if (z[a] < -1e-14 * scale) {
          interior = false;
          break;
        }
      }
      if (interior) {
        for (int r = 0; r < t; ++r) lambda[r] = 0.0;
        for (int a = 0; a < p; ++a) lambda[idx[a]] = std::max(z[a], 0.0);
        break;
      }

      // Step from lambda_P toward z until the first coordinate reaches zero.
      double step = 1.0;
      for (int a = 0; a < p; ++a) {
        if (z[a] < -1e-14 * scale) {
          const double denom = lambda[idx[a]] - z[a];
          if (denom > 0.0) step = std::min(step, lambda[idx[a]] / denom);
        }
      }
      for (int a = 0; a < p; ++a) {
        lambda[idx[a]] += step * (z[a] - lambda[idx[a]]);
      }
      for (int a = 0; a < p; ++a) {
        if (lambda[idx[a]] <= 1e-14 * scale) {
          lambda[idx[a]] = 0.0;
          if (passive[idx[a]]) {
            passive[idx[a]] = false;
            --passive_count;
          }
        }
      }
    }
  }

  if (iterations_out) *iterations_out = iters;
  return lambda.cwiseMax(0.0);
}

// Indices of the non-trivial (finite-offset) halfspaces.
std::vector<int> finite_indices(const PolyhedralSet& set) {
  std::vector<int> idx;
  idx.reserve(set.halfspaces.size());
  for (int r = 0; r < set.size(); ++r) {
    if (!set.halfspaces[r].is_trivial()) idx.push_back(r);
  }
  return idx;
}

std::vector<int> positive_support(const Eigen::VectorXd& lambda) {
  std::vector<int> active;
  for (int r = 0; r < lambda.size(); ++r) {
    if (lambda[r] > 0.0) active.push_back(r);
  }
  return active;
}

}  // namespace

ProjectionResult project_polyhedron(const Eigen::VectorXd& x, const PolyhedralSet& set) {
  const int n = set.dim();
  if (x.size() != n) {
    throw DimensionMismatch("project_polyhedron: point dimension mismatch");
  }
  const std::vector<int> finite = finite_indices(set);
  ProjectionResult result;
  result.multipliers = Eigen::VectorXd::Zero(set.size());

  // Fast path: at most one violated halfspace.
  int violated = -1;
  int violated_count = 0;
  for (int r : finite) {
    const Halfspace& h = set.halfspaces[r];
    if (h.normal.size() != n) {
      throw DimensionMismatch("project_polyhedron: mixed halfspace dimensions");
    }
    if (h.normal.dot(x) - h.offset > 0.0) {
      violated = r;
      ++violated_count;
    }
  }
  if (violated_count == 0) {
    result.point = x;
    return result;
  }
  if (violated_count == 1) {
    const Halfspace& h = set.halfspaces[violated];
    const double v = h.normal.dot(x) - h.offset;
    Eigen::VectorXd candidate = x - v * h.normal;
    bool feasible = true;
    for (int r : finite) {
      if (r == violated) continue;
      if (set.halfspaces[r].normal.dot(candidate) > set.halfspaces[r].offset) {
        feasible = false;
        break;
      }
    }
    if (feasible) {
      result.point = std::move(candidate);
      result.multipliers[violated] = v;
      result.active_set.push_back(violated);
      result.iterations = 1;
      return result;
    }
  }

  const int tf = static_cast<int>(finite.size());
  Eigen::MatrixXd f(tf, n);
  Eigen::VectorXd c(tf);
  for (int a = 0; a < tf; ++a) {
    f.row(a) = set.halfspaces[finite[a]].normal.transpose();
    c[a] = set.halfspaces[finite[a]].offset;
  }
  int iters = 0;
  const Eigen::VectorXd lambda = nnls_dual_active_set(
      f, c, x, Eigen::VectorXd::Zero(tf), 50 * (set.size() + 1), &iters);
  result.point = x - f.transpose() * lambda;
  for (int a = 0; a < tf; ++a) result.multipliers[finite[a]] = lambda[a];
  result.active_set = positive_support(result.multipliers);
  result.iterations = iters;
  return result;
}

ProjectionResult project_polyhedron_warmstart(const Eigen::VectorXd& x,
                                              const PolyhedralSet& set,
                                              const Eigen::VectorXd& warm, double tol) {
  const int n = set.dim();
  if (x.size() != n) {
    throw DimensionMismatch("project_polyhedron_warmstart: point dimension mismatch");
  }
  if (warm.size() != set.size()) {
    throw DimensionMismatch("project_polyhedron_warmstart: one warm multiplier per halfspace");
  }
  if (!(tol > 0.0)) {
    throw ContractViolation("project_polyhedron_warmstart: tol must be positive");
  }
  if ((warm.array() < -kRayTol).any()) {
    throw ContractViolation("project_polyhedron_warmstart: negative warm multiplier");
  }

  const int k = set.size();
  Eigen::VectorXd lambda = warm.cwiseMax(0.0);
  Eigen::VectorXd current = x;
  for (int r = 0; r < k; ++r) current -= lambda[r] * set.halfspaces[r].normal;

  constexpr int kSweepCap = 10'000;
  double prev_move = -1.0;
  double contraction = 0.0;  // max of recent sweep-to-sweep move ratios
  int sweeps = 0;
  for (; sweeps < kSweepCap; ++sweeps) {
    double max_move = 0.0;
    for (int r = 0; r < k; ++r) {
      const Halfspace& h = set.halfspaces[r];
      const Eigen::VectorXd z = current + lambda[r] * h.normal;
      double lam_new = 0.0;
      if (!h.is_trivial()) {
        lam_new = std::max(0.0, h.normal.dot(z) - h.offset);
      }
      const Eigen::VectorXd next = z - lam_new * h.normal;
      max_move = std::max(max_move, (next - current).norm());
      current = next;
      lambda[r] = lam_new;
    }
    if (prev_move > 0.0) {
      contraction = std::min(max_move / prev_move, 0.9999);
    }
    prev_move = max_move;
    // Sweep moves contract roughly geometrically; scale the threshold by the
    // observed rate so the remaining tail sum stays below ~tol.
    const double effective = tol * std::clamp(1.0 - contraction, 1.0 / 1024.0, 1.0);
    if (sweeps >= 1 && max_move < effective) {
      ++sweeps;
      break;
    }
  }
  if (sweeps >= kSweepCap) {
    throw NumericalFailure("project_polyhedron_warmstart: sweep cap exceeded", current);
  }

  ProjectionResult result;
  result.point = std::move(current);
  result.multipliers = std::move(lambda);
  result.active_set = positive_support(result.multipliers);
  result.iterations = sweeps;
  return result;
}

Eigen::VectorXd DualBlock::dual_vector() const {
  if (bundle.empty()) {
    throw ContractViolation("DualBlock: empty bundle");
  }
  if (lambda.size() != static_cast<int>(bundle.size())) {
    throw DimensionMismatch("DualBlock: one multiplier per bundle halfspace");
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(bundle.front().dim());
  for (int r = 0; r < lambda.size(); ++r) {
    y += lambda[r] * bundle[r].normal;
  }
  return y;
}

std::vector<DualBlock> shqp_block_minimize(
    const Eigen::VectorXd& d, const std::vector<std::pair<int, Eigen::VectorXd>>& fixed,
    std::vector<DualBlock> free_blocks) {
  if (free_blocks.empty()) return free_blocks;
  const int n = static_cast<int>(d.size());

  Eigen::VectorXd b = d;
  for (const auto& [index, e] : fixed) {
    if (e.size() != n) {
      throw DimensionMismatch("shqp_block_minimize: fixed dual vector dimension mismatch");
    }
    b -= e;
  }

  // Stack the finite halfspaces of every free bundle into one joint QP.
  struct Slot {
    int block;
    int local;
  };
  std::vector<Slot> slots;
  for (int bi = 0; bi < static_cast<int>(free_blocks.size()); ++bi) {
    DualBlock& block = free_blocks[bi];
    if (block.lambda.size() != static_cast<int>(block.bundle.size())) {
      throw DimensionMismatch("shqp_block_minimize: one multiplier per bundle halfspace");
    }
    if ((block.lambda.array() < -kRayTol).any()) {
      throw ContractViolation("shqp_block_minimize: negative incoming multiplier");
    }
    for (int r = 0; r < static_cast<int>(block.bundle.size()); ++r) {
      if (block.bundle[r].dim() != n) {
        throw DimensionMismatch("shqp_block_minimize: bundle halfspace dimension mismatch");
      }
      if (!block.bundle[r].is_trivial()) slots.push_back({bi, r});
    }
  }

  const int t = static_cast<int>(slots.size());
  Eigen::MatrixXd f(t, n);
  Eigen::VectorXd c(t);
  Eigen::VectorXd init(t);
  for (int a = 0; a < t; ++a) {
    const Halfspace& h = free_blocks[slots[a].block].bundle[slots[a].local];
    f.row(a) = h.normal.transpose();
    c[a] = h.offset;
    init[a] = std::max(0.0, free_blocks[slots[a].block].lambda[slots[a].local]);
  }

  Eigen::VectorXd lambda;
  try {
    lambda = nnls_dual_active_set(f, c, b, init, 50 * (t + 1), nullptr);
  } catch (const InfeasibleError& err) {
    // The bundles are supposed to share a feasible point (they all contain
    // C_i); an unbounded dual here is a numerical breakdown, not bad input.
    throw NumericalFailure(std::string("shqp_block_minimize: ") + err.what(), b);
  }

  for (DualBlock& block : free_blocks) block.lambda.setZero();
  for (int a = 0; a < t; ++a) {
    free_blocks[slots[a].block].lambda[slots[a].local] = lambda[a];
  }
  return free_blocks;
}

}  // namespace bap
