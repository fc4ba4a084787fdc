#include "bap/dykstra_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bap {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double dual_value_or_nan(const Instance& inst, const DualState& y) {
  if (!inst.known_projection) return kNan;
  return dual_value(inst, y);
}

double error_or_nan(const Instance& inst, const Eigen::VectorXd& x) {
  if (!inst.known_projection) return kNan;
  return (x - *inst.known_projection).norm();
}

double support_total_or_nan(const Instance& inst, const DualState& y) {
  if (!inst.known_projection) return kNan;
  double total = 0.0;
  for (int i = 0; i < inst.m(); ++i) {
    total += y.support_shifted(inst, i, *inst.known_projection);
  }
  return total;
}

// Records the supporting halfspace {x : <e,x> <= <e, point>} generated by a
// projection with residual e and foot point `point` (the support of C_i at e
// is attained there).  Near-duplicates of existing bundle members are
// skipped; the retention window drops the oldest zero-multiplier entries.
void push_generated(const PolyhedralSet& base, SetDual& dual, const Eigen::VectorXd& e,
                    const Eigen::VectorXd& point, int capacity) {
  const double enorm = e.norm();
  if (enorm <= 1e-12 * (1.0 + point.norm())) return;
  const Halfspace fresh = Halfspace::through(e, e.dot(point));

  auto same = [&](const Halfspace& h) {
    return !h.is_trivial() &&
           (h.normal - fresh.normal).cwiseAbs().maxCoeff() <= 1e-12 &&
           std::abs(h.offset - fresh.offset) <= 1e-12 * (1.0 + std::abs(fresh.offset));
  };
  for (const Halfspace& h : base.halfspaces) {
    if (same(h)) return;
  }
  for (const Halfspace& h : dual.generated) {
    if (same(h)) return;
  }

  dual.generated.push_back(fresh);
  Eigen::VectorXd grown(dual.gen_lambda.size() + 1);
  grown << dual.gen_lambda, 0.0;
  dual.gen_lambda = std::move(grown);

  // Eviction is only ever needed right after a projection, when every
  // generated multiplier is zero, so dropping from the front is safe.
  while (static_cast<int>(dual.generated.size()) > capacity) {
    if (dual.gen_lambda[0] != 0.0) break;
    dual.generated.erase(dual.generated.begin());
    dual.gen_lambda = dual.gen_lambda.tail(dual.gen_lambda.size() - 1).eval();
  }
}

}  // namespace

void validate_instance(const Instance& inst) {
  if (inst.dim < 1) {
    throw ContractViolation("Instance: dimension must be positive");
  }
  if (inst.d.size() != inst.dim) {
    throw DimensionMismatch("Instance: anchor point dimension mismatch");
  }
  if (inst.sets.empty()) {
    throw ContractViolation("Instance: need at least one set");
  }
  for (const PolyhedralSet& set : inst.sets) {
    if (set.size() < 1) {
      throw ContractViolation("Instance: every set needs at least one halfspace");
    }
    for (const Halfspace& h : set.halfspaces) {
      if (h.dim() != inst.dim) {
        throw DimensionMismatch("Instance: halfspace dimension mismatch");
      }
    }
  }
  if (inst.known_projection && inst.known_projection->size() != inst.dim) {
    throw DimensionMismatch("Instance: known projection dimension mismatch");
  }
}

DualState DualState::zeros(const Instance& inst) {
  DualState state;
  state.sets.resize(inst.sets.size());
  for (int i = 0; i < inst.m(); ++i) {
    state.sets[i].base_lambda = Eigen::VectorXd::Zero(inst.sets[i].size());
    state.sets[i].gen_lambda = Eigen::VectorXd(0);
  }
  return state;
}

Eigen::VectorXd DualState::dual_vector(const Instance& inst, int set_index) const {
  const SetDual& dual = sets[set_index];
  const PolyhedralSet& base = inst.sets[set_index];
  if (dual.base_lambda.size() != base.size() ||
      dual.gen_lambda.size() != static_cast<int>(dual.generated.size())) {
    throw DimensionMismatch("DualState: multiplier count mismatch");
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(inst.dim);
  for (int r = 0; r < base.size(); ++r) {
    if (dual.base_lambda[r] != 0.0) y += dual.base_lambda[r] * base.halfspaces[r].normal;
  }
  for (int r = 0; r < static_cast<int>(dual.generated.size()); ++r) {
    if (dual.gen_lambda[r] != 0.0) y += dual.gen_lambda[r] * dual.generated[r].normal;
  }
  return y;
}

Eigen::VectorXd DualState::dual_sum(const Instance& inst) const {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(inst.dim);
  for (int i = 0; i < inst.m(); ++i) total += dual_vector(inst, i);
  return total;
}

double DualState::support_shifted(const Instance& inst, int set_index,
                                  const Eigen::VectorXd& x_star) const {
  const SetDual& dual = sets[set_index];
  const PolyhedralSet& base = inst.sets[set_index];
  double total = 0.0;
  auto accumulate = [&](const Halfspace& h, double lam) {
    if (lam < -kRayTol) {
      throw ContractViolation("DualState: negative multiplier");
    }
    if (h.is_trivial()) {
      if (lam > kRayTol) total = std::numeric_limits<double>::infinity();
      return;
    }
    total += lam * (h.offset - h.normal.dot(x_star));
  };
  for (int r = 0; r < base.size(); ++r) accumulate(base.halfspaces[r], dual.base_lambda[r]);
  for (int r = 0; r < static_cast<int>(dual.generated.size()); ++r) {
    accumulate(dual.generated[r], dual.gen_lambda[r]);
  }
  return total;
}

double dual_value(const Instance& inst, const DualState& y) {
  if (!inst.known_projection) {
    throw UnsupportedQuery("dual_value: instance carries no known projection");
  }
  const Eigen::VectorXd& x_star = *inst.known_projection;
  const Eigen::VectorXd residual = inst.d - x_star - y.dual_sum(inst);
  double value = 0.5 * residual.squaredNorm();
  for (int i = 0; i < inst.m(); ++i) {
    value += y.support_shifted(inst, i, x_star);
  }
  return value;
}

std::pair<DualState, CycleTrace> run_cycle(const Instance& inst, const DualState& y_in,
                                           const Schedule& sched, const ShqpPolicy& policy,
                                           int cycle_index, bool record_steps) {
  if (sched.m != inst.m()) {
    throw ContractViolation("run_cycle: schedule set count differs from instance");
  }
  DualState state = y_in;
  const Eigen::VectorXd& d = inst.d;
  const double consistency_tol = 1e-9 * (1.0 + d.norm());

  Eigen::VectorXd x_plus = d - state.dual_sum(inst);  // x_0^+

  CycleTrace trace;
  trace.cycle = cycle_index;
  trace.v_start = dual_value_or_nan(inst, state);
  trace.err_start = error_or_nan(inst, x_plus);
  if (record_steps) trace.steps.reserve(sched.w_prime);

  std::vector<bool> visited(inst.m(), false);

  for (int j = 1; j <= sched.w_prime; ++j) {
    const int set_index = sched.s(j) - 1;
    visited[set_index] = true;

    // Lines 08-10: project z = x_{j-1}^+ + e_{p(j),j} onto C_{s(j)}; the KKT
    // multipliers are the new decomposition of this set's dual vector.
    const Eigen::VectorXd e_prev = state.dual_vector(inst, set_index);
    const Eigen::VectorXd z = x_plus + e_prev;
    const ProjectionResult projection = project_polyhedron(z, inst.sets[set_index]);
    const Eigen::VectorXd& x_circ = projection.point;
    const Eigen::VectorXd e_new = z - x_circ;

    state.sets[set_index].base_lambda = projection.multipliers;
    state.sets[set_index].gen_lambda.setZero();

    const double step_proj = (x_circ - x_plus).norm();

    if ((d - state.dual_sum(inst) - x_circ).norm() > consistency_tol) {
      std::ostringstream msg;
      msg << "run_cycle: primal-dual consistency breached after projection at step " << j;
      throw ConsistencyError(msg.str());
    }

    const double v_circ = dual_value_or_nan(inst, state);

    // Lines 11-15: SHQP greedy step over the chosen Q_j.
    double step_shqp = 0.0;
    Eigen::VectorXd x_next = x_circ;
    if (policy.mode != ShqpMode::off) {
      push_generated(inst.sets[set_index], state.sets[set_index], e_new, x_circ,
                     policy.max_generated());

      std::vector<int> q;
      if (policy.q_selector == QSelector::visited ||
          (policy.q_selector == QSelector::every_m && j % inst.m() == 0)) {
        for (int i = 0; i < inst.m(); ++i) {
          if (visited[i]) q.push_back(i);
        }
      }

      if (!q.empty()) {
        std::vector<std::pair<int, Eigen::VectorXd>> fixed;
        std::vector<DualBlock> free_blocks;
        for (int i = 0; i < inst.m(); ++i) {
          if (std::find(q.begin(), q.end(), i) != q.end()) {
            DualBlock block;
            block.set_index = i;
            block.bundle = inst.sets[i].halfspaces;
            block.bundle.insert(block.bundle.end(), state.sets[i].generated.begin(),
                                state.sets[i].generated.end());
            block.lambda.resize(block.bundle.size());
            block.lambda.head(inst.sets[i].size()) = state.sets[i].base_lambda;
            block.lambda.tail(state.sets[i].gen_lambda.size()) = state.sets[i].gen_lambda;
            free_blocks.push_back(std::move(block));
          } else {
            fixed.emplace_back(i, state.dual_vector(inst, i));
          }
        }

        free_blocks = shqp_block_minimize(d, fixed, std::move(free_blocks));
        for (const DualBlock& block : free_blocks) {
          const int base_count = inst.sets[block.set_index].size();
          state.sets[block.set_index].base_lambda = block.lambda.head(base_count);
          state.sets[block.set_index].gen_lambda =
              block.lambda.tail(block.lambda.size() - base_count);
        }

        x_next = d - state.dual_sum(inst);
        step_shqp = (x_next - x_circ).norm();
      }
    }

    const double v_plus = dual_value_or_nan(inst, state);

    if (record_steps) {
      StepRecord record;
      record.j = j;
      record.set_index = set_index + 1;
      record.v_circ = v_circ;
      record.v_plus = v_plus;
      record.step_proj = step_proj;
      record.step_shqp = step_shqp;
      record.support_shifted = support_total_or_nan(inst, state);
      record.x_circ = x_circ;
      record.x_plus = x_next;
      trace.steps.push_back(std::move(record));
    }

    x_plus = std::move(x_next);
    trace.v_end = v_plus;
  }

  trace.err_end = error_or_nan(inst, x_plus);
  trace.x_end = std::move(x_plus);
  trace.support_end = support_total_or_nan(inst, state);
  if (sched.w_prime == 0) trace.v_end = trace.v_start;
  return {std::move(state), std::move(trace)};
}

SolveResult solve(const Instance& inst, const Schedule& sched, const ShqpPolicy& policy,
                  const StoppingRule& stop, TraceLevel trace_level,
                  const DualState* warmstart) {
  validate_instance(inst);
  SolveResult result;
  result.y = warmstart ? *warmstart : DualState::zeros(inst);
  result.x = inst.d - result.y.dual_sum(inst);

  const bool use_known = stop.mode == StopMode::known_error ||
                         (stop.mode == StopMode::auto_rule && inst.known_projection);
  if (use_known && !inst.known_projection) {
    throw UnsupportedQuery("solve: known-error stopping needs a known projection");
  }

  // Cycle-0 convergence: already at x* (known), or d feasible with zero duals.
  if (use_known) {
    if ((result.x - *inst.known_projection).norm() <= stop.tol) {
      result.status = SolveStatus::converged;
      return result;
    }
  } else if (result.y.dual_sum(inst).norm() == 0.0) {
    bool feasible = true;
    for (const PolyhedralSet& set : inst.sets) {
      if (!set.contains(inst.d, 0.0)) {
        feasible = false;
        break;
      }
    }
    if (feasible) {
      result.status = SolveStatus::converged;
      return result;
    }
  }

  Eigen::VectorXd prev_x = result.x;
  for (int cycle = 1; cycle <= stop.max_cycles; ++cycle) {
    auto [next_state, trace] = run_cycle(inst, result.y, sched, policy, cycle,
                                         trace_level == TraceLevel::full);
    result.y = std::move(next_state);
    result.x = trace.x_end;
    result.cycles = cycle;
    if (trace_level != TraceLevel::off) {
      result.traces.push_back(std::move(trace));
    }

    bool converged = false;
    if (use_known) {
      converged = (result.x - *inst.known_projection).norm() <= stop.tol;
    } else {
      converged = (result.x - prev_x).norm() <= stop.tol * (1.0 + inst.d.norm());
    }
    if (converged) {
      result.status = SolveStatus::converged;
      return result;
    }
    prev_x = result.x;
  }
  result.status = SolveStatus::unconverged;
  return result;
}

}  // namespace bap
