#ifndef BAP_DYKSTRA_CORE_HPP
#define BAP_DYKSTRA_CORE_HPP

#include <Eigen/Core>
#include <optional>
#include <utility>
#include <vector>

#include "bap/geometry.hpp"
#include "bap/qp_kernel.hpp"
#include "bap/scheduler.hpp"

namespace bap {

// One best-approximation problem: project d onto C_1 cap ... cap C_m.
// known_projection carries x* = P_C(d) for test instances.
struct Instance {
  int dim = 0;
  Eigen::VectorXd d;
  std::vector<PolyhedralSet> sets;
  std::optional<Eigen::VectorXd> known_projection;

  int m() const { return static_cast<int>(sets.size()); }
};

// Structural validation (dimensions, unit normals are enforced by Halfspace).
void validate_instance(const Instance& inst);

// Dual variables of one set, stored only in decomposed multiplier form:
// y_i = sum_r base_lambda[r] * f_{i,r} + sum_r gen_lambda[r] * g_{i,r}
// over the set's halfspaces plus any SHQP-generated supporting halfspaces.
struct SetDual {
  Eigen::VectorXd base_lambda;
  std::vector<Halfspace> generated;
  Eigen::VectorXd gen_lambda;
};

struct DualState {
  std::vector<SetDual> sets;

  static DualState zeros(const Instance& inst);

  // y_i reconstructed from the decomposition.
  Eigen::VectorXd dual_vector(const Instance& inst, int set_index) const;
  // sum_i y_i (so the primal iterate is d - sum).
  Eigen::VectorXd dual_sum(const Instance& inst) const;
  // delta*(y_i, C_i - x*) under the decomposition convention:
  // sum_r lambda_r * (c_r - <f_r, x*>).
  double support_shifted(const Instance& inst, int set_index,
                         const Eigen::VectorXd& x_star) const;
};

enum class ShqpMode { off, last_halfspace, accumulate };

// Q_j selector: none = pure Dykstra, visited = all sets visited so far this
// cycle (every step), every_m = the visited sets but only every m-th step.
enum class QSelector { none, visited, every_m };

struct ShqpPolicy {
  ShqpMode mode = ShqpMode::off;
  QSelector q_selector = QSelector::visited;

  // Retained generated halfspaces per set: the most recent one in
  // last_halfspace mode, a bounded window in accumulate mode.
  int max_generated() const { return mode == ShqpMode::last_halfspace ? 1 : 8; }
};

// Per-step record: dual values after the projection substep (v_circ) and
// after the SHQP substep (v_plus), the two step norms the decrease
// inequalities quantify, and the shifted support total used for phase
// detection.  Dual-dependent fields are NaN when x* is unknown.
struct StepRecord {
  int j = 0;
  int set_index = 0;
  double v_circ = 0.0;
  double v_plus = 0.0;
  double step_proj = 0.0;  // ||x_j^o - x_{j-1}^+||
  double step_shqp = 0.0;  // ||x_j^+ - x_j^o||
  double support_shifted = 0.0;
  Eigen::VectorXd x_circ;
  Eigen::VectorXd x_plus;
};

struct CycleTrace {
  int cycle = 0;
  double v_start = 0.0;
  double v_end = 0.0;
  double err_start = 0.0;
  double err_end = 0.0;
  // sum_i delta*(y_i, C_i - x*) at cycle end; NaN without a known projection.
  double support_end = 0.0;
  Eigen::VectorXd x_end;
  std::vector<StepRecord> steps;
};

// One almost-cyclic cycle (Algorithm 2, lines 05-17).  The dual value is
// nonincreasing across every substep; primal-dual consistency
// x_j^+ = d - sum_i e_{pi(j,i),j+1} is verified at each step and a breach
// raises ConsistencyError naming the step.
std::pair<DualState, CycleTrace> run_cycle(const Instance& inst, const DualState& y_in,
                                           const Schedule& sched, const ShqpPolicy& policy,
                                           int cycle_index = 0, bool record_steps = true);

enum class SolveStatus { converged, unconverged };
enum class StopMode {
  auto_rule,      // known_error when x* is present, else primal_change
  primal_change,  // ||x_k - x_{k-1}|| <= tol * (1 + ||d||)
  known_error     // ||x_k - x*|| <= tol
};

struct StoppingRule {
  double tol = 1e-8;
  int max_cycles = 10'000;
  StopMode mode = StopMode::auto_rule;
};

enum class TraceLevel { off, cycles, full };

struct SolveResult {
  Eigen::VectorXd x;
  DualState y;
  std::vector<CycleTrace> traces;
  SolveStatus status = SolveStatus::unconverged;
  int cycles = 0;
};

// Outer loop (Algorithm 1): iterate run_cycle from y0 (zeros or a warmstart)
// until the stopping rule fires.  Exceeding max_cycles returns status
// unconverged with the best iterate, not an exception.
SolveResult solve(const Instance& inst, const Schedule& sched, const ShqpPolicy& policy,
                  const StoppingRule& stop, TraceLevel trace_level = TraceLevel::full,
                  const DualState* warmstart = nullptr);

// v(y) = 1/2 ||d - x* - sum y_i||^2 + sum_i delta*(y_i, C_i - x*), evaluated
// with the decomposed multipliers.  Requires inst.known_projection.
double dual_value(const Instance& inst, const DualState& y);

}  // namespace bap

#endif  // BAP_DYKSTRA_CORE_HPP
