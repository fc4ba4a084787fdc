#pragma once

// Empirical verification of the rate statements: the per-cycle dual-decrease
// lower bound, the regularity constant mu of the tight-hyperplane family,
// the asymptotic cycle contraction factor, tail-rate fitting on error
// traces, and the two-phase (large decreases -> linear tail) transition
// detector.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bap/dykstra_core.hpp"
#include "bap/scheduler.hpp"

namespace bap {

// Lower bound on the dual decrease of the next cycle, evaluated from the
// cycle-start state:
//
//   F = max_{i,r} max{ d(x0+, Hs_{i,r}), min{ d(x0+, H_{i,r}), ||y_{i,r}|| } }^2
//       / (2 (2w' - 1))
//
// where x0+ = d - sum_i y_i, Hs is the halfspace, H its boundary hyperplane,
// and y_{i,r} = lambda_{i,r} f_{i,r} runs over the decomposition (base and
// generated halfspaces).  The printed form of the estimate drops the factor
// 1/2; a single-halfspace instance shows that version is off by exactly that
// factor, so the bound implemented here is the one the proof supports.
// Requires a known projection (UnsupportedQuery otherwise) although the
// value itself is shift-invariant.
double decrease_lower_bound(const Instance& inst, const DualState& y, const Schedule& sched);

struct MuOptions {
  int samples = 10'000;
  int refinements = 100;
  std::uint64_t seed = 7103;
  bool parallel = true;
};

struct MuEstimate {
  double value = 0.0;
  int samples = 0;
  int refinements = 0;
  std::uint64_t seed = 0;
  int span_dim = 0;  // dimension of the span of the normals
};

// Estimate of the regularity constant of a family of hyperplanes through a
// common point: mu = min over unit u in span{f_r} of max_r |<f_r, u>|,
// so that max_r d(x, H_r) >= mu * d(x, intersection) for all x.  Dense
// sphere sampling in the span plus coordinate-descent refinement; exact
// Hoffman-constant computation is exponential, so this is an estimate and
// is reported together with its method metadata.
MuEstimate estimate_mu(const std::vector<Eigen::VectorXd>& normals, const MuOptions& options = {});

struct ContractionReport {
  int cycles_checked = 0;  // cycles with finite error data
  int in_phase = 0;        // cycles whose support terms all vanish
  int pass_proven = 0;     // factor sqrt(1 + mu^2/(2w'))
  int pass_printed = 0;    // factor sqrt(1 + mu/(2w'))
  double worst_margin_proven = 0.0;
  double worst_margin_printed = 0.0;
  bool conclusive = false;  // at least one in-phase cycle was available
};

// Checks the terminal-phase contraction sqrt(1 + mu^2/(2w')) ||x_end - x*||
// <= ||x_start - x*|| per cycle.  A cycle counts as in-phase when every
// recorded support term vanishes (multipliers sit on halfspaces through x*).
// The theorem's statement prints mu where its proof derives mu^2; both
// margins are reported, and the report is advisory: the factor hypotheses
// reference the unknown solution, so failures are logged, never asserted.
ContractionReport check_cycle_contraction(const std::vector<CycleTrace>& traces, double mu,
                                          int w_prime);

struct RateFit {
  double rho_hat = 0.0;
  int window_start = 0;  // first cycle index of the fitted window
  int window_end = 0;    // one past the last fitted cycle
  double r_squared = 0.0;
  bool conclusive = false;
};

// 1e2 * machine epsilon * (1 + ||d||): below this, error values reflect
// rounding, not the algorithm.
double default_noise_floor(double d_norm);

// Least-squares fit of log(error) over trailing windows [k0, end) where
// `end` is the first index at or below the noise floor.  The window with
// the best r^2 wins (ties go to the longer window); rho_hat = exp(slope).
// Fewer than 10 usable points -> inconclusive.
RateFit fit_linear_rate(const std::vector<double>& errors, double noise_floor);

struct TransitionEntry {
  double delta2 = 0.0;
  int k_bar = 0;  // first cycle whose dual decrease falls below delta2
};

struct TransitionReport {
  std::vector<TransitionEntry> entries;
  bool has_knee = false;
  double knee_delta2 = 0.0;  // largest delta2 whose k_bar precedes the fit window
  int knee_k_bar = 0;
};

// v_values[k] is the dual value after cycle k (v_values[0] = start).  For
// each delta2, k_bar = min{ k >= 1 : v[k-1] - v[k] < delta2 }, or one past
// the last cycle when every decrease is at least delta2.
TransitionReport detect_transition(const std::vector<double>& v_values,
                                   const std::vector<double>& delta2_grid, int fit_window_start);

struct RateReport {
  std::vector<double> errors;       // ||x_k - x*|| per cycle, index 0 = start
  std::vector<double> v_values;     // dual values per cycle, index 0 = start
  std::vector<double> v_decreases;  // v[k-1] - v[k]
  RateFit fit;
  TransitionReport transition;
};

// Assembles errors and dual values from solve traces, fits the tail rate
// against the instance's noise floor, and locates the phase transition.
RateReport build_rate_report(const Instance& inst, const std::vector<CycleTrace>& traces,
                             const std::vector<double>& delta2_grid);

std::string rate_report_json(const RateReport& report);

// "cycle,err" rows at 17 significant digits, for external plotting.
void write_cycle_errors_csv(const std::string& path, const std::vector<double>& errors);

}  // namespace bap
