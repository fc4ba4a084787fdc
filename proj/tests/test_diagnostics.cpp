#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "bap/diagnostics.hpp"
#include "bap/dykstra_core.hpp"
#include "bap/errors.hpp"
#include "bap/oracle.hpp"
#include "bap/scheduler.hpp"

using bap::brute_force_projection;
using bap::check_cycle_contraction;
using bap::ContractionReport;
using bap::CycleTrace;
using bap::decrease_lower_bound;
using bap::default_noise_floor;
using bap::detect_transition;
using bap::DualState;
using bap::estimate_mu;
using bap::fit_linear_rate;
using bap::Instance;
using bap::make_cyclic;
using bap::MuEstimate;
using bap::MuOptions;
using bap::PolyhedralSet;
using bap::RateFit;
using bap::RateReport;
using bap::run_cycle;
using bap::Schedule;
using bap::ShqpMode;
using bap::ShqpPolicy;
using bap::solve;
using bap::SolveResult;
using bap::SolveStatus;
using bap::StoppingRule;
using bap::StopMode;
using bap::QSelector;
using bap::TraceLevel;
using bap::TransitionReport;

namespace {

Eigen::VectorXd random_unit(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd u(dim);
  double norm = 0.0;
  do {
    for (int j = 0; j < dim; ++j) u[j] = gauss(rng);
    norm = u.norm();
  } while (norm == 0.0);
  return u / norm;
}

Eigen::VectorXd random_vector(int dim, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Eigen::VectorXd u(dim);
  for (int j = 0; j < dim; ++j) u[j] = gauss(rng);
  return u;
}

Instance random_instance(int dim, int m, int max_k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> offset_dist(0.0, 0.4);
  Instance inst;
  inst.dim = dim;
  for (int i = 0; i < m; ++i) {
    PolyhedralSet set;
    const int k = 1 + static_cast<int>(rng() % max_k);
    for (int r = 0; r < k; ++r) {
      set.halfspaces.emplace_back(random_unit(dim, rng), offset_dist(rng));
    }
    inst.sets.push_back(set);
  }
  inst.d = random_vector(dim, rng, 1.5);
  inst.known_projection = brute_force_projection(inst).x_star;
  return inst;
}

// m single-halfspace sets through the origin with d inside the normal cone.
Instance halfspaces_only_instance(int dim, int m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> weight_dist(0.3, 1.0);
  Instance inst;
  inst.dim = dim;
  Eigen::VectorXd d = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < m; ++i) {
    PolyhedralSet set;
    const Eigen::VectorXd f = random_unit(dim, rng);
    set.halfspaces.emplace_back(f, 0.0);
    inst.sets.push_back(set);
    d += weight_dist(rng) * f;
  }
  inst.d = d;
  inst.known_projection = brute_force_projection(inst).x_star;
  return inst;
}

ShqpPolicy policy_off() { return ShqpPolicy{ShqpMode::off, QSelector::none}; }

Eigen::VectorXd angled(double theta) {
  Eigen::VectorXd f(2);
  f << std::cos(theta), std::sin(theta);
  return f;
}

}  // namespace

TEST_CASE("decrease_lower_bound closed forms") {
  // d feasible, y = 0: every distance term vanishes.
  Instance feasible;
  feasible.dim = 2;
  feasible.d = Eigen::Vector2d(-1.0, 0.0);
  PolyhedralSet set;
  set.halfspaces.emplace_back(Eigen::Vector2d(1.0, 0.0), 0.0);
  feasible.sets = {set};
  feasible.known_projection = feasible.d;
  CHECK(decrease_lower_bound(feasible, DualState::zeros(feasible), make_cyclic(1)) == 0.0);

  // y = 0, d outside a single halfspace at distance t.  The first cycle
  // drives the dual value from t^2/2 to 0, so the lower bound must not
  // exceed t^2/2; with w' = 1 it is exactly t^2/(2(2w'-1)) = t^2/2, which is
  // tight.  The same constant is used for every w'.
  const double t = 0.75;
  Instance outside = feasible;
  outside.d = Eigen::Vector2d(t, 0.0);
  outside.known_projection = Eigen::Vector2d(0.0, 0.0);
  const double bound1 = decrease_lower_bound(outside, DualState::zeros(outside), make_cyclic(1));
  CHECK(bound1 == doctest::Approx(t * t / 2.0).epsilon(1e-12));
  // Actual one-cycle decrease equals t^2/2 here, so any larger bound would
  // be wrong.
  const auto [y_one, trace] =
      run_cycle(outside, DualState::zeros(outside), make_cyclic(1), policy_off());
  CHECK(trace.v_start - trace.v_end == doctest::Approx(t * t / 2.0).epsilon(1e-12));
  CHECK(trace.v_start - trace.v_end >= bound1 - 1e-12);

  // Bigger schedules shrink the constant: w' = 3 gives t^2/10.
  Instance padded = outside;
  PolyhedralSet slack_far;
  slack_far.halfspaces.emplace_back(Eigen::Vector2d(0.0, 1.0), 5.0);
  padded.sets.push_back(slack_far);
  padded.sets.push_back(slack_far);
  const double bound3 = decrease_lower_bound(padded, DualState::zeros(padded), make_cyclic(3));
  CHECK(bound3 == doctest::Approx(t * t / 10.0).epsilon(1e-12));

  Instance blind = outside;
  blind.known_projection.reset();
  CHECK_THROWS_AS(decrease_lower_bound(blind, DualState::zeros(blind), make_cyclic(1)),
                  bap::UnsupportedQuery);
}

TEST_CASE("decrease_lower_bound certifies every solver cycle") {
  std::mt19937_64 rng(601);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 2 + static_cast<int>(rng() % 3);
    const Instance inst = random_instance(3, m, 2, rng);
    const Schedule sched = make_cyclic(m);
    DualState y = DualState::zeros(inst);
    for (int cycle = 1; cycle <= 60; ++cycle) {
      const double bound = decrease_lower_bound(inst, y, sched);
      CHECK(bound >= 0.0);
      auto [y_next, trace] = run_cycle(inst, y, sched, policy_off(), cycle, false);
      CHECK(trace.v_start - trace.v_end >= bound - 1e-9);
      y = std::move(y_next);
    }
  }
}

TEST_CASE("estimate_mu closed forms") {
  // A single hyperplane: every unit vector in the span is +/- the normal.
  std::mt19937_64 rng(602);
  const MuEstimate single = estimate_mu({random_unit(4, rng)});
  CHECK(single.value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(single.span_dim == 1);

  // Two orthogonal lines in R^2: worst unit vector is the diagonal.
  const MuEstimate ortho =
      estimate_mu({Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 1.0)});
  CHECK(ortho.value == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
  CHECK(ortho.span_dim == 2);

  // Normals at angle pi/3: mu = sin(pi/6) = 1/2.
  const MuEstimate third = estimate_mu({angled(0.0), angled(M_PI / 3.0)});
  CHECK(third.value == doctest::Approx(0.5).epsilon(1e-6));

  // Normals at angle pi/4: mu = sin(pi/8).
  const MuEstimate eighth = estimate_mu({angled(0.0), angled(M_PI / 4.0)});
  CHECK(eighth.value == doctest::Approx(0.3826834323650898).epsilon(1e-6));

  CHECK_THROWS_AS(estimate_mu({}), bap::ContractViolation);
}

TEST_CASE("estimate_mu metadata, determinism, and parallel equality") {
  std::mt19937_64 rng(603);
  std::vector<Eigen::VectorXd> normals;
  for (int r = 0; r < 3; ++r) normals.push_back(random_unit(5, rng));

  MuOptions options;
  options.samples = 4000;
  options.refinements = 60;
  const MuEstimate a = estimate_mu(normals, options);
  const MuEstimate b = estimate_mu(normals, options);
  CHECK(a.value == b.value);  // bitwise: same seed, same samples
  CHECK(a.samples == options.samples);
  CHECK(a.refinements == options.refinements);
  CHECK(a.seed == options.seed);
  CHECK(a.span_dim == 3);

  MuOptions serial = options;
  serial.parallel = false;
  CHECK(estimate_mu(normals, serial).value == a.value);

  // mu is the min of a max of |cos|: always within [0, 1].
  CHECK(a.value >= 0.0);
  CHECK(a.value <= 1.0);
}

TEST_CASE("estimate_mu is rotation invariant") {
  // The defining formula only involves inner products inside the span, so a
  // common rotation leaves the value unchanged up to refinement accuracy.
  std::mt19937_64 rng(604);
  std::vector<Eigen::VectorXd> normals;
  for (int r = 0; r < 2; ++r) normals.push_back(random_unit(4, rng));

  Eigen::MatrixXd gauss(4, 4);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) gauss(i, j) = dist(rng);
  }
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ();
  std::vector<Eigen::VectorXd> rotated;
  for (const Eigen::VectorXd& f : normals) rotated.push_back(q * f);

  const double base = estimate_mu(normals).value;
  const double turned = estimate_mu(rotated).value;
  CHECK(base == doctest::Approx(turned).epsilon(1e-6));
}

TEST_CASE("mu lower-bounds the max-distance ratio") {
  // max_r d(x, H_r) >= mu * d(x, intersection) on sampled points; each H_r
  // passes through the origin so d(x, H_r) = |<f_r, x>|.
  std::mt19937_64 rng(605);
  std::vector<Eigen::VectorXd> normals;
  for (int r = 0; r < 3; ++r) normals.push_back(random_unit(4, rng));
  const double mu = estimate_mu(normals).value;

  Eigen::MatrixXd stacked(3, 4);
  for (int r = 0; r < 3; ++r) stacked.row(r) = normals[r];
  const auto span = bap::orthonormal_span(stacked.transpose());
  const Eigen::MatrixXd p_span = bap::projector_matrix(span);

  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::VectorXd x = random_vector(4, rng, 2.0);
    double worst = 0.0;
    for (const Eigen::VectorXd& f : normals) worst = std::max(worst, std::abs(f.dot(x)));
    const double dist_inter = (p_span * x).norm();  // intersection = span^perp
    // The sampled mu approaches the true constant from above, so leave room
    // for its refinement accuracy.
    CHECK(worst >= (mu - 1e-5) * dist_inter - 1e-9);
  }
}

TEST_CASE("contraction check on synthetic traces") {
  // Exact geometric error decay with vanishing supports: every cycle is in
  // phase and passes both factors when mu is modest.
  std::vector<CycleTrace> traces;
  double err = 1.0;
  for (int k = 1; k <= 12; ++k) {
    CycleTrace trace;
    trace.cycle = k;
    trace.err_start = err;
    err *= 0.5;
    trace.err_end = err;
    trace.v_start = 0.5 * trace.err_start * trace.err_start;
    trace.v_end = 0.5 * err * err;
    trace.support_end = 0.0;
    traces.push_back(trace);
  }
  const ContractionReport report = check_cycle_contraction(traces, 0.8, 2);
  CHECK(report.conclusive);
  CHECK(report.cycles_checked == 12);
  CHECK(report.in_phase == 12);
  CHECK(report.pass_proven == 12);
  CHECK(report.pass_printed == 12);
  CHECK(report.worst_margin_proven >= 0.0);
  // The printed factor is at least the proven one, so its margins are no
  // better.
  CHECK(report.worst_margin_printed <= report.worst_margin_proven + 1e-15);

  // Nonzero support terms mark cycles as out of phase.
  std::vector<CycleTrace> shifted = traces;
  for (CycleTrace& trace : shifted) trace.support_end = 1.0;
  const ContractionReport out = check_cycle_contraction(shifted, 0.8, 2);
  CHECK(out.in_phase == 0);
  CHECK(!out.conclusive);

  // A stalled error sequence fails the proven factor.
  std::vector<CycleTrace> stalled = traces;
  for (CycleTrace& trace : stalled) trace.err_end = trace.err_start;
  const ContractionReport bad = check_cycle_contraction(stalled, 0.8, 2);
  CHECK(bad.pass_proven == 0);
  CHECK(bad.worst_margin_proven < 0.0);
}

TEST_CASE("contraction check on real halfspace runs") {
  // Halfspace-only instances enter the terminal phase once the active
  // multipliers settle on halfspaces through x*; from there the proven
  // factor must hold cycle by cycle.
  std::mt19937_64 rng(606);
  int conclusive = 0, clean = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const Instance inst = halfspaces_only_instance(3, 3, rng);
    const SolveResult result = solve(inst, make_cyclic(3), policy_off(),
                                     StoppingRule{1e-11, 5'000, StopMode::known_error},
                                     TraceLevel::full);
    REQUIRE(result.status == SolveStatus::converged);

    std::vector<Eigen::VectorXd> normals;
    for (const PolyhedralSet& set : inst.sets) normals.push_back(set.halfspaces[0].normal);
    const double mu = estimate_mu(normals).value;

    const ContractionReport report = check_cycle_contraction(result.traces, mu, 3);
    if (!report.conclusive) continue;
    ++conclusive;
    if (report.pass_proven == report.in_phase) ++clean;
  }
  REQUIRE(conclusive >= 5);
  CHECK(clean == conclusive);
}

TEST_CASE("fit_linear_rate on exact geometric sequences") {
  std::vector<double> errors;
  for (int k = 0; k < 60; ++k) errors.push_back(std::ldexp(1.0, -k));  // 2^-k
  const RateFit fit = fit_linear_rate(errors, 1e-30);
  REQUIRE(fit.conclusive);
  CHECK(std::abs(fit.rho_hat - 0.5) <= 1e-12);
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.window_end == 60);

  // Constant sequences have slope 0: rho_hat = 1, perfect fit.
  const std::vector<double> flat(30, 0.25);
  const RateFit flat_fit = fit_linear_rate(flat, 1e-30);
  REQUIRE(flat_fit.conclusive);
  CHECK(std::abs(flat_fit.rho_hat - 1.0) <= 1e-12);
  CHECK(flat_fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit_linear_rate respects the noise floor and point minimum") {
  // Geometric decay that bottoms out: the plateau must be excluded.
  std::vector<double> errors;
  double e = 1.0;
  for (int k = 0; k < 40; ++k) {
    errors.push_back(std::max(e, 1e-15));
    e *= 0.3;
  }
  const RateFit fit = fit_linear_rate(errors, 1e-12);
  REQUIRE(fit.conclusive);
  CHECK(std::abs(fit.rho_hat - 0.3) <= 1e-9);
  // Window ends at the first below-floor entry: 0.3^k <= 1e-12 at k = 23.
  CHECK(fit.window_end == 23);

  const std::vector<double> tiny(9, 0.5);
  CHECK(!fit_linear_rate(tiny, 1e-30).conclusive);
  CHECK_THROWS_AS(fit_linear_rate(errors, 0.0), bap::ContractViolation);
}

TEST_CASE("fit_linear_rate isolates a late linear tail") {
  // Erratic head, clean tail: the best-r^2 window should land in the tail
  // and recover its ratio.
  std::vector<double> errors = {5.0, 4.9, 1.2, 3.0, 0.9, 2.0};
  double e = 1.0;
  for (int k = 0; k < 30; ++k) {
    errors.push_back(e);
    e *= 0.6;
  }
  const RateFit fit = fit_linear_rate(errors, 1e-30);
  REQUIRE(fit.conclusive);
  CHECK(fit.window_start >= 6);
  CHECK(std::abs(fit.rho_hat - 0.6) <= 1e-9);
}

TEST_CASE("detect_transition flags the first small decrease") {
  // v decreases: 1.0, 0.5, 0.25, ... halving each cycle.
  std::vector<double> v = {2.0, 1.0, 0.5, 0.25, 0.125, 0.0625};
  const TransitionReport report = detect_transition(v, {0.6, 0.3, 1e-3}, 3);
  REQUIRE(report.entries.size() == 3);
  CHECK(report.entries[0].delta2 == 0.6);
  CHECK(report.entries[0].k_bar == 2);  // first decrease below 0.6 is v1-v2 = 0.5
  CHECK(report.entries[1].k_bar == 3);
  // Every decrease is >= 1e-3: k_bar = one past the last cycle.
  CHECK(report.entries[2].k_bar == 6);
  // knee = largest delta2 whose k_bar precedes the fit window start.
  CHECK(report.has_knee);
  CHECK(report.knee_delta2 == 0.6);
  CHECK(report.knee_k_bar == 2);

  const TransitionReport none = detect_transition(v, {1e-6}, 2);
  CHECK(!none.has_knee);
}

TEST_CASE("rate report on a full solver run") {
  std::mt19937_64 rng(607);
  const Instance inst = random_instance(3, 3, 2, rng);
  const SolveResult result = solve(inst, make_cyclic(3), policy_off(),
                                   StoppingRule{1e-12, 20'000, StopMode::known_error},
                                   TraceLevel::cycles);
  REQUIRE(result.status == SolveStatus::converged);

  const std::vector<double> grid = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  const RateReport report = build_rate_report(inst, result.traces, grid);
  REQUIRE(report.errors.size() == result.traces.size() + 1);
  REQUIRE(report.v_values.size() == report.errors.size());
  REQUIRE(report.v_decreases.size() == report.errors.size() - 1);
  CHECK(report.errors[0] == result.traces.front().err_start);
  CHECK(report.errors.back() == result.traces.back().err_end);

  // The dual value never increases along the run.
  for (const double dec : report.v_decreases) CHECK(dec >= -1e-12);

  if (report.fit.conclusive) {
    CHECK(report.fit.rho_hat < 1.0);
    CHECK(report.fit.rho_hat > 0.0);
  }

  // JSON round-trips through nlohmann with the documented keys.
  const std::string text = bap::rate_report_json(report);
  const nlohmann::json parsed = nlohmann::json::parse(text);
  CHECK(parsed.contains("errors"));
  CHECK(parsed.contains("v"));
  CHECK(parsed.contains("v_decreases"));
  CHECK(parsed["fit"].contains("rho_hat"));
  CHECK(parsed["fit"].contains("window"));
  CHECK(parsed["fit"].contains("r_squared"));
  CHECK(parsed["fit"].contains("conclusive"));
  CHECK(parsed["transition"].contains("entries"));
  CHECK(parsed["transition"].contains("has_knee"));
  CHECK(parsed["errors"].size() == report.errors.size());
}

TEST_CASE("write_cycle_errors_csv layout") {
  const std::string path = "/tmp/bap_test_errors.csv";
  bap::write_cycle_errors_csv(path, {1.0, 0.5, 0.125});
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "cycle,err");
  std::getline(in, line);
  CHECK(line == "0,1");
  std::getline(in, line);
  CHECK(line == "1,0.5");
  std::getline(in, line);
  CHECK(line == "2,0.125");
  CHECK(!std::getline(in, line));
  in.close();
  std::remove(path.c_str());
}

TEST_CASE("default_noise_floor scales with the data") {
  const double eps = std::numeric_limits<double>::epsilon();
  CHECK(default_noise_floor(0.0) == doctest::Approx(1e2 * eps).epsilon(1e-12));
  CHECK(default_noise_floor(9.0) == doctest::Approx(1e3 * eps).epsilon(1e-12));
}
