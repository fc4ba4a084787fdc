#include "bap/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "bap/errors.hpp"
#include "bap/geometry.hpp"

namespace bap {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

double decrease_lower_bound(const Instance& inst, const DualState& y, const Schedule& sched) {
  validate_instance(inst);
  if (!inst.known_projection) {
    throw UnsupportedQuery("decrease_lower_bound: requires a known projection");
  }
  if (sched.m != inst.m() || static_cast<int>(y.sets.size()) != inst.m()) {
    throw DimensionMismatch("decrease_lower_bound: schedule/state/instance size mismatch");
  }
  const Eigen::VectorXd x0 = inst.d - y.dual_sum(inst);

  double worst = 0.0;
  auto accumulate = [&](const Halfspace& h, double lambda) {
    if (h.is_trivial()) return;  // whole-space halfspace: zero distance, zero multiplier
    if (lambda < -kRayTol) {
      throw ContractViolation("decrease_lower_bound: negative multiplier in decomposition");
    }
    const double signed_dist = h.normal.dot(x0) - h.offset;
    const double dist_halfspace = std::max(0.0, signed_dist);
    const double dist_hyperplane = std::abs(signed_dist);
    const double norm_y = std::max(0.0, lambda);  // ||lambda f|| with unit f
    const double score = std::max(dist_halfspace, std::min(dist_hyperplane, norm_y));
    worst = std::max(worst, score * score);
  };
  for (int i = 0; i < inst.m(); ++i) {
    const SetDual& dual = y.sets[i];
    const PolyhedralSet& base = inst.sets[i];
    if (dual.base_lambda.size() != base.size() ||
        dual.gen_lambda.size() != static_cast<int>(dual.generated.size())) {
      throw DimensionMismatch("decrease_lower_bound: multiplier count mismatch");
    }
    for (int r = 0; r < base.size(); ++r) accumulate(base.halfspaces[r], dual.base_lambda[r]);
    for (int r = 0; r < static_cast<int>(dual.generated.size()); ++r) {
      accumulate(dual.generated[r], dual.gen_lambda[r]);
    }
  }
  return worst / (2.0 * (2.0 * sched.w_prime - 1.0));
}

MuEstimate estimate_mu(const std::vector<Eigen::VectorXd>& normals, const MuOptions& options) {
  if (normals.empty()) throw ContractViolation("estimate_mu: empty hyperplane family");
  if (options.samples < 1 || options.refinements < 0) {
    throw ContractViolation("estimate_mu: invalid sampling options");
  }
  const int dim = static_cast<int>(normals.front().size());
  Eigen::MatrixXd f(normals.size(), dim);
  for (int r = 0; r < static_cast<int>(normals.size()); ++r) {
    if (normals[r].size() != dim) throw DimensionMismatch("estimate_mu: mixed dimensions");
    const double norm = normals[r].norm();
    if (norm == 0.0) throw ContractViolation("estimate_mu: zero normal");
    f.row(r) = normals[r].transpose() / norm;
  }

  // The ratio max_r d(x,H_r) / d(x, cap H_r) depends only on the component
  // of x in L = span{f_r}; on the unit sphere of L it is max_r |<f_r, u>|.
  const SubspaceBasis span = orthonormal_span(f.transpose());
  const int k = static_cast<int>(span.columns.cols());
  const Eigen::MatrixXd m = f * span.columns;  // rows f_r in span coordinates

  const auto value_at = [&](const Eigen::VectorXd& q) {
    return (m * q).cwiseAbs().maxCoeff();
  };

  // Coordinates are drawn serially so the parallel evaluation cannot change
  // the sampled points; selection is a serial argmin, first index wins.
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd samples(k, options.samples);
  for (int s = 0; s < options.samples; ++s) {
    Eigen::VectorXd q(k);
    do {
      for (int j = 0; j < k; ++j) q[j] = gauss(rng);
    } while (q.norm() == 0.0);
    samples.col(s) = q / q.norm();
  }
  std::vector<double> values(options.samples);
  if (options.parallel) {
#pragma omp parallel for schedule(static)
    for (int s = 0; s < options.samples; ++s) values[s] = value_at(samples.col(s));
  } else {
    for (int s = 0; s < options.samples; ++s) values[s] = value_at(samples.col(s));
  }
  int best = 0;
  for (int s = 1; s < options.samples; ++s) {
    if (values[s] < values[best]) best = s;
  }

  // Coordinate descent on the sphere, shrinking the step when a full pass
  // over +/- coordinate moves yields no improvement.
  Eigen::VectorXd q = samples.col(best);
  double current = values[best];
  double step = 0.25;
  for (int it = 0; it < options.refinements; ++it) {
    bool improved = false;
    for (int j = 0; j < k; ++j) {
      for (double sign : {1.0, -1.0}) {
        Eigen::VectorXd trial = q + sign * step * Eigen::VectorXd::Unit(k, j);
        const double norm = trial.norm();
        if (norm == 0.0) continue;
        trial /= norm;
        const double v = value_at(trial);
        if (v < current) {
          q = trial;
          current = v;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }

  MuEstimate estimate;
  estimate.value = current;
  estimate.samples = options.samples;
  estimate.refinements = options.refinements;
  estimate.seed = options.seed;
  estimate.span_dim = k;
  return estimate;
}

ContractionReport check_cycle_contraction(const std::vector<CycleTrace>& traces, double mu,
                                          int w_prime) {
  if (!(mu >= 0.0)) throw ContractViolation("check_cycle_contraction: mu must be >= 0");
  if (w_prime < 1) throw ContractViolation("check_cycle_contraction: w' must be >= 1");
  ContractionReport report;
  if (traces.empty()) return report;

  const double phase_tol = 1e-9 * (1.0 + traces.front().v_start);
  const double factor_proven = std::sqrt(1.0 + mu * mu / (2.0 * w_prime));
  const double factor_printed = std::sqrt(1.0 + mu / (2.0 * w_prime));
  double worst_proven = std::numeric_limits<double>::infinity();
  double worst_printed = std::numeric_limits<double>::infinity();

  for (const CycleTrace& trace : traces) {
    if (!std::isfinite(trace.err_start) || !std::isfinite(trace.err_end)) continue;
    ++report.cycles_checked;
    double support = trace.support_end;
    for (const StepRecord& step : trace.steps) {
      support = std::max(support, step.support_shifted);
    }
    if (!std::isfinite(support) || support > phase_tol) continue;
    ++report.in_phase;

    const double slack = 1e-9 * (1.0 + trace.err_start);
    const double margin_proven = trace.err_start - factor_proven * trace.err_end;
    const double margin_printed = trace.err_start - factor_printed * trace.err_end;
    if (margin_proven >= -slack) ++report.pass_proven;
    if (margin_printed >= -slack) ++report.pass_printed;
    worst_proven = std::min(worst_proven, margin_proven);
    worst_printed = std::min(worst_printed, margin_printed);
  }
  report.conclusive = report.in_phase > 0;
  report.worst_margin_proven = report.conclusive ? worst_proven : kNan;
  report.worst_margin_printed = report.conclusive ? worst_printed : kNan;
  return report;
}

double default_noise_floor(double d_norm) {
  return 1e2 * std::numeric_limits<double>::epsilon() * (1.0 + d_norm);
}

RateFit fit_linear_rate(const std::vector<double>& errors, double noise_floor) {
  if (!(noise_floor > 0.0)) throw ContractViolation("fit_linear_rate: noise floor must be > 0");
  RateFit fit;
  fit.rho_hat = kNan;
  fit.r_squared = kNan;

  int end = static_cast<int>(errors.size());
  for (int i = 0; i < static_cast<int>(errors.size()); ++i) {
    if (!(errors[i] > noise_floor)) {
      end = i;
      break;
    }
  }
  constexpr int kMinPoints = 10;
  if (end < kMinPoints) return fit;  // inconclusive

  // Prefix sums in extended precision; a window [k0, end) then costs O(1).
  std::vector<long double> sx(end + 1, 0.0L), sxx(end + 1, 0.0L), sy(end + 1, 0.0L),
      sxy(end + 1, 0.0L), syy(end + 1, 0.0L);
  for (int i = 0; i < end; ++i) {
    const long double x = i;
    const long double y = std::log(errors[i]);
    sx[i + 1] = sx[i] + x;
    sxx[i + 1] = sxx[i] + x * x;
    sy[i + 1] = sy[i] + y;
    sxy[i + 1] = sxy[i] + x * y;
    syy[i + 1] = syy[i] + y * y;
  }

  double best_r2 = -1.0;
  for (int k0 = 0; k0 + kMinPoints <= end; ++k0) {
    const long double n = end - k0;
    const long double dx = sx[end] - sx[k0];
    const long double dy = sy[end] - sy[k0];
    const long double cxx = (sxx[end] - sxx[k0]) - dx * dx / n;
    const long double cxy = (sxy[end] - sxy[k0]) - dx * dy / n;
    const long double cyy = (syy[end] - syy[k0]) - dy * dy / n;
    const long double slope = cxy / cxx;  // cxx > 0: distinct integer abscissae
    double r2;
    if (cyy <= 0.0L) {
      r2 = 1.0;  // constant log-errors: the flat line is an exact fit
    } else {
      r2 = std::min(1.0, static_cast<double>((cxy * cxy) / (cxx * cyy)));
    }
    // Strict improvement keeps the earliest (longest) window on exact ties.
    if (r2 > best_r2) {
      best_r2 = r2;
      fit.rho_hat = static_cast<double>(std::exp(slope));
      fit.window_start = k0;
      fit.window_end = end;
      fit.r_squared = r2;
    }
  }
  fit.conclusive = true;
  return fit;
}

TransitionReport detect_transition(const std::vector<double>& v_values,
                                   const std::vector<double>& delta2_grid,
                                   int fit_window_start) {
  TransitionReport report;
  const int cycles = static_cast<int>(v_values.size()) - 1;
  for (double delta2 : delta2_grid) {
    int k_bar = cycles + 1;  // every decrease stayed >= delta2
    for (int k = 1; k <= cycles; ++k) {
      if (v_values[k - 1] - v_values[k] < delta2) {
        k_bar = k;
        break;
      }
    }
    report.entries.push_back(TransitionEntry{delta2, k_bar});
  }
  for (const TransitionEntry& entry : report.entries) {
    if (entry.k_bar > fit_window_start) continue;
    if (!report.has_knee || entry.delta2 > report.knee_delta2) {
      report.has_knee = true;
      report.knee_delta2 = entry.delta2;
      report.knee_k_bar = entry.k_bar;
    }
  }
  return report;
}

RateReport build_rate_report(const Instance& inst, const std::vector<CycleTrace>& traces,
                             const std::vector<double>& delta2_grid) {
  RateReport report;
  if (traces.empty()) return report;
  report.errors.push_back(traces.front().err_start);
  report.v_values.push_back(traces.front().v_start);
  for (const CycleTrace& trace : traces) {
    report.errors.push_back(trace.err_end);
    report.v_values.push_back(trace.v_end);
    report.v_decreases.push_back(trace.v_start - trace.v_end);
  }
  report.fit = fit_linear_rate(report.errors, default_noise_floor(inst.d.norm()));
  report.transition =
      detect_transition(report.v_values, delta2_grid, report.fit.conclusive ? report.fit.window_start : 0);
  return report;
}

std::string rate_report_json(const RateReport& report) {
  nlohmann::json j;
  j["errors"] = report.errors;
  j["v"] = report.v_values;
  j["v_decreases"] = report.v_decreases;
  j["fit"] = {{"rho_hat", report.fit.rho_hat},
              {"window", {report.fit.window_start, report.fit.window_end}},
              {"r_squared", report.fit.r_squared},
              {"conclusive", report.fit.conclusive}};
  nlohmann::json entries = nlohmann::json::array();
  for (const TransitionEntry& e : report.transition.entries) {
    entries.push_back({{"delta2", e.delta2}, {"k_bar", e.k_bar}});
  }
  j["transition"] = {{"entries", entries},
                     {"has_knee", report.transition.has_knee},
                     {"knee_delta2", report.transition.knee_delta2},
                     {"knee_k_bar", report.transition.knee_k_bar}};
  return j.dump(2);
}

void write_cycle_errors_csv(const std::string& path, const std::vector<double>& errors) {
  std::ofstream out(path);
  if (!out) throw Error("write_cycle_errors_csv: cannot open " + path);
  out << "cycle,err\n";
  char buffer[64];
  for (int i = 0; i < static_cast<int>(errors.size()); ++i) {
    std::snprintf(buffer, sizeof(buffer), "%d,%.17g\n", i, errors[i]);
    out << buffer;
  }
}

}  // namespace bap
