#include "bap/instance_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bap/diagnostics.hpp"
#include "bap/errors.hpp"
#include "bap/geometry.hpp"
#include "bap/lasso_adapter.hpp"
#include "bap/oracle.hpp"
#include "bap/scheduler.hpp"

namespace bap {

namespace {

void validate_config(const GeneratorConfig& cfg) {
  if (cfg.dim < 1 || cfg.m < 1 || cfg.k < 1) {
    throw ContractViolation("generate: dim, m, k must all be >= 1");
  }
  if (cfg.k_prime < 0 || cfg.k_prime > cfg.k) {
    throw ContractViolation("generate: need 0 <= k' <= k");
  }
  if (!(cfg.interior_fraction >= 0.0 && cfg.interior_fraction <= 1.0)) {
    throw ContractViolation("generate: interior_fraction must lie in [0, 1]");
  }
  if (!(cfg.distance > 0.0)) throw ContractViolation("generate: distance must be positive");
  if (cfg.m * cfg.k > 20) {
    throw UnsupportedScale(
        "generate: m*k > 20 cannot be verified by the enumeration oracle; "
        "use smaller instances");
  }
}

Eigen::MatrixXd haar_rotation(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) a(i, j) = gauss(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Fixing the signs of R's diagonal makes Q Haar-distributed.
  for (int j = 0; j < dim; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace

Instance generate(const GeneratorConfig& cfg) {
  validate_config(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> slack_dist(0.1, 1.1);
  std::uniform_real_distribution<double> alpha_dist(0.2, 1.0);

  const auto random_unit = [&]() {
    Eigen::VectorXd u(cfg.dim);
    double norm = 0.0;
    do {
      for (int j = 0; j < cfg.dim; ++j) u[j] = gauss(rng);
      norm = u.norm();
    } while (norm == 0.0);
    return Eigen::VectorXd(u / norm);
  };

  const int interior_count =
      std::clamp(static_cast<int>(std::lround(cfg.interior_fraction * cfg.m)), 0, cfg.m);
  const int boundary_count = cfg.m - interior_count;

  constexpr int kAttempts = 20;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    // Tight normals pass through x* = 0 and get positive KKT weights below;
    // capping their pairwise alignment keeps the active system comfortably
    // conditioned (rates bounded away from 1, oracle agreement clean).
    std::vector<std::vector<Eigen::VectorXd>> tight(cfg.m);
    std::vector<Eigen::VectorXd> all_tight;
    bool separated = true;
    for (int i = 0; i < boundary_count && separated; ++i) {
      for (int r = 0; r < cfg.k_prime && separated; ++r) {
        separated = false;
        for (int tries = 0; tries < 200; ++tries) {
          Eigen::VectorXd f = random_unit();
          bool apart = true;
          for (const Eigen::VectorXd& g : all_tight) {
            if (std::abs(f.dot(g)) > 0.9) {
              apart = false;
              break;
            }
          }
          if (apart) {
            tight[i].push_back(f);
            all_tight.push_back(std::move(f));
            separated = true;
            break;
          }
        }
      }
    }
    if (!separated) continue;

    Instance inst;
    inst.dim = cfg.dim;
    for (int i = 0; i < cfg.m; ++i) {
      PolyhedralSet set;
      for (const Eigen::VectorXd& f : tight[i]) set.halfspaces.emplace_back(f, 0.0);
      for (int r = static_cast<int>(tight[i].size()); r < cfg.k; ++r) {
        set.halfspaces.emplace_back(random_unit(), slack_dist(rng));
      }
      inst.sets.push_back(std::move(set));
    }

    Eigen::VectorXd x_star = Eigen::VectorXd::Zero(cfg.dim);
    if (all_tight.empty()) {
      // Nothing is tight anywhere: place d strictly inside (every offset is
      // at least 0.1), making it its own projection.
      inst.d = 0.05 * random_unit();
      x_star = inst.d;
    } else {
      // d = distance * normalized positive combination of the tight normals.
      // Each combination weight is a valid KKT multiplier at 0, so P_C(d) = 0
      // exactly; the oracle check below guards the floating-point version.
      Eigen::VectorXd cone = Eigen::VectorXd::Zero(cfg.dim);
      for (const Eigen::VectorXd& f : all_tight) cone += alpha_dist(rng) * f;
      const double norm = cone.norm();
      if (norm < 1e-6) continue;  // near-cancelling normals; try again
      inst.d = cfg.distance * cone / norm;
    }
    inst.known_projection = x_star;

    if (cfg.transform) {
      const Eigen::MatrixXd q = haar_rotation(cfg.dim, rng);
      Eigen::VectorXd t(cfg.dim);
      for (int j = 0; j < cfg.dim; ++j) t[j] = gauss(rng);
      for (PolyhedralSet& set : inst.sets) {
        for (Halfspace& h : set.halfspaces) {
          const Eigen::VectorXd f = q * h.normal;
          h = Halfspace::through(f, h.offset + f.dot(t));
        }
      }
      inst.d = q * inst.d + t;
      x_star = q * x_star + t;
      inst.known_projection = x_star;
    }

    const ProjectionCertificate cert = brute_force_projection(inst);
    if ((cert.x_star - x_star).norm() <= 1e-9 * (1.0 + inst.d.norm())) return inst;
  }
  throw GenerationError("generate: no verified instance within " + std::to_string(kAttempts) +
                        " attempts (seed " + std::to_string(cfg.seed) + ")");
}

namespace {

using nlohmann::json;

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const json& arr, int expected, const std::string& where) {
  if (!arr.is_array()) throw ParseError(where + ": expected an array");
  if (expected >= 0 && static_cast<int>(arr.size()) != expected) {
    throw ParseError(where + ": expected length " + std::to_string(expected) + ", got " +
                     std::to_string(arr.size()));
  }
  Eigen::VectorXd v(arr.size());
  for (int i = 0; i < static_cast<int>(arr.size()); ++i) {
    if (!arr[i].is_number()) {
      throw ParseError(where + "[" + std::to_string(i) + "]: expected a number");
    }
    v[i] = arr[i].get<double>();
  }
  return v;
}

double offset_from_json(const json& c, const std::string& where) {
  if (c.is_string()) {
    if (c.get<std::string>() == "inf") return kInfiniteOffset;
    throw ParseError(where + ": the only offset string allowed is \"inf\"");
  }
  if (!c.is_number()) throw ParseError(where + ": offset must be a number or \"inf\"");
  return c.get<double>();
}

json offset_to_json(double offset) {
  if (offset == kInfiniteOffset) return json("inf");
  return json(offset);
}

Halfspace halfspace_from_json(const json& h, int dim, const std::string& where) {
  if (!h.is_object() || !h.contains("f") || !h.contains("c")) {
    throw ParseError(where + ": expected an object with \"f\" and \"c\"");
  }
  Eigen::VectorXd f = vector_from_json(h["f"], dim, where + ".f");
  const double norm = f.norm();
  if (std::abs(norm - 1.0) > kUnitNormTol) {
    char hint[160];
    std::snprintf(hint, sizeof(hint),
                  ": f has norm %.17g; normals must be unit length"
                  " (divide f and c by the norm)",
                  norm);
    throw ParseError(where + hint);
  }
  return Halfspace(std::move(f), offset_from_json(h["c"], where + ".c"));
}

json instance_to_json(const Instance& inst) {
  json j;
  j["dim"] = inst.dim;
  j["d"] = to_std(inst.d);
  json sets = json::array();
  for (const PolyhedralSet& set : inst.sets) {
    json halfspaces = json::array();
    for (const Halfspace& h : set.halfspaces) {
      halfspaces.push_back({{"f", to_std(h.normal)}, {"c", offset_to_json(h.offset)}});
    }
    sets.push_back({{"halfspaces", halfspaces}});
  }
  j["sets"] = sets;
  if (inst.known_projection) j["known_projection"] = to_std(*inst.known_projection);
  return j;
}

Instance instance_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path + ": top level must be an object");
  if (!j.contains("dim") || !j["dim"].is_number_integer()) {
    throw ParseError(path + ": missing integer \"dim\"");
  }
  Instance inst;
  inst.dim = j["dim"].get<int>();
  if (inst.dim < 1) throw ParseError(path + ": dim must be >= 1");
  if (!j.contains("d")) throw ParseError(path + ": missing \"d\"");
  inst.d = vector_from_json(j["d"], inst.dim, path + ": d");
  if (!j.contains("sets") || !j["sets"].is_array()) {
    throw ParseError(path + ": missing array \"sets\"");
  }
  for (int i = 0; i < static_cast<int>(j["sets"].size()); ++i) {
    const json& set_json = j["sets"][i];
    const std::string set_where = path + ": sets[" + std::to_string(i) + "]";
    if (!set_json.is_object() || !set_json.contains("halfspaces") ||
        !set_json["halfspaces"].is_array()) {
      throw ParseError(set_where + ": expected an object with array \"halfspaces\"");
    }
    PolyhedralSet set;
    for (int r = 0; r < static_cast<int>(set_json["halfspaces"].size()); ++r) {
      set.halfspaces.push_back(halfspace_from_json(
          set_json["halfspaces"][r], inst.dim,
          set_where + ".halfspaces[" + std::to_string(r) + "]"));
    }
    inst.sets.push_back(std::move(set));
  }
  if (j.contains("known_projection")) {
    inst.known_projection = vector_from_json(j["known_projection"], inst.dim,
                                             path + ": known_projection");
  }
  validate_instance(inst);
  return inst;
}

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace

Instance load_instance(const std::string& path) {
  return instance_from_json(parse_file(path), path);
}

void save_instance(const Instance& inst, const std::string& path) {
  validate_instance(inst);
  std::ofstream out(path);
  if (!out) throw Error("save_instance: cannot open " + path);
  out << instance_to_json(inst).dump(2) << '\n';
}

DualState load_dual_state(const std::string& path, const Instance& inst) {
  const json j = parse_file(path);
  if (!j.is_object() || !j.contains("sets") || !j["sets"].is_array()) {
    throw ParseError(path + ": expected an object with array \"sets\"");
  }
  if (static_cast<int>(j["sets"].size()) != inst.m()) {
    throw ParseError(path + ": dual state has " + std::to_string(j["sets"].size()) +
                     " sets, instance has " + std::to_string(inst.m()));
  }
  DualState y;
  for (int i = 0; i < inst.m(); ++i) {
    const json& sj = j["sets"][i];
    const std::string where = path + ": sets[" + std::to_string(i) + "]";
    SetDual dual;
    if (!sj.is_object() || !sj.contains("base_lambda")) {
      throw ParseError(where + ": expected an object with \"base_lambda\"");
    }
    dual.base_lambda = vector_from_json(sj["base_lambda"], inst.sets[i].size(),
                                        where + ".base_lambda");
    if (sj.contains("generated") != sj.contains("gen_lambda")) {
      throw ParseError(where + ": \"generated\" and \"gen_lambda\" must appear together");
    }
    if (sj.contains("generated")) {
      if (!sj["generated"].is_array()) throw ParseError(where + ".generated: expected an array");
      for (int r = 0; r < static_cast<int>(sj["generated"].size()); ++r) {
        dual.generated.push_back(halfspace_from_json(
            sj["generated"][r], inst.dim, where + ".generated[" + std::to_string(r) + "]"));
      }
      dual.gen_lambda = vector_from_json(sj["gen_lambda"],
                                         static_cast<int>(dual.generated.size()),
                                         where + ".gen_lambda");
    } else {
      dual.gen_lambda = Eigen::VectorXd::Zero(0);
    }
    auto clean = [&](Eigen::VectorXd& lambda, const char* field) {
      for (int r = 0; r < lambda.size(); ++r) {
        if (lambda[r] < -kRayTol) {
          throw ParseError(where + "." + field + "[" + std::to_string(r) +
                           "]: multipliers must be nonnegative");
        }
        lambda[r] = std::max(0.0, lambda[r]);
      }
    };
    clean(dual.base_lambda, "base_lambda");
    clean(dual.gen_lambda, "gen_lambda");
    y.sets.push_back(std::move(dual));
  }
  return y;
}

void save_dual_state(const DualState& y, const std::string& path) {
  json sets = json::array();
  for (const SetDual& dual : y.sets) {
    json sj;
    sj["base_lambda"] = to_std(dual.base_lambda);
    json generated = json::array();
    for (const Halfspace& h : dual.generated) {
      generated.push_back({{"f", to_std(h.normal)}, {"c", offset_to_json(h.offset)}});
    }
    sj["generated"] = generated;
    sj["gen_lambda"] = to_std(dual.gen_lambda);
    sets.push_back(std::move(sj));
  }
  std::ofstream out(path);
  if (!out) throw Error("save_dual_state: cannot open " + path);
  out << json{{"sets", sets}}.dump(2) << '\n';
}

void write_trace_csv(const std::string& path, const Instance& inst,
                     const std::vector<CycleTrace>& traces) {
  std::ofstream out(path);
  if (!out) throw Error("write_trace_csv: cannot open " + path);
  out << "cycle,j,s_j,v,err,step_proj,step_shqp\n";
  char buffer[256];
  for (const CycleTrace& trace : traces) {
    for (const StepRecord& step : trace.steps) {
      const double err = inst.known_projection
                             ? (step.x_plus - *inst.known_projection).norm()
                             : std::numeric_limits<double>::quiet_NaN();
      std::snprintf(buffer, sizeof(buffer), "%d,%d,%d,%.17g,%.17g,%.17g,%.17g\n",
                    trace.cycle, step.j, step.set_index, step.v_plus, err, step.step_proj,
                    step.step_shqp);
      out << buffer;
    }
  }
}

namespace {

std::string format_double(double v) {
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

std::string format_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (int i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_double(v[i]);
  }
  return out;
}

ShqpMode parse_shqp_mode(const std::string& text) {
  if (text == "off") return ShqpMode::off;
  if (text == "last-halfspace") return ShqpMode::last_halfspace;
  if (text == "accumulate") return ShqpMode::accumulate;
  throw ParseError("--shqp must be off, last-halfspace, or accumulate (got '" + text + "')");
}

QSelector parse_q_policy(const std::string& text) {
  if (text == "none") return QSelector::none;
  if (text == "visited") return QSelector::visited;
  if (text == "every-m") return QSelector::every_m;
  throw ParseError("--q-policy must be none, visited, or every-m (got '" + text + "')");
}

const std::vector<double> kDefaultDeltaGrid = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};

struct SolveFlags {
  std::string instance;
  std::string schedule = "cyclic";
  std::string shqp = "off";
  std::string q_policy = "visited";
  double tol = 1e-8;
  int max_cycles = 10'000;
  std::string trace_path;
  std::string warmstart_path;
  std::string dual_out;
};

void add_solver_options(CLI::App* cmd, SolveFlags& flags, bool with_instance) {
  if (with_instance) {
    cmd->add_option("--instance", flags.instance, "instance JSON path")->required();
  }
  cmd->add_option("--schedule", flags.schedule,
                  "cyclic | random:<seed>:<w'> | comma list like 1,2,1,3");
  cmd->add_option("--shqp", flags.shqp, "off | last-halfspace | accumulate");
  cmd->add_option("--q-policy", flags.q_policy, "none | visited | every-m");
  cmd->add_option("--tol", flags.tol, "stopping tolerance");
  cmd->add_option("--max-cycles", flags.max_cycles, "cycle cap");
  cmd->add_option("--trace", flags.trace_path, "write per-step trace CSV here");
}

int cmd_solve(const SolveFlags& flags) {
  const Instance inst = load_instance(flags.instance);
  const Schedule sched = parse_schedule(flags.schedule, inst.m());
  ShqpPolicy policy;
  policy.mode = parse_shqp_mode(flags.shqp);
  policy.q_selector = parse_q_policy(flags.q_policy);
  StoppingRule stop;
  stop.tol = flags.tol;
  stop.max_cycles = flags.max_cycles;
  const TraceLevel level = flags.trace_path.empty() ? TraceLevel::off : TraceLevel::full;

  std::optional<DualState> warm;
  if (!flags.warmstart_path.empty()) warm = load_dual_state(flags.warmstart_path, inst);

  const SolveResult result =
      solve(inst, sched, policy, stop, level, warm ? &*warm : nullptr);

  std::cout << "status: "
            << (result.status == SolveStatus::converged ? "converged" : "unconverged") << '\n'
            << "cycles: " << result.cycles << '\n'
            << "x: " << format_vector(result.x) << '\n';
  if (inst.known_projection) {
    std::cout << "err: " << format_double((result.x - *inst.known_projection).norm()) << '\n'
              << "v: " << format_double(dual_value(inst, result.y)) << '\n';
  }
  if (!flags.trace_path.empty()) write_trace_csv(flags.trace_path, inst, result.traces);
  if (!flags.dual_out.empty()) save_dual_state(result.y, flags.dual_out);
  return result.status == SolveStatus::converged ? 0 : 2;
}

int cmd_lasso(const std::string& matrix_path, const std::string& rhs_path, double lambda,
              const SolveFlags& flags) {
  LassoProblem problem;
  problem.A = read_matrix_csv(matrix_path);
  problem.b = read_vector_csv(rhs_path);
  problem.lambda = lambda;
  const Instance inst = to_dual_bap(problem);
  const Schedule sched = parse_schedule(flags.schedule, inst.m());
  ShqpPolicy policy;
  policy.mode = parse_shqp_mode(flags.shqp);
  policy.q_selector = parse_q_policy(flags.q_policy);
  StoppingRule stop;
  stop.tol = flags.tol;
  stop.max_cycles = flags.max_cycles;
  const TraceLevel level = flags.trace_path.empty() ? TraceLevel::off : TraceLevel::full;

  const SolveResult result = solve(inst, sched, policy, stop, level);
  const Eigen::VectorXd x = recover_x(problem, result.y);
  std::cout << "status: "
            << (result.status == SolveStatus::converged ? "converged" : "unconverged") << '\n'
            << "cycles: " << result.cycles << '\n'
            << "objective: " << format_double(lasso_objective(problem, x)) << '\n'
            << "x: " << format_vector(x) << '\n';
  if (!flags.trace_path.empty()) write_trace_csv(flags.trace_path, inst, result.traces);
  return result.status == SolveStatus::converged ? 0 : 2;
}

int cmd_oracle(const std::string& instance_path) {
  const Instance inst = load_instance(instance_path);
  const ProjectionCertificate cert = brute_force_projection(inst);
  std::cout << "x*: " << format_vector(cert.x_star) << '\n'
            << "multipliers: " << format_vector(cert.multipliers) << '\n';
  std::cout << "active:";
  for (int idx : cert.active) std::cout << ' ' << idx;
  std::cout << '\n';
  return 0;
}

Instance load_with_projection(const std::string& path) {
  Instance inst = load_instance(path);
  if (!inst.known_projection) inst.known_projection = brute_force_projection(inst).x_star;
  return inst;
}

int cmd_diag_rates(const SolveFlags& flags, const std::string& json_out,
                   const std::string& errors_csv) {
  const Instance inst = load_with_projection(flags.instance);
  const Schedule sched = parse_schedule(flags.schedule, inst.m());
  ShqpPolicy policy;
  policy.mode = parse_shqp_mode(flags.shqp);
  policy.q_selector = parse_q_policy(flags.q_policy);
  StoppingRule stop;
  stop.mode = StopMode::known_error;
  stop.tol = flags.tol;
  stop.max_cycles = flags.max_cycles;

  const SolveResult result = solve(inst, sched, policy, stop, TraceLevel::full);
  const RateReport report = build_rate_report(inst, result.traces, kDefaultDeltaGrid);
  const std::string text = rate_report_json(report);
  if (json_out.empty()) {
    std::cout << text << '\n';
  } else {
    std::ofstream out(json_out);
    if (!out) throw Error("diag rates: cannot open " + json_out);
    out << text << '\n';
  }
  if (!errors_csv.empty()) write_cycle_errors_csv(errors_csv, report.errors);
  std::cerr << "status: "
            << (result.status == SolveStatus::converged ? "converged" : "unconverged")
            << " after " << result.cycles << " cycles\n";
  return result.status == SolveStatus::converged ? 0 : 2;
}

int cmd_diag_mu(const std::string& instance_path, const MuOptions& options) {
  const Instance inst = load_with_projection(instance_path);
  const Eigen::VectorXd& x_star = *inst.known_projection;
  const double tight_tol = 1e-9 * (1.0 + x_star.norm());
  std::vector<Eigen::VectorXd> normals;
  for (const PolyhedralSet& set : inst.sets) {
    for (const Halfspace& h : set.halfspaces) {
      if (h.is_trivial()) continue;
      if (std::abs(h.normal.dot(x_star) - h.offset) <= tight_tol) normals.push_back(h.normal);
    }
  }
  if (normals.empty()) {
    std::cerr << "no halfspace is tight at the projection; mu is undefined\n";
    return 1;
  }
  const MuEstimate estimate = estimate_mu(normals, options);
  std::cout << "mu: " << format_double(estimate.value) << '\n'
            << "tight_halfspaces: " << normals.size() << '\n'
            << "span_dim: " << estimate.span_dim << '\n'
            << "samples: " << estimate.samples << '\n'
            << "refinements: " << estimate.refinements << '\n'
            << "seed: " << estimate.seed << '\n';
  return 0;
}

int cmd_diag_angles(int dim, const std::vector<int>& dims, std::uint64_t seed) {
  if (dim < 1) throw ContractViolation("diag angles: --dim must be >= 1");
  if (dims.empty()) throw ContractViolation("diag angles: --dims must be nonempty");
  std::mt19937_64 rng(seed);
  std::vector<SubspaceBasis> bases;
  for (int sub_dim : dims) {
    if (sub_dim < 0 || sub_dim > dim) {
      throw ContractViolation("diag angles: subspace dims must lie in [0, dim]");
    }
    bases.push_back(SubspaceBasis(haar_rotation(dim, rng).leftCols(sub_dim)));
  }
  for (int l = 1; l < static_cast<int>(bases.size()); ++l) {
    const std::vector<SubspaceBasis> prefix(bases.begin(), bases.begin() + l);
    const double c = friedrichs_angle(bases[l], intersect_subspaces(prefix));
    std::cout << "c(M_" << (l + 1) << ", M_1..M_" << l << "): " << format_double(c) << '\n';
  }
  const double alpha = dh97_alpha(bases);
  Eigen::MatrixXd product = Eigen::MatrixXd::Identity(dim, dim);
  for (const SubspaceBasis& basis : bases) product = projector_matrix(basis) * product;
  const double norm =
      power_iteration_norm(product - projector_matrix(intersect_subspaces(bases)));
  std::cout << "alpha: " << format_double(alpha) << '\n'
            << "product_norm: " << format_double(norm) << '\n'
            << "bound_satisfied: " << (norm <= alpha + 1e-9 ? "yes" : "no") << '\n';
  return 0;
}

int cmd_diag_sensitivity(int rows, int cols, std::uint64_t seed, std::vector<double> deltas) {
  if (rows < 1 || cols < 1) throw ContractViolation("diag sensitivity: sizes must be >= 1");
  if (rows > cols) {
    throw ContractViolation("diag sensitivity: rows must be <= cols for independent rows");
  }
  if (deltas.empty()) deltas = kDefaultDeltaGrid;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd a(rows, cols);
  for (int tries = 0; tries < 10; ++tries) {
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) a(i, j) = gauss(rng);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    if (svd.singularValues()[rows - 1] > 1e-6 * svd.singularValues()[0]) break;
  }
  Eigen::VectorXd b(rows), d(cols);
  for (int i = 0; i < rows; ++i) b[i] = gauss(rng);
  for (int j = 0; j < cols; ++j) d[j] = 2.0 * gauss(rng);
  for (double delta2 : deltas) {
    const double displacement = sensitivity_probe(a, b, d, delta2);
    std::cout << "delta2: " << format_double(delta2)
              << " displacement: " << format_double(displacement) << '\n';
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Dykstra-type solver for best approximation over intersections of polyhedra",
               "dykstra"};
  app.require_subcommand(1);

  SolveFlags solve_flags;
  CLI::App* solve_cmd = app.add_subcommand("solve", "project d onto the intersection");
  add_solver_options(solve_cmd, solve_flags, true);
  solve_cmd->add_option("--warmstart", solve_flags.warmstart_path, "dual state JSON to start from");
  solve_cmd->add_option("--dual-out", solve_flags.dual_out, "write final dual state JSON here");

  SolveFlags lasso_flags;
  std::string lasso_matrix;
  std::string lasso_rhs;
  double lasso_lambda = 1.0;
  CLI::App* lasso_cmd = app.add_subcommand("lasso", "solve a lasso problem via slab projection");
  lasso_cmd->add_option("--matrix", lasso_matrix, "CSV of A")->required();
  lasso_cmd->add_option("--rhs", lasso_rhs, "CSV of b")->required();
  lasso_cmd->add_option("--lambda", lasso_lambda, "l1 penalty")->required();
  add_solver_options(lasso_cmd, lasso_flags, false);

  GeneratorConfig gen_cfg;
  std::string gen_out;
  CLI::App* gen_cmd = app.add_subcommand("generate", "generate an instance with known projection");
  gen_cmd->add_option("--n,--dim", gen_cfg.dim, "ambient dimension");
  gen_cmd->add_option("--m", gen_cfg.m, "number of sets");
  gen_cmd->add_option("--k", gen_cfg.k, "halfspaces per set");
  gen_cmd->add_option("--kprime", gen_cfg.k_prime, "tight halfspaces per boundary set");
  gen_cmd->add_option("--interior-fraction", gen_cfg.interior_fraction,
                      "fraction of sets with slack everywhere");
  gen_cmd->add_option("--distance", gen_cfg.distance, "||d - x*||");
  gen_cmd->add_option("--seed", gen_cfg.seed, "RNG seed");
  gen_cmd->add_flag("--transform,!--no-transform", gen_cfg.transform,
                    "random rotation + translation");
  gen_cmd->add_option("--out", gen_out, "output instance JSON")->required();

  CLI::App* diag_cmd = app.add_subcommand("diag", "rate and regularity diagnostics");
  diag_cmd->require_subcommand(1);

  SolveFlags rates_flags;
  rates_flags.tol = 1e-12;
  rates_flags.max_cycles = 20'000;
  std::string rates_json_out;
  std::string rates_errors_csv;
  CLI::App* rates_cmd = diag_cmd->add_subcommand("rates", "fit the linear tail rate of a run");
  add_solver_options(rates_cmd, rates_flags, true);
  rates_cmd->add_option("--json-out", rates_json_out, "write the rate report JSON here");
  rates_cmd->add_option("--errors-csv", rates_errors_csv, "write per-cycle errors CSV here");

  std::string mu_instance;
  MuOptions mu_options;
  CLI::App* mu_cmd = diag_cmd->add_subcommand("mu", "regularity constant of the tight family");
  mu_cmd->add_option("--instance", mu_instance, "instance JSON path")->required();
  mu_cmd->add_option("--samples", mu_options.samples, "sphere samples");
  mu_cmd->add_option("--refinements", mu_options.refinements, "refinement steps");
  mu_cmd->add_option("--seed", mu_options.seed, "RNG seed");

  int angles_dim = 4;
  std::vector<int> angles_dims;
  std::uint64_t angles_seed = 1;
  CLI::App* angles_cmd =
      diag_cmd->add_subcommand("angles", "Friedrichs angles and the product-projector bound");
  angles_cmd->add_option("--dim", angles_dim, "ambient dimension");
  angles_cmd->add_option("--dims", angles_dims, "subspace dimensions, e.g. 2,3,1")
      ->required()
      ->delimiter(',');
  angles_cmd->add_option("--seed", angles_seed, "RNG seed");

  int sens_rows = 3;
  int sens_cols = 4;
  std::uint64_t sens_seed = 1;
  std::vector<double> sens_deltas;
  CLI::App* sens_cmd =
      diag_cmd->add_subcommand("sensitivity", "projection displacement under perturbations");
  sens_cmd->add_option("--rows", sens_rows, "rows of A");
  sens_cmd->add_option("--cols", sens_cols, "columns of A");
  sens_cmd->add_option("--seed", sens_seed, "RNG seed");
  sens_cmd->add_option("--delta2", sens_deltas, "perturbation radii, e.g. 1e-1,1e-2")
      ->delimiter(',');

  std::string oracle_instance;
  CLI::App* oracle_cmd = app.add_subcommand("oracle", "brute-force projection certificate");
  oracle_cmd->add_option("--instance", oracle_instance, "instance JSON path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (const char* env_seed = std::getenv("DYKSTRA_SEED")) {
      char* end = nullptr;
      const unsigned long long value = std::strtoull(env_seed, &end, 10);
      if (end == env_seed || *end != '\0') {
        std::cerr << "error: DYKSTRA_SEED must be an unsigned integer\n";
        return 1;
      }
      gen_cfg.seed = value;
      mu_options.seed = value;
      angles_seed = value;
      sens_seed = value;
    }

    if (solve_cmd->parsed()) return cmd_solve(solve_flags);
    if (lasso_cmd->parsed()) return cmd_lasso(lasso_matrix, lasso_rhs, lasso_lambda, lasso_flags);
    if (gen_cmd->parsed()) {
      const Instance inst = generate(gen_cfg);
      save_instance(inst, gen_out);
      std::cout << "wrote " << gen_out << " (dim=" << inst.dim << ", m=" << inst.m()
                << ", seed=" << gen_cfg.seed << ")\n";
      return 0;
    }
    if (diag_cmd->parsed()) {
      if (rates_cmd->parsed()) return cmd_diag_rates(rates_flags, rates_json_out, rates_errors_csv);
      if (mu_cmd->parsed()) return cmd_diag_mu(mu_instance, mu_options);
      if (angles_cmd->parsed()) return cmd_diag_angles(angles_dim, angles_dims, angles_seed);
      if (sens_cmd->parsed()) {
        return cmd_diag_sensitivity(sens_rows, sens_cols, sens_seed, sens_deltas);
      }
    }
    if (oracle_cmd->parsed()) return cmd_oracle(oracle_instance);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace bap
