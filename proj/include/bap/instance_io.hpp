#pragma once

// Instance generation with known projections, JSON serialization for
// instances and dual states, the trace CSV sink, and the CLI entry point.

#include <cstdint>
#include <string>
#include <vector>

#include "bap/dykstra_core.hpp"

namespace bap {

struct GeneratorConfig {
  int dim = 3;
  int m = 2;        // number of sets
  int k = 2;        // halfspaces per set
  int k_prime = 1;  // tight halfspaces per non-interior set
  // Fraction of sets (the trailing ones) whose halfspaces all have slack at
  // the solution.
  double interior_fraction = 0.0;
  // ||d - x*||; ignored when no halfspace is tight anywhere (then d is
  // placed strictly inside and is its own projection).
  double distance = 1.0;
  std::uint64_t seed = 1;
  // Apply a random rotation + translation at the end (moves x* off the
  // origin); the known projection is updated accordingly.
  bool transform = true;
};

// Builds sets whose tight halfspaces pass through x* = 0 and places d inside
// the cone spanned by the tight normals, which makes P_C(d) = 0 exact by the
// KKT conditions.  Every instance is verified against brute_force_projection
// before it is returned (this caps m*k at the oracle's enumeration limit),
// with up to 20 attempts before GenerationError.
Instance generate(const GeneratorConfig& cfg);

// JSON schema:
//   {"dim": n, "d": [...],
//    "sets": [{"halfspaces": [{"f": [...], "c": <number>|"inf"}]}],
//    "known_projection": [...]?}
// Doubles round-trip exactly; infinite offsets serialize as the string
// "inf".  Malformed files raise ParseError naming the location.
Instance load_instance(const std::string& path);
void save_instance(const Instance& inst, const std::string& path);

// Dual-state schema: {"sets": [{"base_lambda": [...],
//   "generated": [{"f": [...], "c": ...}], "gen_lambda": [...]}]}.
// Loading validates sizes against the instance and multiplier nonnegativity.
DualState load_dual_state(const std::string& path, const Instance& inst);
void save_dual_state(const DualState& y, const std::string& path);

// One row per inner step: "cycle,j,s_j,v,err,step_proj,step_shqp", numbers
// at 17 significant digits (lossless round-trip, byte-reproducible).
void write_trace_csv(const std::string& path, const Instance& inst,
                     const std::vector<CycleTrace>& traces);

// Command-line entry point; args excludes the program name.  Subcommands:
// solve, lasso, generate, diag (rates|mu|angles|sensitivity), oracle.
// Returns 0 on success/convergence, 2 when a solve hits its cycle cap,
// 1 on any error.  The environment variable DYKSTRA_SEED overrides --seed.
int run_cli(const std::vector<std::string>& args);

}  // namespace bap
