#ifndef BAP_SCHEDULER_HPP
#define BAP_SCHEDULER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "bap/errors.hpp"

namespace bap {

// Control maps of one almost-cyclic cycle: s : [1-m, w'] -> [1, m] with the
// fixed prefix s(i-m) = i and full coverage of [1, m] on [1, w'].  Indices
// are stored zero-shifted internally but the API keeps the paper's
// [1-m, w'] convention.
struct Schedule {
  int m = 0;
  int w_prime = 0;
  std::vector<int> values;  // values[j - (1-m)] = s(j), length m + w_prime

  // s(j) for j in [1-m, w'].
  int s(int j) const;
};

// w' = m, s(j) = j: the classical cyclic order.
Schedule make_cyclic(int m);

// Seeded pseudo-random s covering [1, m]; deterministic per seed.
Schedule make_random_covering(int m, int w_prime, std::uint64_t seed);

// User-supplied visit list s(1..w'); validates coverage.
Schedule make_explicit(int m, const std::vector<int>& visits);

// Text forms accepted by the CLI: "cyclic", "random:<seed>:<w'>",
// or an explicit comma list "1,2,1,3".
Schedule parse_schedule(const std::string& text, int m);

// pi(j, i) = max{ j' <= j : s(j') = i }, defined for j in [0, w'] thanks to
// the prefix convention.
int pi(const Schedule& sched, int j, int i);

// p(j) = pi(j-1, s(j)): most recent previous visit to the set visited at j.
int p(const Schedule& sched, int j);

// Checks the prefix and coverage invariants; throws ContractViolation.
void validate(const Schedule& sched);

}  // namespace bap

#endif  // BAP_SCHEDULER_HPP
