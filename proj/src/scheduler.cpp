#include "bap/scheduler.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

namespace bap {

int Schedule::s(int j) const {
  if (j < 1 - m || j > w_prime) {
    std::ostringstream msg;
    msg << "Schedule::s: index " << j << " outside [" << 1 - m << ", " << w_prime << "]";
    throw ContractViolation(msg.str());
  }
  return values[j - (1 - m)];
}

Schedule make_cyclic(int m) {
  if (m < 1) {
    throw ContractViolation("make_cyclic: m must be at least 1");
  }
  Schedule sched;
  sched.m = m;
  sched.w_prime = m;
  sched.values.resize(2 * m);
  for (int i = 1; i <= m; ++i) {
    sched.values[i - 1] = i;      // prefix s(i - m) = i
    sched.values[m + i - 1] = i;  // cycle s(i) = i
  }
  return sched;
}

Schedule make_random_covering(int m, int w_prime, std::uint64_t seed) {
  if (m < 1) {
    throw ContractViolation("make_random_covering: m must be at least 1");
  }
  if (w_prime < m) {
    throw ContractViolation("make_random_covering: w' must be at least m");
  }
  std::mt19937_64 rng(seed);
  // A permutation guarantees coverage; extra slots are uniform; the final
  // shuffle mixes them.
  std::vector<int> visits(m);
  std::iota(visits.begin(), visits.end(), 1);
  std::shuffle(visits.begin(), visits.end(), rng);
  std::uniform_int_distribution<int> pick(1, m);
  for (int j = m; j < w_prime; ++j) visits.push_back(pick(rng));
  std::shuffle(visits.begin(), visits.end(), rng);
  return make_explicit(m, visits);
}

Schedule make_explicit(int m, const std::vector<int>& visits) {
  if (m < 1) {
    throw ContractViolation("make_explicit: m must be at least 1");
  }
  if (static_cast<int>(visits.size()) < m) {
    throw ContractViolation("make_explicit: need w' >= m visits");
  }
  Schedule sched;
  sched.m = m;
  sched.w_prime = static_cast<int>(visits.size());
  sched.values.resize(m + sched.w_prime);
  for (int i = 1; i <= m; ++i) sched.values[i - 1] = i;
  std::copy(visits.begin(), visits.end(), sched.values.begin() + m);
  validate(sched);
  return sched;
}

Schedule parse_schedule(const std::string& text, int m) {
  if (text == "cyclic") return make_cyclic(m);
  if (text.rfind("random:", 0) == 0) {
    const std::string rest = text.substr(7);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) {
      throw ParseError("schedule: expected random:<seed>:<w'>");
    }
    try {
      const std::uint64_t seed = std::stoull(rest.substr(0, colon));
      const int w_prime = std::stoi(rest.substr(colon + 1));
      return make_random_covering(m, w_prime, seed);
    } catch (const std::logic_error&) {
      throw ParseError("schedule: malformed random:<seed>:<w'> numbers");
    }
  }
  // Explicit comma list.
  std::vector<int> visits;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    try {
      visits.push_back(std::stoi(token));
    } catch (const std::logic_error&) {
      throw ParseError("schedule: malformed visit list entry '" + token + "'");
    }
  }
  if (visits.empty()) {
    throw ParseError("schedule: empty specification");
  }
  return make_explicit(m, visits);
}

int pi(const Schedule& sched, int j, int i) {
  if (i < 1 || i > sched.m) {
    throw ContractViolation("pi: set index outside [1, m]");
  }
  if (j < 0 || j > sched.w_prime) {
    throw ContractViolation("pi: step index outside [0, w']");
  }
  for (int jp = j; jp >= 1 - sched.m; --jp) {
    if (sched.s(jp) == i) return jp;
  }
  // Unreachable: the prefix convention guarantees s(i - m) = i.
  throw ConsistencyError("pi: prefix convention violated");
}

int p(const Schedule& sched, int j) {
  if (j < 1 || j > sched.w_prime) {
    throw ContractViolation("p: step index outside [1, w']");
  }
  return pi(sched, j - 1, sched.s(j));
}

void validate(const Schedule& sched) {
  if (sched.m < 1 || sched.w_prime < sched.m) {
    throw ContractViolation("Schedule: need m >= 1 and w' >= m");
  }
  if (static_cast<int>(sched.values.size()) != sched.m + sched.w_prime) {
    throw ContractViolation("Schedule: storage size mismatch");
  }
  std::vector<bool> seen(sched.m + 1, false);
  for (int i = 1; i <= sched.m; ++i) {
    if (sched.s(i - sched.m) != i) {
      throw ContractViolation("Schedule: prefix convention s(i-m) = i violated");
    }
  }
  for (int j = 1; j <= sched.w_prime; ++j) {
    const int i = sched.s(j);
    if (i < 1 || i > sched.m) {
      throw ContractViolation("Schedule: visit outside [1, m]");
    }
    seen[i] = true;
  }
  for (int i = 1; i <= sched.m; ++i) {
    if (!seen[i]) {
      std::ostringstream msg;
      msg << "Schedule: set " << i << " never visited (coverage violated)";
      throw ContractViolation(msg.str());
    }
  }
}

}  // namespace bap
