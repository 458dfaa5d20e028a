#pragma once

#include <optional>

#include "dclp/engine.hpp"
#include "dclp/magic.hpp"
#include "dclp/program.hpp"

namespace dclp {

struct EnumerateOptions {
  std::size_t max_worlds = 10000000;
  // When set, a reachable poisson(rate) is treated as a categorical
  // distribution on 0..cap with masses renormalized by the truncated total.
  std::optional<long long> poisson_cap;
  std::size_t max_derived = 1000000;
};

struct OracleResult {
  double p_q_and_e = 0.0;
  double p_e = 0.0;
  std::size_t worlds = 0;

  std::optional<double> conditional() const {
    if (p_e <= 0.0) return std::nullopt;
    return p_q_and_e / p_e;
  }
};

// Exact query probability by depth-first enumeration of all joint value
// assignments of the random variables reachable from the query and
// evidence, running the deterministic consequence fixpoint per assignment.
// Requires every reachable variable to have a finite distribution; fails
// when the assignment space exceeds max_worlds.
OracleResult exact_enumerate(const Program& p, const Atom& query,
                             const Evidence& e,
                             const EnumerateOptions& opt = {});

// The same enumeration over an already transformed program (seeded with the
// query and evidence calls internally).
OracleResult exact_enumerate_transformed(const TransformedProgram& t,
                                         const Atom& query, const Evidence& e,
                                         const EnumerateOptions& opt = {});

}  // namespace dclp
