#pragma once

#include <map>
#include <string>

#include "dclp/program.hpp"

namespace dclp {

// Result of the magic set transformation: every original clause is guarded
// by a call atom c(head), one call-propagation clause exists per body atom,
// distributional clauses carry activation guards, and every builtin body
// occurrence is replaced by its a_-wrapped form (defined by a wrapper
// clause a_b(args) :- c(b(args)), b(args)).
struct TransformedProgram {
  std::vector<Clause> clauses;
  std::vector<DistributionalClause> dist_clauses;
  // "pred/arity" of each wrapped builtin -> internal wrapped predicate name.
  std::map<std::string, std::string> call_wrapper_map;
  std::set<std::string> builtin_whitelist;
};

Atom make_call_atom(const Atom& inner);

// Plain magic transformation (Def. over programs without distributional
// clauses): for each clause A0 :- A1,...,An emits
//   A0 :- c(A0), A1, ..., An.
//   c(Ai) :- c(A0), A1, ..., A(i-1).        for 1 <= i <= n
TransformedProgram magic_transform(const Program& p);

// Probabilistic magic transformation: magic on the non-distributional part;
// each distributional clause h ~ D :- b1,...,bn becomes, for every
// rel in {eq, lt, leq, gt, geq} and both argument positions, a guarded copy
//   h ~ D :- c(dist_rel(~(h), X)), b1, ..., bn.      (and the mirrored guard)
// with matching call-propagation clauses; every builtin occurrence in a body
// is replaced by its wrapper. Guard variables are fresh per generated clause.
TransformedProgram pmagic_transform(const Program& p);

// Adds seed facts c(a) for the query atom and every evidence atom
// (set semantics: seeding twice is idempotent).
TransformedProgram seed_program(const TransformedProgram& t, const Atom& query,
                                const Evidence& e);
TransformedProgram seed_program(const TransformedProgram& t,
                                const std::vector<Atom>& atoms);

std::string transformed_to_string(const TransformedProgram& t);

}  // namespace dclp
