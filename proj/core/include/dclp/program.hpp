#pragma once

#include <set>
#include <string>
#include <vector>

#include "dclp/term.hpp"

namespace dclp {

enum class DistKind {
  Categorical,
  UniformDiscrete,
  UniformContinuous,
  Poisson,
  Gamma,
};

const char* dist_kind_name(DistKind k);

// Unresolved distribution expression as written in a clause head. Parameters
// may contain variables and ~(t) outcome terms; they are resolved against the
// value table when the random variable is actually sampled.
struct DistributionTemplate {
  DistKind kind = DistKind::Categorical;
  // Categorical: (probability expression, value) pairs.
  std::vector<std::pair<TermPtr, TermPtr>> entries;
  // UniformDiscrete: [list]; UniformContinuous: [low, high];
  // Poisson: [rate]; Gamma: [shape, scale].
  std::vector<TermPtr> params;

  TermPtr as_term() const;
};

struct Clause {
  Atom head;
  std::vector<Atom> body;
};

// h ~ D :- body. Defines the random variable rv with distribution dist
// whenever the body holds.
struct DistributionalClause {
  TermPtr rv;
  DistributionTemplate dist;
  std::vector<Atom> body;
};

struct Program {
  std::vector<Clause> clauses;
  std::vector<DistributionalClause> dist_clauses;
  std::set<std::string> builtin_whitelist;  // "is/2", "between/3", "findall/3"

  bool has_builtin(const std::string& pred, std::size_t arity) const {
    return builtin_whitelist.count(pred + "/" + std::to_string(arity)) > 0;
  }
};

// Partitioned evidence: atoms that must hold (positive) and atoms that must
// not hold (negative). Atoms are either derived atoms or dist_rel facts.
struct Evidence {
  std::vector<Atom> positive;
  std::vector<Atom> negative;

  bool empty() const { return positive.empty() && negative.empty(); }
};

std::string clause_to_string(const Clause& c);
std::string dist_clause_to_string(const DistributionalClause& c);
std::string dist_template_to_string(const DistributionTemplate& d);
std::string program_to_string(const Program& p);

}  // namespace dclp
