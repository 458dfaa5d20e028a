#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dclp/program.hpp"

namespace dclp {

struct Diagnostic {
  std::string message;
};

// Static validation: the fact/rule split, distribution template
// well-formedness, range restriction of templates, and a predicate-level
// distribution-stratification check that computes a rank per predicate.
// The unique-distribution property (one ground distribution per ground
// random variable) is enforced at runtime by the engine; measurability and
// finite support are assumptions surfaced as warnings.
struct ValidationReport {
  std::vector<Diagnostic> errors;
  std::vector<Diagnostic> warnings;
  // Present iff no stratification error was found. Keys are "pred/arity"
  // for ordinary predicates and "functor/arity~" for random-variable
  // definitions.
  std::optional<std::map<std::string, int>> predicate_rank;

  bool ok() const { return errors.empty(); }
};

ValidationReport validate(const Program& p);

}  // namespace dclp
