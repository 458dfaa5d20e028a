#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dclp {

class Term;
using TermPtr = std::shared_ptr<const Term>;

// Logical terms. Immutable after construction; shared freely across threads.
// Outcome(t) is a distinct variant (not a compound with a magic functor) so
// the engine can recognize random-variable outcomes structurally.
class Term {
 public:
  enum class Kind { Variable, Integer, Real, Symbol, Compound, Outcome };

  static TermPtr var(std::string name);
  static TermPtr integer(long long value);
  static TermPtr real(double value);
  static TermPtr symbol(std::string name);
  static TermPtr compound(std::string functor, std::vector<TermPtr> args);
  static TermPtr outcome(TermPtr inner);

  Kind kind() const { return kind_; }
  // Variable name, Symbol text, or Compound functor.
  const std::string& name() const { return text_; }
  long long int_value() const { return int_; }
  double real_value() const { return real_; }
  const std::vector<TermPtr>& args() const { return args_; }
  const TermPtr& inner() const { return args_.front(); }

  bool is_ground() const { return ground_; }
  bool is_number() const {
    return kind_ == Kind::Integer || kind_ == Kind::Real;
  }
  double as_real() const {
    return kind_ == Kind::Integer ? static_cast<double>(int_) : real_;
  }

 private:
  Term(Kind kind, std::string text, long long i, double r,
       std::vector<TermPtr> args);

  Kind kind_;
  std::string text_;
  long long int_ = 0;
  double real_ = 0.0;
  std::vector<TermPtr> args_;
  bool ground_ = true;
};

// Total order on terms: Variable < Integer/Real (by numeric value, Integer
// first on ties) < Symbol < Compound (arity, functor, args) < Outcome.
// Real comparison is exact bit-level value comparison (tabling keys never
// coerce).
int compare_terms(const Term& a, const Term& b);
bool term_equals(const Term& a, const Term& b);
std::size_t term_hash(const Term& t);

struct TermPtrLess {
  bool operator()(const TermPtr& a, const TermPtr& b) const {
    return compare_terms(*a, *b) < 0;
  }
};

void collect_vars(const TermPtr& t, std::vector<std::string>& out);
bool contains_var(const TermPtr& t, const std::string& name);

// Atoms. An atom whose predicate is one of dist_eq/dist_lt/dist_leq/dist_gt/
// dist_geq at arity 2 is a probabilistic fact.
struct Atom {
  std::string pred;
  std::vector<TermPtr> args;

  std::size_t arity() const { return args.size(); }
  TermPtr as_term() const;
  bool is_ground() const;
};

bool is_dist_rel(const std::string& pred);
bool is_probabilistic_fact(const Atom& a);
std::optional<Atom> atom_from_term(const TermPtr& t);

int compare_atoms(const Atom& a, const Atom& b);
bool atom_equals(const Atom& a, const Atom& b);
std::size_t atom_hash(const Atom& a);

struct AtomLess {
  bool operator()(const Atom& a, const Atom& b) const {
    return compare_atoms(a, b) < 0;
  }
};

// Reserved predicate names used by the magic transformation. The parser
// rejects user identifiers starting with '$', so these cannot collide.
inline const std::string kCallPred = "$c$";
inline const std::string kWrapPrefix = "$a$";
inline const std::string kDistHeadPred = "$~$";

inline bool is_call_pred(const std::string& pred) { return pred == kCallPred; }
inline bool is_wrapped_pred(const std::string& pred) {
  return pred.rfind(kWrapPrefix, 0) == 0;
}
inline std::string wrapped_name(const std::string& builtin) {
  return kWrapPrefix + builtin;
}
inline std::string unwrapped_name(const std::string& pred) {
  return pred.substr(kWrapPrefix.size());
}

// Idempotent variable bindings. apply() resolves chains fully, so applying
// a substitution twice equals applying it once.
class Substitution {
 public:
  bool bind(const std::string& var, TermPtr value);
  const TermPtr* lookup(const std::string& var) const;
  TermPtr apply(const TermPtr& t) const;
  Atom apply(const Atom& a) const;

  bool empty() const { return bindings_.empty(); }
  std::size_t size() const { return bindings_.size(); }
  const std::map<std::string, TermPtr>& bindings() const { return bindings_; }

  // Trail support for backtracking joins: remembers which names were added.
  void erase(const std::string& var) { bindings_.erase(var); }

 private:
  std::map<std::string, TermPtr> bindings_;
};

// Most general unifier with occurs check. Outcome terms unify structurally:
// Outcome(x) with Outcome(y) iff x unifies with y; Outcome(x) binds a free
// variable; Outcome(x) never unifies with a bound non-Outcome term.
std::optional<Substitution> unify(const TermPtr& a, const TermPtr& b);
std::optional<Substitution> unify_atoms(const Atom& a, const Atom& b);

// Extends `subst` in place; on failure `subst` is left unchanged.
bool unify_into(const TermPtr& a, const TermPtr& b, Substitution& subst);
bool unify_atoms_into(const Atom& a, const Atom& b, Substitution& subst);

// Trail-exposing variants for backtracking joins: names bound by the call
// are appended to `trail` so the caller can undo them after exploring a
// branch. On failure the substitution is restored and nothing is appended.
bool unify_terms_trail(const TermPtr& a, const TermPtr& b, Substitution& subst,
                       std::vector<std::string>& trail);
bool unify_atoms_trail(const Atom& a, const Atom& b, Substitution& subst,
                       std::vector<std::string>& trail);
void undo_trail(Substitution& subst, std::vector<std::string>& trail,
                std::size_t from = 0);

// Renames every variable in order of first appearance to _G0, _G1, ...
// Used to store interpretation atoms in a canonical (variant-deduped) form.
Atom canonicalize_atom(const Atom& a);
// Renames every variable by appending a suffix; used to keep clause and
// stored-atom variable spaces disjoint during joins.
TermPtr rename_vars(const TermPtr& t, const std::string& suffix);
Atom rename_vars(const Atom& a, const std::string& suffix);

std::string term_to_string(const TermPtr& t);
std::string atom_to_string(const Atom& a);

}  // namespace dclp
