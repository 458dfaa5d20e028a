#pragma once

// Internal forward-chaining machinery shared by the sampler, the
// deterministic fixpoint, and the exact enumerator. Not installed.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dclp/engine.hpp"

namespace dclp::internal {

enum class BodyKind { Match, Builtin, Pf };

struct EngineClause {
  bool is_dist = false;
  Atom head;
  TermPtr rv;
  DistributionTemplate dist;
  // Non-probabilistic-fact atoms first (source order), then probabilistic
  // facts (source order): facts are evaluated only on fully grounded
  // instances.
  std::vector<Atom> body;
  std::vector<BodyKind> kinds;
  bool pf_wrapper = false;  // a_dist_rel wrapper clause
};

enum class PfMode { Deterministic, Sampling, Enumerating };

struct PendingBranch {
  TermPtr rv;
  Distribution dist;
};

struct ChainState {
  Interpretation interp;
  ValueTable t_dis;
  FactTable t_pf;
  double weight = 1.0;
  RandomSource rng{0};
  bool aborted = false;  // weight-zero sample / zero-contribution branch
  bool findall_blocked = false;
  bool findall_enabled = false;
  std::vector<PendingBranch> pending;  // enumerator branch requests
  std::set<TermPtr, TermPtrLess> pending_keys;
  // Cycle guard for nested value resolution.
  std::set<TermPtr, TermPtrLess> ensuring;
  int fresh_counter = 0;
};

// NoValue: the variable's distribution resolved to empty support, so no
// value exists and facts naming it are false (distinct from NotReady,
// where a definition may still derive on a later iteration).
enum class Ensure { Ready, NotReady, NoValue, Aborted };

class Engine : public std::enable_shared_from_this<Engine> {
 public:
  Engine(std::vector<EngineClause> clauses, const Program* original,
         const Evidence* evidence, PfMode mode, SamplerConfig cfg,
         const EngineHooks* hooks = nullptr,
         std::optional<long long> poisson_cap = std::nullopt);

  void run_to_fixpoint(ChainState& st) const;
  // Weight after the positive-evidence check; 0 when aborted or e+ fails.
  double final_weight(ChainState& st) const;
  // Membership of a ground atom, also trying its outcome-resolved form.
  bool atom_in_interp(const ChainState& st, const Atom& a) const;
  // Ground truth of an atom in a completed state: probabilistic facts are
  // computed from the value table (false when the variable is undefined),
  // other atoms by interpretation membership.
  bool atom_holds(const ChainState& st, const Atom& a) const;

  // Looks up and resolves the distribution(s) derived for `rv`. Emits a
  // demand call atom and reports NotReady when none is derived yet; throws
  // on conflicting definitions.
  Ensure resolve_distribution(ChainState& st, const TermPtr& rv,
                              Distribution& out) const;

  PfMode mode() const { return mode_; }
  const SamplerConfig& config() const { return cfg_; }
  const Program* original() const { return original_; }
  const Evidence* evidence() const { return evidence_; }

 private:
  void closure_pass(ChainState& st) const;
  void eval_clause(ChainState& st, const EngineClause& cl,
                   std::size_t limit) const;
  void join(ChainState& st, const EngineClause& cl, std::size_t idx,
            Substitution& theta, std::size_t limit) const;
  void emit(ChainState& st, const EngineClause& cl,
            const Substitution& theta) const;
  void insert_derived(ChainState& st, const Atom& a) const;
  struct PfResult {
    bool known = false;
    bool truth = false;
  };
  PfResult eval_pf(ChainState& st, const Atom& pf) const;
  Ensure ensure_value(ChainState& st, const TermPtr& rv) const;
  bool in_evidence(const ChainState& st, const std::vector<Atom>& side,
                   const Atom& pf) const;

  std::vector<EngineClause> clauses_;
  const Program* original_;
  const Evidence* evidence_;
  PfMode mode_;
  SamplerConfig cfg_;
  const EngineHooks* hooks_;
  std::optional<long long> poisson_cap_;
};

std::vector<EngineClause> compile_program(const Program& p);
std::vector<EngineClause> compile_transformed(const TransformedProgram& t);

// Replaces every ~(name) whose resolved name has a tabled value by that
// value, innermost first. hyp_rv/hyp_value optionally overlay one binding.
TermPtr resolve_outcomes_term(const TermPtr& t, const ValueTable& vals,
                              const TermPtr* hyp_rv = nullptr,
                              const TermPtr* hyp_value = nullptr);
Atom resolve_outcomes_atom(const Atom& a, const ValueTable& vals,
                           const TermPtr* hyp_rv = nullptr,
                           const TermPtr* hyp_value = nullptr);
// Innermost outcome term whose name is fully resolved but has no value;
// null when the term is fully resolved.
TermPtr first_unresolved_rv(const TermPtr& t);
TermPtr first_unresolved_rv_atom(const Atom& a);
bool has_outcome(const TermPtr& t);
bool atom_has_outcome(const Atom& a);

// Arithmetic over ground terms: +, -, *, / on integers and reals
// (integer division stays integral only when exact). Returns null on
// non-arithmetic input.
std::optional<TermPtr> eval_arith(const TermPtr& t);
// eval_arith for arithmetic compounds, identity otherwise.
TermPtr value_of(const TermPtr& t);

std::optional<DistributionTemplate> template_from_term(const TermPtr& t);
std::optional<std::vector<TermPtr>> list_elements(const TermPtr& t);

}  // namespace dclp::internal
