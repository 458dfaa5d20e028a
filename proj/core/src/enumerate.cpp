#include "dclp/enumerate.hpp"

#include <set>

#include "chain_internal.hpp"

namespace dclp {

namespace {

using internal::ChainState;
using internal::Engine;
using internal::Ensure;
using internal::first_unresolved_rv_atom;
using internal::resolve_outcomes_atom;

struct Enumerator {
  const Engine& engine;
  const Atom& query;
  const Evidence& evidence;
  const EnumerateOptions& opt;
  OracleResult acc;

  // First random variable mentioned by the query or evidence that is still
  // unassigned; skips variables proven undefinable.
  TermPtr next_target_rv(const ChainState& st,
                         const std::set<std::string>& dead) const {
    auto scan = [&](const Atom& a) -> TermPtr {
      if (!is_probabilistic_fact(a)) return nullptr;
      Atom resolved = resolve_outcomes_atom(a, st.t_dis);
      TermPtr rv = first_unresolved_rv_atom(resolved);
      if (rv && !dead.count(term_to_string(rv))) return rv;
      return nullptr;
    };
    if (TermPtr rv = scan(query)) return rv;
    for (const auto& a : evidence.positive)
      if (TermPtr rv = scan(a)) return rv;
    for (const auto& a : evidence.negative)
      if (TermPtr rv = scan(a)) return rv;
    return nullptr;
  }

  void explore(ChainState st, double path_prob) {
    std::set<std::string> dead;
    while (true) {
      engine.run_to_fixpoint(st);
      if (st.aborted) return;  // inconsistent with evidence: zero mass
      if (!st.pending.empty()) {
        internal::PendingBranch branch = st.pending.front();
        for (const auto& entry : branch.dist.entries()) {
          ChainState child = st;
          child.pending.clear();
          child.pending_keys.clear();
          child.t_dis[branch.rv] = entry.value;
          explore(std::move(child), path_prob * entry.prob);
        }
        return;
      }
      // Force the variables the query/evidence themselves depend on.
      TermPtr rv = next_target_rv(st, dead);
      if (!rv) break;
      Distribution d;
      std::size_t before = st.interp.size();
      Ensure r = engine.resolve_distribution(st, rv, d);
      if (r == Ensure::Aborted || st.aborted) return;
      if (r == Ensure::NoValue || (r == Ensure::Ready && d.empty())) {
        // Empty support: facts naming the variable are false.
        dead.insert(term_to_string(rv));
        continue;
      }
      if (r == Ensure::Ready) {
        if (!d.finite())
          throw EngineError("random variable " + term_to_string(rv) +
                            " has continuous or unbounded support; exact "
                            "enumeration requires finite distributions");
        for (const auto& entry : d.entries()) {
          ChainState child = st;
          child.pending.clear();
          child.pending_keys.clear();
          child.t_dis[rv] = entry.value;
          explore(std::move(child), path_prob * entry.prob);
        }
        return;
      }
      // NotReady: a demand was emitted. If nothing changed, the variable
      // has no derivable definition in this world; facts naming it are
      // simply false.
      if (st.interp.size() == before) dead.insert(term_to_string(rv));
    }

    // Complete world.
    if (++acc.worlds > opt.max_worlds)
      throw EngineError("assignment space exceeds the enumeration cap of " +
                        std::to_string(opt.max_worlds) + " worlds");
    bool e_ok = true;
    for (const auto& a : evidence.positive)
      e_ok = e_ok && engine.atom_holds(st, a);
    for (const auto& a : evidence.negative)
      e_ok = e_ok && !engine.atom_holds(st, a);
    if (!e_ok) return;
    acc.p_e += path_prob;
    if (engine.atom_holds(st, query)) acc.p_q_and_e += path_prob;
  }
};

OracleResult run_enumeration(const Engine& engine, const Atom& query,
                             const Evidence& e, const EnumerateOptions& opt) {
  Enumerator en{engine, query, e, opt, {}};
  en.explore(ChainState{}, 1.0);
  return en.acc;
}

SamplerConfig enum_config(const EnumerateOptions& opt) {
  SamplerConfig cfg;
  cfg.max_derived = opt.max_derived;
  return cfg;
}

}  // namespace

OracleResult exact_enumerate(const Program& p, const Atom& query,
                             const Evidence& e, const EnumerateOptions& opt) {
  if (!query.is_ground()) throw EngineError("query atom must be ground");
  Engine engine(internal::compile_program(p), &p, &e,
                internal::PfMode::Enumerating, enum_config(opt), nullptr,
                opt.poisson_cap);
  return run_enumeration(engine, query, e, opt);
}

OracleResult exact_enumerate_transformed(const TransformedProgram& t,
                                         const Atom& query, const Evidence& e,
                                         const EnumerateOptions& opt) {
  if (!query.is_ground()) throw EngineError("query atom must be ground");
  TransformedProgram seeded = seed_program(t, query, e);
  Engine engine(internal::compile_transformed(seeded), nullptr, &e,
                internal::PfMode::Enumerating, enum_config(opt), nullptr,
                opt.poisson_cap);
  return run_enumeration(engine, query, e, opt);
}

}  // namespace dclp
