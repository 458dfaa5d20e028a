#include "dclp/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <mutex>
#include <thread>

#include "chain_internal.hpp"

namespace dclp {

// ---- Interpretation ----

namespace {

inline std::uint64_t mix64(std::uint64_t h, std::uint64_t v) {
  return h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
}

// Numeric shape code of the first argument; 0 means "variable-shaped"
// (unusable as a discriminator).
std::uint64_t coarse_code(const Term& t) {
  switch (t.kind()) {
    case Term::Kind::Variable:
      return 0;
    case Term::Kind::Integer:
      return mix64(1, static_cast<std::uint64_t>(t.int_value()));
    case Term::Kind::Real:
      return mix64(2, std::hash<double>{}(t.real_value()));
    case Term::Kind::Symbol:
      return mix64(3, std::hash<std::string>{}(t.name()));
    case Term::Kind::Compound:
      return mix64(mix64(4, std::hash<std::string>{}(t.name())),
                   t.args().size());
    case Term::Kind::Outcome: {
      std::uint64_t inner = coarse_code(*t.inner());
      return inner == 0 ? 0 : mix64(5, inner);
    }
  }
  return 0;
}

std::uint64_t pred_code(const Atom& a) {
  return mix64(std::hash<std::string>{}(a.pred), a.args.size());
}

void append_limited(const std::vector<std::size_t>& src, std::size_t limit,
                    std::vector<std::size_t>& out) {
  for (auto i : src) {
    if (i >= limit) break;
    out.push_back(i);
  }
}

void merge_sorted(const std::vector<std::size_t>* a,
                  const std::vector<std::size_t>* b, std::size_t limit,
                  std::vector<std::size_t>& out) {
  std::size_t i = 0, j = 0;
  std::size_t na = a ? a->size() : 0, nb = b ? b->size() : 0;
  while (i < na || j < nb) {
    std::size_t va = i < na ? (*a)[i] : SIZE_MAX;
    std::size_t vb = j < nb ? (*b)[j] : SIZE_MAX;
    std::size_t v = std::min(va, vb);
    if (v >= limit) break;
    if (va <= vb)
      ++i;
    else
      ++j;
    out.push_back(v);
  }
}

}  // namespace

bool Interpretation::contains(const Atom& a) const {
  const Atom* probe = &a;
  Atom canon;
  if (!a.is_ground()) {
    canon = canonicalize_atom(a);
    probe = &canon;
  }
  auto it = dedupe_.find(atom_hash(*probe));
  if (it == dedupe_.end()) return false;
  for (auto i : it->second)
    if (atom_equals(atoms_[i], *probe)) return true;
  return false;
}

bool Interpretation::insert(const Atom& a) {
  Atom canon = canonicalize_atom(a);
  std::size_t h = atom_hash(canon);
  auto& bucket = dedupe_[h];
  for (auto i : bucket)
    if (atom_equals(atoms_[i], canon)) return false;
  std::size_t idx = atoms_.size();
  bucket.push_back(idx);
  if (canon.args.empty()) {
    by_pred_[pred_code(canon)].push_back(idx);
  } else {
    std::uint64_t pk = pred_code(canon);
    std::uint64_t ck = coarse_code(*canon.args[0]);
    if (ck)
      coarse_[mix64(pk, ck)].push_back(idx);
    else
      var_first_[pk].push_back(idx);
    by_pred_[pk].push_back(idx);
  }
  atoms_.push_back(std::move(canon));
  return true;
}

void Interpretation::candidates(const Atom& pattern, std::size_t limit,
                                std::vector<std::size_t>& out) const {
  out.clear();
  std::uint64_t pk = pred_code(pattern);
  if (pattern.args.empty()) {
    if (auto it = by_pred_.find(pk); it != by_pred_.end())
      append_limited(it->second, limit, out);
    return;
  }
  std::uint64_t ck = coarse_code(*pattern.args[0]);
  if (ck == 0) {
    if (auto it = by_pred_.find(pk); it != by_pred_.end())
      append_limited(it->second, limit, out);
    return;
  }
  auto exact = coarse_.find(mix64(pk, ck));
  auto vars = var_first_.find(pk);
  const std::vector<std::size_t>* ev =
      exact == coarse_.end() ? nullptr : &exact->second;
  const std::vector<std::size_t>* vv =
      vars == var_first_.end() ? nullptr : &vars->second;
  if (!vv) {
    if (ev) append_limited(*ev, limit, out);
    return;
  }
  merge_sorted(ev, vv, limit, out);
}

namespace internal {

// ---- term helpers ----

TermPtr resolve_outcomes_term(const TermPtr& t, const ValueTable& vals,
                              const TermPtr* hyp_rv,
                              const TermPtr* hyp_value) {
  switch (t->kind()) {
    case Term::Kind::Compound: {
      bool changed = false;
      std::vector<TermPtr> args;
      args.reserve(t->args().size());
      for (const auto& a : t->args()) {
        args.push_back(resolve_outcomes_term(a, vals, hyp_rv, hyp_value));
        changed = changed || args.back().get() != a.get();
      }
      if (!changed) return t;
      return Term::compound(t->name(), std::move(args));
    }
    case Term::Kind::Outcome: {
      TermPtr inner = resolve_outcomes_term(t->inner(), vals, hyp_rv,
                                            hyp_value);
      if (inner->is_ground()) {
        if (hyp_rv && hyp_value && term_equals(**hyp_rv, *inner))
          return *hyp_value;
        auto it = vals.find(inner);
        if (it != vals.end()) return it->second;
      }
      if (inner.get() != t->inner().get()) return Term::outcome(inner);
      return t;
    }
    default:
      return t;
  }
}

Atom resolve_outcomes_atom(const Atom& a, const ValueTable& vals,
                           const TermPtr* hyp_rv, const TermPtr* hyp_value) {
  Atom out{a.pred, {}};
  out.args.reserve(a.args.size());
  for (const auto& t : a.args)
    out.args.push_back(resolve_outcomes_term(t, vals, hyp_rv, hyp_value));
  return out;
}

TermPtr first_unresolved_rv(const TermPtr& t) {
  for (const auto& a : t->args())
    if (TermPtr r = first_unresolved_rv(a)) return r;
  if (t->kind() == Term::Kind::Outcome && t->inner()->is_ground())
    return t->inner();
  return nullptr;
}

TermPtr first_unresolved_rv_atom(const Atom& a) {
  for (const auto& t : a.args)
    if (TermPtr r = first_unresolved_rv(t)) return r;
  return nullptr;
}

bool has_outcome(const TermPtr& t) {
  if (t->kind() == Term::Kind::Outcome) return true;
  for (const auto& a : t->args())
    if (has_outcome(a)) return true;
  return false;
}

bool atom_has_outcome(const Atom& a) {
  for (const auto& t : a.args)
    if (has_outcome(t)) return true;
  return false;
}

std::optional<TermPtr> eval_arith(const TermPtr& t) {
  switch (t->kind()) {
    case Term::Kind::Integer:
    case Term::Kind::Real:
      return t;
    case Term::Kind::Compound: {
      if (t->args().size() != 2) return std::nullopt;
      const std::string& op = t->name();
      if (op != "+" && op != "-" && op != "*" && op != "/")
        return std::nullopt;
      auto a = eval_arith(t->args()[0]);
      auto b = eval_arith(t->args()[1]);
      if (!a || !b) return std::nullopt;
      bool ints = (*a)->kind() == Term::Kind::Integer &&
                  (*b)->kind() == Term::Kind::Integer;
      if (ints) {
        long long x = (*a)->int_value(), y = (*b)->int_value();
        if (op == "+") return Term::integer(x + y);
        if (op == "-") return Term::integer(x - y);
        if (op == "*") return Term::integer(x * y);
        if (y == 0) return std::nullopt;
        if (x % y == 0) return Term::integer(x / y);
        return Term::real(static_cast<double>(x) / static_cast<double>(y));
      }
      double x = (*a)->as_real(), y = (*b)->as_real();
      if (op == "+") return Term::real(x + y);
      if (op == "-") return Term::real(x - y);
      if (op == "*") return Term::real(x * y);
      return Term::real(x / y);
    }
    default:
      return std::nullopt;
  }
}

TermPtr value_of(const TermPtr& t) {
  auto v = eval_arith(t);
  return v ? *v : t;
}

std::optional<std::vector<TermPtr>> list_elements(const TermPtr& t) {
  std::vector<TermPtr> out;
  TermPtr cur = t;
  while (true) {
    if (cur->kind() == Term::Kind::Symbol && cur->name() == "[]") return out;
    if (cur->kind() == Term::Kind::Compound && cur->name() == "[|]" &&
        cur->args().size() == 2) {
      out.push_back(cur->args()[0]);
      cur = cur->args()[1];
      continue;
    }
    return std::nullopt;
  }
}

std::optional<DistributionTemplate> template_from_term(const TermPtr& t) {
  DistributionTemplate d;
  if (auto items = list_elements(t)) {
    d.kind = DistKind::Categorical;
    for (const auto& item : *items) {
      if (item->kind() != Term::Kind::Compound || item->name() != ":" ||
          item->args().size() != 2)
        return std::nullopt;
      d.entries.emplace_back(item->args()[0], item->args()[1]);
    }
    return d;
  }
  if (t->kind() != Term::Kind::Compound) return std::nullopt;
  const auto& args = t->args();
  if (t->name() == "poisson" && args.size() == 1)
    d.kind = DistKind::Poisson;
  else if (t->name() == "gamma" && args.size() == 2)
    d.kind = DistKind::Gamma;
  else if (t->name() == "uniform" && args.size() == 1)
    d.kind = DistKind::UniformDiscrete;
  else if (t->name() == "uniform" && args.size() == 2)
    d.kind = DistKind::UniformContinuous;
  else
    return std::nullopt;
  d.params = args;
  return d;
}

namespace {

double number_param(const TermPtr& t, const char* what) {
  auto v = eval_arith(t);
  if (!v || !(*v)->is_number())
    throw EngineError(std::string("non-numeric ") + what +
                      " in distribution: " + term_to_string(t));
  return (*v)->as_real();
}

Distribution build_distribution(const DistributionTemplate& d) {
  switch (d.kind) {
    case DistKind::Categorical: {
      std::vector<CategoricalEntry> entries;
      for (const auto& [p, v] : d.entries) {
        double prob = number_param(p, "probability");
        TermPtr val = value_of(v);
        if (!val->is_ground())
          throw EngineError("unbound value in categorical distribution: " +
                            term_to_string(v));
        entries.push_back({prob, val});
      }
      return Distribution::categorical(std::move(entries));
    }
    case DistKind::UniformDiscrete: {
      auto items = list_elements(d.params[0]);
      if (!items)
        throw EngineError("uniform/1 expects a list, got " +
                          term_to_string(d.params[0]));
      std::vector<TermPtr> values;
      for (const auto& it : *items) values.push_back(value_of(it));
      return Distribution::uniform_discrete(std::move(values));
    }
    case DistKind::UniformContinuous:
      return Distribution::uniform_continuous(
          number_param(d.params[0], "low bound"),
          number_param(d.params[1], "high bound"));
    case DistKind::Poisson:
      return Distribution::poisson(number_param(d.params[0], "rate"));
    case DistKind::Gamma:
      return Distribution::gamma(number_param(d.params[0], "shape"),
                                 number_param(d.params[1], "scale"));
  }
  throw EngineError("unreachable distribution kind");
}

Distribution truncate_poisson(double rate, long long cap) {
  std::vector<CategoricalEntry> entries;
  double p = std::exp(-rate);
  double total = 0.0;
  for (long long k = 0; k <= cap; ++k) {
    if (k > 0) p *= rate / static_cast<double>(k);
    entries.push_back({p, Term::integer(k)});
    total += p;
  }
  for (auto& e : entries) e.prob /= total;
  return Distribution::categorical(std::move(entries));
}

BodyKind classify_atom(const Atom& a, const std::set<std::string>& whitelist) {
  if (is_probabilistic_fact(a)) return BodyKind::Pf;
  if (a.pred == "is" || a.pred == "between" || a.pred == "findall") {
    if (whitelist.count(a.pred + "/" + std::to_string(a.arity())))
      return BodyKind::Builtin;
  }
  return BodyKind::Match;
}

void plan_body(const std::vector<Atom>& body,
               const std::set<std::string>& whitelist, EngineClause& out) {
  std::vector<Atom> pf;
  std::vector<BodyKind> pf_kinds;
  for (const auto& a : body) {
    BodyKind k = classify_atom(a, whitelist);
    if (k == BodyKind::Pf) {
      pf.push_back(a);
      pf_kinds.push_back(k);
    } else {
      out.body.push_back(a);
      out.kinds.push_back(k);
    }
  }
  out.body.insert(out.body.end(), pf.begin(), pf.end());
  out.kinds.insert(out.kinds.end(), pf_kinds.begin(), pf_kinds.end());
}

std::vector<EngineClause> compile_lists(
    const std::vector<Clause>& cs, const std::vector<DistributionalClause>& ds,
    const std::set<std::string>& whitelist) {
  std::vector<EngineClause> out;
  out.reserve(cs.size() + ds.size());
  for (const auto& c : cs) {
    EngineClause ec;
    ec.head = c.head;
    ec.pf_wrapper = is_wrapped_pred(c.head.pred) &&
                    is_dist_rel(unwrapped_name(c.head.pred));
    plan_body(c.body, whitelist, ec);
    out.push_back(std::move(ec));
  }
  for (const auto& dc : ds) {
    EngineClause ec;
    ec.is_dist = true;
    ec.rv = dc.rv;
    ec.dist = dc.dist;
    plan_body(dc.body, whitelist, ec);
    out.push_back(std::move(ec));
  }
  return out;
}

}  // namespace

std::vector<EngineClause> compile_program(const Program& p) {
  return compile_lists(p.clauses, p.dist_clauses, p.builtin_whitelist);
}

std::vector<EngineClause> compile_transformed(const TransformedProgram& t) {
  return compile_lists(t.clauses, t.dist_clauses, t.builtin_whitelist);
}

// ---- Engine ----

Engine::Engine(std::vector<EngineClause> clauses, const Program* original,
               const Evidence* evidence, PfMode mode, SamplerConfig cfg,
               const EngineHooks* hooks, std::optional<long long> poisson_cap)
    : clauses_(std::move(clauses)), original_(original), evidence_(evidence),
      mode_(mode), cfg_(cfg), hooks_(hooks), poisson_cap_(poisson_cap) {}

void Engine::insert_derived(ChainState& st, const Atom& a) const {
  if (mode_ != PfMode::Deterministic && evidence_ &&
      !evidence_->negative.empty()) {
    for (const auto& neg : evidence_->negative) {
      Atom resolved_neg = resolve_outcomes_atom(neg, st.t_dis);
      if (atom_equals(resolved_neg, a) || atom_equals(neg, a)) {
        st.aborted = true;  // derived head contradicts negative evidence
        return;
      }
    }
  }
  st.interp.insert(a);
  if (st.interp.size() > cfg_.max_derived)
    throw EngineError("derived-atom cap exceeded (" +
                      std::to_string(cfg_.max_derived) +
                      "); the program may not terminate");
}

void Engine::closure_pass(ChainState& st) const {
  if (mode_ == PfMode::Deterministic) return;
  std::size_t n = st.interp.size();
  for (std::size_t i = 0; i < n && !st.aborted; ++i) {
    const Atom& a = st.interp.atoms()[i];
    if (!atom_has_outcome(a)) continue;
    Atom r = resolve_outcomes_atom(a, st.t_dis);
    if (!atom_equals(r, a)) insert_derived(st, r);
  }
}

bool Engine::in_evidence(const ChainState& st, const std::vector<Atom>& side,
                         const Atom& pf) const {
  for (const auto& ev : side) {
    if (ev.pred != pf.pred || ev.arity() != pf.arity()) continue;
    Atom resolved = resolve_outcomes_atom(ev, st.t_dis);
    if (atom_equals(resolved, pf)) return true;
  }
  return false;
}

Ensure Engine::resolve_distribution(ChainState& st, const TermPtr& rv,
                                    Distribution& out) const {
  Atom pattern{kDistHeadPred, {rv, Term::var("_D")}};
  std::vector<std::size_t> cand;
  st.interp.candidates(pattern, st.interp.size(), cand);
  std::vector<Distribution> found;
  for (auto i : cand) {
    const Atom& head = st.interp.atoms()[i];
    if (head.args.size() != 2 || !term_equals(*head.args[0], *rv)) continue;
    TermPtr dist_term = resolve_outcomes_term(head.args[1], st.t_dis);
    while (TermPtr inner = first_unresolved_rv(dist_term)) {
      Ensure r = ensure_value(st, inner);
      if (r != Ensure::Ready) return r;
      dist_term = resolve_outcomes_term(dist_term, st.t_dis);
    }
    auto tmpl = template_from_term(dist_term);
    if (!tmpl)
      throw EngineError("malformed distribution term " +
                        term_to_string(dist_term));
    Distribution d = build_distribution(*tmpl);
    bool dup = false;
    for (const auto& prev : found) dup = dup || prev.equals(d);
    if (!dup) found.push_back(std::move(d));
  }
  if (found.empty()) {
    // Demand the variable: the guard of its distributional clause matches
    // this call atom on a later iteration.
    Atom demand{"dist_eq", {Term::outcome(rv), Term::var("_D")}};
    st.interp.insert(make_call_atom(demand));
    return Ensure::NotReady;
  }
  if (found.size() > 1)
    throw EngineError("conflicting distributions for random variable " +
                      term_to_string(rv) + ": " + found[0].to_string() +
                      " vs " + found[1].to_string());
  out = std::move(found[0]);
  if (mode_ == PfMode::Enumerating && out.kind() == DistKind::Poisson &&
      poisson_cap_)
    out = truncate_poisson(out.param0(), *poisson_cap_);
  return Ensure::Ready;
}

Ensure Engine::ensure_value(ChainState& st, const TermPtr& rv) const {
  if (st.t_dis.count(rv)) return Ensure::Ready;
  if (st.ensuring.count(rv))
    throw EngineError("cyclic value dependency for random variable " +
                      term_to_string(rv));
  st.ensuring.insert(rv);
  struct Guard {
    std::set<TermPtr, TermPtrLess>& s;
    TermPtr k;
    ~Guard() { s.erase(k); }
  } guard{st.ensuring, rv};

  Distribution d;
  Ensure r = resolve_distribution(st, rv, d);
  if (r != Ensure::Ready) return r;

  switch (mode_) {
    case PfMode::Deterministic:
      return Ensure::NotReady;
    case PfMode::Enumerating: {
      if (!d.finite())
        throw EngineError(
            "random variable " + term_to_string(rv) +
            " has continuous or unbounded support; exact enumeration "
            "requires finite distributions");
      if (d.empty()) return Ensure::NoValue;
      if (!st.pending_keys.count(rv)) {
        st.pending_keys.insert(rv);
        st.pending.push_back({rv, d});
      }
      return Ensure::NotReady;
    }
    case PfMode::Sampling:
      break;
  }

  if (d.finite() && d.empty()) return Ensure::NoValue;
  TermPtr value;
  if (cfg_.method == Method::LikelihoodWeighting && d.finite() && evidence_) {
    LookaheadContext ctx{&st.interp, &st.t_dis, original_, nullptr, nullptr};
    PruneOutcome pruned = lookahead_prune(rv, d, *evidence_, cfg_.depth, ctx);
    st.weight *= pruned.weight;
    if (hooks_ && hooks_->on_prune && !pruned.removed.empty()) {
      SampleSnapshot snap{shared_from_this(),
                          std::make_shared<const ChainState>(st)};
      for (const auto& ev : pruned.removed) hooks_->on_prune(ev, snap);
    }
    if (pruned.dist.empty()) {
      st.aborted = true;
      return Ensure::Aborted;
    }
    value = pruned.dist.draw(st.rng);
  } else {
    value = d.draw(st.rng);
  }
  st.t_dis.emplace(rv, std::move(value));
  return Ensure::Ready;
}

Engine::PfResult Engine::eval_pf(ChainState& st, const Atom& pf_in) const {
  Atom pf = pf_in;
  bool no_value = false;
  while (true) {
    TermPtr rv = first_unresolved_rv_atom(pf);
    if (!rv) break;
    Ensure r = ensure_value(st, rv);
    if (r == Ensure::NoValue) {
      // The variable has empty support: no value exists, the fact is false.
      no_value = true;
      break;
    }
    if (r != Ensure::Ready) return {};
    pf = resolve_outcomes_atom(pf, st.t_dis);
  }
  if (auto it = st.t_pf.find(pf); it != st.t_pf.end())
    return {true, it->second.truth};
  bool truth = no_value ? false
                        : compare_values(pf.pred, value_of(pf.args[0]),
                                         value_of(pf.args[1]));
  if (mode_ != PfMode::Deterministic && evidence_) {
    if ((truth && in_evidence(st, evidence_->negative, pf)) ||
        (!truth && in_evidence(st, evidence_->positive, pf))) {
      st.aborted = true;  // the world contradicts fact evidence
      return {};
    }
  }
  if (!no_value) st.t_pf.emplace(pf, FactEntry{truth, 1.0});
  return {true, truth};
}

void Engine::emit(ChainState& st, const EngineClause& cl,
                  const Substitution& theta) const {
  if (st.aborted) return;
  auto fire_derive_hook = [&](const Atom& head) {
    if (!hooks_ || !hooks_->on_derive) return;
    std::vector<Atom> body_insts;
    for (const auto& b : cl.body)
      body_insts.push_back(resolve_outcomes_atom(theta.apply(b), st.t_dis));
    hooks_->on_derive(head, body_insts);
  };
  if (cl.is_dist) {
    TermPtr rv_inst =
        resolve_outcomes_term(theta.apply(cl.rv), st.t_dis);
    TermPtr dist_term =
        resolve_outcomes_term(theta.apply(cl.dist.as_term()), st.t_dis);
    Atom head{kDistHeadPred, {rv_inst, dist_term}};
    fire_derive_hook(head);
    insert_derived(st, head);
    return;
  }
  Atom head = resolve_outcomes_atom(theta.apply(cl.head), st.t_dis);
  fire_derive_hook(head);
  insert_derived(st, head);
  if (st.aborted) return;
  if (cl.pf_wrapper && !cl.body.empty()) {
    // The bare probabilistic fact joins the interpretation so evidence and
    // query membership checks can see it.
    Atom pf = resolve_outcomes_atom(theta.apply(cl.body.back()), st.t_dis);
    insert_derived(st, pf);
  }
}

void Engine::join(ChainState& st, const EngineClause& cl, std::size_t idx,
                  Substitution& theta, std::size_t limit) const {
  if (st.aborted) return;
  if (idx == cl.body.size()) {
    emit(st, cl, theta);
    return;
  }
  Atom inst = resolve_outcomes_atom(theta.apply(cl.body[idx]), st.t_dis);
  switch (cl.kinds[idx]) {
    case BodyKind::Match: {
      std::vector<std::size_t> cand;
      st.interp.candidates(inst, limit, cand);
      for (auto i : cand) {
        Atom stored = st.interp.atoms()[i];
        if (!stored.is_ground())
          stored =
              rename_vars(stored, "#" + std::to_string(st.fresh_counter++));
        std::vector<std::string> trail;
        if (unify_atoms_trail(inst, stored, theta, trail)) {
          join(st, cl, idx + 1, theta, limit);
          undo_trail(theta, trail);
          if (st.aborted) return;
        }
      }
      return;
    }
    case BodyKind::Builtin: {
      if (inst.pred == "is" && inst.arity() == 2) {
        auto v = eval_arith(inst.args[1]);
        if (!v) return;
        std::vector<std::string> trail;
        if (unify_terms_trail(inst.args[0], *v, theta, trail)) {
          join(st, cl, idx + 1, theta, limit);
          undo_trail(theta, trail);
        }
        return;
      }
      if (inst.pred == "between" && inst.arity() == 3) {
        auto lo = eval_arith(inst.args[0]);
        auto hi = eval_arith(inst.args[1]);
        if (!lo || !hi || (*lo)->kind() != Term::Kind::Integer ||
            (*hi)->kind() != Term::Kind::Integer)
          return;
        long long l = (*lo)->int_value(), h = (*hi)->int_value();
        const TermPtr& x = inst.args[2];
        TermPtr xw = theta.apply(x);
        if (xw->kind() == Term::Kind::Integer) {
          if (xw->int_value() >= l && xw->int_value() <= h)
            join(st, cl, idx + 1, theta, limit);
          return;
        }
        if (h - l > 1000000)
          throw EngineError("between/3 range too large to enumerate");
        for (long long k = l; k <= h && !st.aborted; ++k) {
          std::vector<std::string> trail;
          if (unify_terms_trail(x, Term::integer(k), theta, trail)) {
            join(st, cl, idx + 1, theta, limit);
            undo_trail(theta, trail);
          }
        }
        return;
      }
      if (inst.pred == "findall" && inst.arity() == 3) {
        if (!st.findall_enabled) {
          st.findall_blocked = true;
          return;
        }
        auto goal = atom_from_term(inst.args[1]);
        if (!goal)
          throw EngineError("findall goal must be an atom, got " +
                            term_to_string(inst.args[1]));
        std::vector<std::size_t> cand;
        st.interp.candidates(*goal, limit, cand);
        std::vector<TermPtr> items;
        for (auto i : cand) {
          Atom stored = st.interp.atoms()[i];
          if (!stored.is_ground())
            stored =
                rename_vars(stored, "#" + std::to_string(st.fresh_counter++));
          Substitution local;
          if (unify_atoms_into(*goal, stored, local))
            items.push_back(local.apply(inst.args[0]));
        }
        std::sort(items.begin(), items.end(), TermPtrLess{});
        TermPtr list = Term::symbol("[]");
        for (auto it = items.rbegin(); it != items.rend(); ++it)
          list = Term::compound("[|]", {*it, list});
        std::vector<std::string> trail;
        if (unify_terms_trail(inst.args[2], list, theta, trail)) {
          join(st, cl, idx + 1, theta, limit);
          undo_trail(theta, trail);
        }
        return;
      }
      return;
    }
    case BodyKind::Pf: {
      if (!inst.is_ground()) return;  // floundering instance: skip
      PfResult r = eval_pf(st, inst);
      if (r.known && r.truth) join(st, cl, idx + 1, theta, limit);
      return;
    }
  }
}

void Engine::eval_clause(ChainState& st, const EngineClause& cl,
                         std::size_t limit) const {
  Substitution theta;
  join(st, cl, 0, theta, limit);
}

void Engine::run_to_fixpoint(ChainState& st) const {
  bool findall_pass = false;
  while (!st.aborted) {
    closure_pass(st);
    if (st.aborted) return;
    std::size_t before = st.interp.size();
    std::size_t values_before = st.t_dis.size();
    st.findall_blocked = false;
    st.findall_enabled = findall_pass;
    for (const auto& cl : clauses_) {
      eval_clause(st, cl, before);
      if (st.aborted) return;
    }
    bool changed =
        st.interp.size() > before || st.t_dis.size() > values_before;
    if (changed) {
      findall_pass = false;
      continue;
    }
    if (!findall_pass && st.findall_blocked) {
      // Quiescent: aggregate findall goals over the saturated extension.
      // Under enumeration, pending value branches must be taken first or
      // the aggregate could be computed over a not-yet-derived extension.
      if (mode_ == PfMode::Enumerating && !st.pending.empty()) return;
      findall_pass = true;
      continue;
    }
    return;
  }
}

bool Engine::atom_in_interp(const ChainState& st, const Atom& a) const {
  if (st.interp.contains(a)) return true;
  Atom resolved = resolve_outcomes_atom(a, st.t_dis);
  return !atom_equals(resolved, a) && st.interp.contains(resolved);
}

bool Engine::atom_holds(const ChainState& st, const Atom& a) const {
  if (is_probabilistic_fact(a)) {
    Atom resolved = resolve_outcomes_atom(a, st.t_dis);
    if (first_unresolved_rv_atom(resolved)) return false;  // undefined rv
    return compare_values(resolved.pred, value_of(resolved.args[0]),
                          value_of(resolved.args[1]));
  }
  return atom_in_interp(st, a);
}

double Engine::final_weight(ChainState& st) const {
  if (st.aborted) return 0.0;
  if (evidence_) {
    for (const auto& a : evidence_->positive)
      if (!atom_in_interp(st, a)) return 0.0;
  }
  return st.weight;
}

}  // namespace internal

// ---- depth-bounded backward reasoning ----

namespace {

using internal::eval_arith;
using internal::first_unresolved_rv_atom;
using internal::list_elements;
using internal::resolve_outcomes_atom;
using internal::value_of;

struct Prover {
  const LookaheadContext& ctx;
  bool optimistic;
  long steps = 0;
  int fresh = 0;
  static constexpr long kStepLimit = 1000000;

  Atom resolve(const Atom& a) const {
    const TermPtr* hrv = ctx.hyp_rv ? &ctx.hyp_rv : nullptr;
    const TermPtr* hval = ctx.hyp_value ? &ctx.hyp_value : nullptr;
    return resolve_outcomes_atom(a, *ctx.values, hrv, hval);
  }

  bool assume_and_continue(const std::vector<std::pair<Atom, int>>& goals,
                           std::size_t i, Substitution& theta) {
    return optimistic ? prove_seq(goals, i + 1, theta) : false;
  }

  bool prove_seq(const std::vector<std::pair<Atom, int>>& goals,
                 std::size_t i, Substitution& theta) {
    if (i >= goals.size()) return true;
    if (++steps > kStepLimit) return optimistic;
    Atom g = resolve(theta.apply(goals[i].first));
    int depth = goals[i].second;

    if (is_probabilistic_fact(g)) {
      if (!g.is_ground() || first_unresolved_rv_atom(g))
        return assume_and_continue(goals, i, theta);
      bool truth;
      try {
        truth = compare_values(g.pred, value_of(g.args[0]),
                               value_of(g.args[1]));
      } catch (const DistributionError&) {
        return assume_and_continue(goals, i, theta);
      }
      return truth ? prove_seq(goals, i + 1, theta) : false;
    }

    if (ctx.original &&
        ctx.original->has_builtin(g.pred, g.arity())) {
      if (g.pred == "is" && g.arity() == 2) {
        auto v = eval_arith(g.args[1]);
        if (!v) return assume_and_continue(goals, i, theta);
        std::vector<std::string> trail;
        bool ok = false;
        if (unify_terms_trail(g.args[0], *v, theta, trail)) {
          ok = prove_seq(goals, i + 1, theta);
          if (!ok) undo_trail(theta, trail);
        }
        return ok;
      }
      if (g.pred == "between" && g.arity() == 3) {
        auto lo = eval_arith(g.args[0]);
        auto hi = eval_arith(g.args[1]);
        if (!lo || !hi || (*lo)->kind() != Term::Kind::Integer ||
            (*hi)->kind() != Term::Kind::Integer)
          return assume_and_continue(goals, i, theta);
        long long l = (*lo)->int_value(), h = (*hi)->int_value();
        if (h - l > 100000) return assume_and_continue(goals, i, theta);
        for (long long k = l; k <= h; ++k) {
          std::vector<std::string> trail;
          if (unify_terms_trail(g.args[2], Term::integer(k), theta, trail)) {
            if (prove_seq(goals, i + 1, theta)) return true;
            undo_trail(theta, trail);
          }
        }
        return false;
      }
      if (g.pred == "findall" && g.arity() == 3) {
        auto goal = atom_from_term(g.args[1]);
        if (!goal || !ctx.interp) return assume_and_continue(goals, i, theta);
        std::vector<std::size_t> cand;
        ctx.interp->candidates(*goal, ctx.interp->size(), cand);
        std::vector<TermPtr> items;
        for (auto idx : cand) {
          Atom stored = ctx.interp->atoms()[idx];
          if (!stored.is_ground())
            stored = rename_vars(stored, "#l" + std::to_string(fresh++));
          Substitution local;
          if (unify_atoms_into(*goal, stored, local))
            items.push_back(local.apply(g.args[0]));
        }
        std::sort(items.begin(), items.end(), TermPtrLess{});
        TermPtr list = Term::symbol("[]");
        for (auto it = items.rbegin(); it != items.rend(); ++it)
          list = Term::compound("[|]", {*it, list});
        std::vector<std::string> trail;
        bool ok = false;
        if (unify_terms_trail(g.args[2], list, theta, trail)) {
          ok = prove_seq(goals, i + 1, theta);
          if (!ok) undo_trail(theta, trail);
        }
        return ok;
      }
    }

    // Established atoms need no further search.
    if (g.is_ground() && ctx.interp && ctx.interp->contains(g))
      return prove_seq(goals, i + 1, theta);
    if (depth <= 0) return assume_and_continue(goals, i, theta);

    if (!ctx.original) return assume_and_continue(goals, i, theta);
    for (const auto& c : ctx.original->clauses) {
      if (c.head.pred != g.pred || c.head.arity() != g.arity()) continue;
      std::string suffix = "#r" + std::to_string(fresh++);
      Atom head = rename_vars(c.head, suffix);
      std::vector<std::string> trail;
      if (!unify_atoms_trail(g, head, theta, trail)) continue;
      std::vector<std::pair<Atom, int>> rest;
      rest.reserve(c.body.size() + goals.size() - i - 1);
      for (const auto& b : c.body)
        rest.emplace_back(rename_vars(b, suffix), depth - 1);
      for (std::size_t k = i + 1; k < goals.size(); ++k)
        rest.push_back(goals[k]);
      if (prove_seq(rest, 0, theta)) return true;
      undo_trail(theta, trail);
    }
    return false;
  }
};

bool bounded_provable(const Atom& goal, unsigned depth,
                      const LookaheadContext& ctx, bool optimistic) {
  Prover prover{ctx, optimistic};
  Substitution theta;
  std::vector<std::pair<Atom, int>> goals{{goal, static_cast<int>(depth)}};
  return prover.prove_seq(goals, 0, theta);
}

}  // namespace

bool maybe_proof(const Atom& goal, unsigned depth,
                 const LookaheadContext& ctx) {
  if (depth == 0) return true;  // bound reached immediately
  return bounded_provable(goal, depth, ctx, true);
}

bool maybe_fail(const Atom& goal, unsigned depth, const LookaheadContext& ctx) {
  if (depth == 0) return true;  // assumed to fail at the bound
  return !bounded_provable(goal, depth, ctx, false);
}

namespace {

// The value a dist_eq evidence atom forces for `rv`, when determinable.
std::optional<TermPtr> evidence_forced_value(const Atom& ev, const TermPtr& rv,
                                             const ValueTable& vals) {
  if (ev.pred != "dist_eq" || ev.arity() != 2) return std::nullopt;
  for (int side = 0; side < 2; ++side) {
    const TermPtr& a = ev.args[static_cast<std::size_t>(side)];
    const TermPtr& b = ev.args[static_cast<std::size_t>(1 - side)];
    if (a->kind() != Term::Kind::Outcome) continue;
    TermPtr name = internal::resolve_outcomes_term(a->inner(), vals);
    if (!term_equals(*name, *rv)) continue;
    TermPtr v = internal::resolve_outcomes_term(b, vals);
    if (internal::has_outcome(v)) continue;  // not determinable yet
    return value_of(v);
  }
  return std::nullopt;
}

}  // namespace

PruneOutcome lookahead_prune(const TermPtr& rv, const Distribution& d,
                             const Evidence& e, unsigned depth,
                             const LookaheadContext& ctx) {
  PruneOutcome out{d, 1.0, {}};

  // (1) remove values named by negative dist_eq evidence
  std::vector<TermPtr> forbidden;
  for (const auto& ev : e.negative)
    if (auto v = evidence_forced_value(ev, rv, *ctx.values))
      forbidden.push_back(*v);
  if (!forbidden.empty()) {
    std::vector<TermPtr> snapshot;
    for (const auto& entry : out.dist.entries())
      snapshot.push_back(entry.value);
    for (const auto& value : snapshot) {
      bool hit = false;
      for (const auto& v : forbidden)
        hit = hit || compare_values("dist_eq", value, v);
      if (!hit) continue;
      auto [next, mass] = out.dist.remove_and_renormalize(value);
      if (mass == 0.0) continue;
      out.dist = std::move(next);
      out.weight *= 1.0 - mass;
      out.removed.push_back({rv, value, mass});
      if (out.dist.empty()) return out;
    }
  }

  // (2) positive dist_eq evidence collapses to a point mass
  for (const auto& ev : e.positive) {
    auto v = evidence_forced_value(ev, rv, *ctx.values);
    if (!v) continue;
    double p = out.dist.mass(*v);
    if (p > 0.0) {
      out.dist = Distribution::categorical({{1.0, *v}});
      out.weight *= p;
    }
    break;
  }

  // (3) remove values that make the evidence impossible within the bound
  if (depth >= 1 && !(e.positive.empty() && e.negative.empty())) {
    std::vector<TermPtr> snapshot;
    for (const auto& entry : out.dist.entries())
      snapshot.push_back(entry.value);
    for (const auto& value : snapshot) {
      double current = out.dist.mass(value);
      if (current == 0.0) continue;
      LookaheadContext hyp = ctx;
      hyp.hyp_rv = rv;
      hyp.hyp_value = value;
      bool bad = false;
      for (const auto& b : e.positive)
        if (!maybe_proof(b, depth, hyp)) {
          bad = true;
          break;
        }
      if (!bad)
        for (const auto& b : e.negative)
          if (!maybe_fail(b, depth, hyp)) {
            bad = true;
            break;
          }
      if (!bad) continue;
      auto [next, mass] = out.dist.remove_and_renormalize(value);
      out.dist = std::move(next);
      out.weight *= 1.0 - mass;
      out.removed.push_back({rv, value, mass});
      if (out.dist.empty()) return out;
    }
  }
  return out;
}

// ---- public entry points ----

Interpretation tp_fixpoint(const Program& p, const std::vector<Atom>& facts,
                           std::size_t max_derived) {
  if (!p.dist_clauses.empty())
    throw EngineError(
        "tp_fixpoint expects a program without distributional clauses");
  SamplerConfig cfg;
  cfg.max_derived = max_derived;
  internal::Engine engine(internal::compile_program(p), &p, nullptr,
                          internal::PfMode::Deterministic, cfg);
  internal::ChainState st;
  for (const auto& f : facts) st.interp.insert(f);
  engine.run_to_fixpoint(st);
  return st.interp;
}

WeightedSample sample_interpretation(const TransformedProgram& seeded,
                                     const Program& original,
                                     const Evidence& e,
                                     const SamplerConfig& cfg,
                                     RandomSource rng,
                                     const EngineHooks* hooks) {
  auto engine = std::make_shared<internal::Engine>(
      internal::compile_transformed(seeded), &original, &e,
      internal::PfMode::Sampling, cfg, hooks);
  internal::ChainState st;
  st.rng = rng;
  engine->run_to_fixpoint(st);
  double w = engine->final_weight(st);
  return {std::move(st.interp), w};
}

double resume_with_forced_value(const SampleSnapshot& snapshot,
                                const TermPtr& rv, const TermPtr& value) {
  auto engine =
      std::static_pointer_cast<const internal::Engine>(snapshot.engine);
  auto frozen =
      std::static_pointer_cast<const internal::ChainState>(snapshot.state);
  internal::ChainState st = *frozen;
  st.t_dis[rv] = value;
  engine->run_to_fixpoint(st);
  return engine->final_weight(st);
}

namespace {

struct SampleOutcome {
  double weight = 0.0;
  bool query_holds = false;
  TermPtr value;  // posterior variable value, when requested
};

template <typename PerSample>
EstimatorState drive_samples(const SamplerConfig& cfg, PerSample&& one,
                             const std::function<void(const SampleOutcome&)>&
                                 accumulate_extra) {
  EstimatorState stats;
  std::size_t next_index = 0;
  unsigned workers = std::max(1u, cfg.workers);
  std::size_t batch_size = std::max<std::size_t>(256, workers * 64);

  while (next_index < cfg.max_samples) {
    std::size_t n =
        std::min(batch_size, cfg.max_samples - next_index);
    std::vector<SampleOutcome> batch(n);
    if (workers == 1) {
      for (std::size_t j = 0; j < n; ++j) batch[j] = one(next_index + j);
    } else {
      std::atomic<std::size_t> cursor{0};
      std::exception_ptr error;
      std::mutex error_mu;
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
          try {
            std::size_t j;
            while ((j = cursor.fetch_add(1)) < n)
              batch[j] = one(next_index + j);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mu);
            if (!error) error = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      if (error) std::rethrow_exception(error);
    }
    for (const auto& s : batch) {
      ++stats.samples_drawn;
      if (s.weight > 0.0) {
        ++stats.accepted;
        if (s.query_holds)
          stats.n_plus += s.weight;
        else
          stats.n_minus += s.weight;
        stats.sum_weight_sq += s.weight * s.weight;
        if (accumulate_extra) accumulate_extra(s);
      }
    }
    next_index += n;
    if (cfg.stderr_stop && stats.estimate() &&
        stats.standard_error() <= cfg.stderr_threshold)
      break;
  }
  return stats;
}

}  // namespace

EvaluateResult evaluate(const Program& p, const Atom& query, const Evidence& e,
                        const SamplerConfig& cfg, const EngineHooks* hooks) {
  if (!query.is_ground()) throw EngineError("query atom must be ground");
  TransformedProgram seeded = seed_program(pmagic_transform(p), query, e);
  auto engine = std::make_shared<internal::Engine>(
      internal::compile_transformed(seeded), &p, &e,
      internal::PfMode::Sampling, cfg, hooks);

  auto one = [&](std::size_t j) {
    internal::ChainState st;
    st.rng = RandomSource::for_stream(cfg.seed, j);
    engine->run_to_fixpoint(st);
    SampleOutcome out;
    out.weight = engine->final_weight(st);
    if (out.weight > 0.0) out.query_holds = engine->atom_in_interp(st, query);
    return out;
  };
  EstimatorState stats = drive_samples(cfg, one, nullptr);
  return {stats.estimate(), stats};
}

PosteriorResult evaluate_posterior(const Program& p, const TermPtr& rv,
                                   const Evidence& e,
                                   const SamplerConfig& cfg) {
  if (!rv->is_ground())
    throw EngineError("posterior random variable must be ground");
  // Seed the evidence calls plus a demand for the variable of interest so
  // every sample assigns it.
  std::vector<Atom> seeds;
  Atom demand{"dist_eq", {Term::outcome(rv), Term::var("_Q")}};
  seeds.push_back(demand);
  for (const auto& a : e.positive) seeds.push_back(a);
  for (const auto& a : e.negative) seeds.push_back(a);
  TransformedProgram seeded = seed_program(pmagic_transform(p), seeds);
  auto engine = std::make_shared<internal::Engine>(
      internal::compile_transformed(seeded), &p, &e,
      internal::PfMode::Sampling, cfg);

  auto one = [&](std::size_t j) {
    internal::ChainState st;
    st.rng = RandomSource::for_stream(cfg.seed, j);
    engine->run_to_fixpoint(st);
    SampleOutcome out;
    out.weight = engine->final_weight(st);
    if (out.weight > 0.0) {
      auto it = st.t_dis.find(rv);
      if (it == st.t_dis.end())
        throw EngineError("accepted sample did not assign " +
                          term_to_string(rv));
      out.value = it->second;
      out.query_holds = true;
    }
    return out;
  };

  std::map<TermPtr, double, TermPtrLess> histogram;
  auto extra = std::function<void(const SampleOutcome&)>(
      [&](const SampleOutcome& s) { histogram[s.value] += s.weight; });
  EstimatorState stats = drive_samples(cfg, one, extra);

  PosteriorResult result;
  double total = stats.n_plus + stats.n_minus;
  for (const auto& [value, mass] : histogram)
    result.points.emplace_back(value, total > 0.0 ? mass / total : 0.0);
  result.stats = stats;
  return result;
}

}  // namespace dclp
