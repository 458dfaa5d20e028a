#include "dclp/magic.hpp"

#include <sstream>

namespace dclp {

namespace {

const char* kRels[] = {"dist_eq", "dist_lt", "dist_leq", "dist_gt",
                       "dist_geq"};

bool is_builtin_body_atom(const TransformedProgram& t, const Atom& a) {
  if (is_probabilistic_fact(a)) return true;
  return t.builtin_whitelist.count(a.pred + "/" + std::to_string(a.arity())) >
         0;
}

// Tracks builtins in first-use order so wrapper emission is deterministic.
struct WrapperSet {
  std::vector<std::pair<std::string, std::size_t>> order;

  void note(const Atom& a) {
    for (const auto& [p, n] : order)
      if (p == a.pred && n == a.arity()) return;
    order.emplace_back(a.pred, a.arity());
  }
};

Atom wrap_atom(const Atom& a) {
  return Atom{wrapped_name(a.pred), a.args};
}

void emit_ordinary(const Clause& c, TransformedProgram& out) {
  Clause guarded;
  guarded.head = c.head;
  guarded.body.push_back(make_call_atom(c.head));
  for (const auto& b : c.body) guarded.body.push_back(b);
  out.clauses.push_back(std::move(guarded));
  for (std::size_t i = 0; i < c.body.size(); ++i) {
    Clause prop;
    prop.head = make_call_atom(c.body[i]);
    prop.body.push_back(make_call_atom(c.head));
    for (std::size_t j = 0; j < i; ++j) prop.body.push_back(c.body[j]);
    out.clauses.push_back(std::move(prop));
  }
}

// c(G) :- c(findall(T, G, L)) so the goal inside a findall is activated.
void emit_findall_goal_props(const std::vector<Atom>& body,
                             TransformedProgram& out) {
  for (const auto& a : body) {
    if (a.pred != "findall" || a.arity() != 3) continue;
    auto goal = atom_from_term(a.args[1]);
    if (!goal) continue;
    Clause prop;
    prop.head = make_call_atom(*goal);
    prop.body.push_back(make_call_atom(a));
    out.clauses.push_back(std::move(prop));
  }
}

void wrap_bodies(TransformedProgram& t, WrapperSet& wrappers) {
  auto wrap_body = [&](std::vector<Atom>& body) {
    for (auto& a : body) {
      if (is_builtin_body_atom(t, a)) {
        wrappers.note(a);
        a = wrap_atom(a);
      }
    }
  };
  for (auto& c : t.clauses) wrap_body(c.body);
  for (auto& c : t.dist_clauses) wrap_body(c.body);
}

void emit_wrappers(TransformedProgram& t, const WrapperSet& wrappers) {
  for (const auto& [pred, arity] : wrappers.order) {
    std::vector<TermPtr> args;
    for (std::size_t i = 0; i < arity; ++i)
      args.push_back(Term::var("_W" + std::to_string(i)));
    Atom inner{pred, args};
    Clause w;
    w.head = Atom{wrapped_name(pred), args};
    w.body.push_back(make_call_atom(inner));
    w.body.push_back(inner);
    t.clauses.push_back(std::move(w));
    t.call_wrapper_map[pred + "/" + std::to_string(arity)] =
        wrapped_name(pred);
  }
}

}  // namespace

Atom make_call_atom(const Atom& inner) {
  return Atom{kCallPred, {inner.as_term()}};
}

TransformedProgram magic_transform(const Program& p) {
  TransformedProgram out;
  out.builtin_whitelist = p.builtin_whitelist;
  for (const auto& c : p.clauses) {
    emit_ordinary(c, out);
    emit_findall_goal_props(c.body, out);
  }
  WrapperSet wrappers;
  wrap_bodies(out, wrappers);
  emit_wrappers(out, wrappers);
  return out;
}

TransformedProgram pmagic_transform(const Program& p) {
  TransformedProgram out;
  out.builtin_whitelist = p.builtin_whitelist;
  for (const auto& c : p.clauses) {
    emit_ordinary(c, out);
    emit_findall_goal_props(c.body, out);
  }

  int fresh = 0;
  for (const auto& dc : p.dist_clauses) {
    TermPtr outcome = Term::outcome(dc.rv);
    for (const char* rel : kRels) {
      for (int pos = 0; pos < 2; ++pos) {
        TermPtr guard_var = Term::var("_W" + std::to_string(fresh++));
        Atom rel_atom{rel, pos == 0
                               ? std::vector<TermPtr>{outcome, guard_var}
                               : std::vector<TermPtr>{guard_var, outcome}};
        Atom guard = make_call_atom(rel_atom);

        DistributionalClause guarded;
        guarded.rv = dc.rv;
        guarded.dist = dc.dist;
        guarded.body.push_back(guard);
        for (const auto& b : dc.body) guarded.body.push_back(b);
        out.dist_clauses.push_back(std::move(guarded));

        for (std::size_t i = 0; i < dc.body.size(); ++i) {
          Clause prop;
          prop.head = make_call_atom(dc.body[i]);
          prop.body.push_back(guard);
          for (std::size_t j = 0; j < i; ++j) prop.body.push_back(dc.body[j]);
          out.clauses.push_back(std::move(prop));
        }
      }
    }
    emit_findall_goal_props(dc.body, out);
  }

  WrapperSet wrappers;
  wrap_bodies(out, wrappers);
  // Probabilistic-fact wrappers must exist even without body occurrences:
  // seeded query/evidence calls c(dist_rel(...)) are evaluated through them.
  if (!p.dist_clauses.empty()) {
    for (const char* rel : kRels) {
      Atom probe{rel, {Term::var("_W0"), Term::var("_W1")}};
      wrappers.note(probe);
    }
  }
  emit_wrappers(out, wrappers);
  return out;
}

TransformedProgram seed_program(const TransformedProgram& t,
                                const std::vector<Atom>& atoms) {
  TransformedProgram out = t;
  for (const auto& a : atoms) {
    Clause fact;
    fact.head = make_call_atom(a);
    bool present = false;
    for (const auto& c : out.clauses)
      if (c.body.empty() && atom_equals(c.head, fact.head)) present = true;
    if (!present) out.clauses.push_back(std::move(fact));
  }
  return out;
}

TransformedProgram seed_program(const TransformedProgram& t, const Atom& query,
                                const Evidence& e) {
  std::vector<Atom> atoms;
  atoms.push_back(query);
  for (const auto& a : e.positive) atoms.push_back(a);
  for (const auto& a : e.negative) atoms.push_back(a);
  return seed_program(t, atoms);
}

std::string transformed_to_string(const TransformedProgram& t) {
  std::ostringstream os;
  for (const auto& c : t.clauses) os << clause_to_string(c) << '\n';
  for (const auto& c : t.dist_clauses) os << dist_clause_to_string(c) << '\n';
  return os.str();
}

}  // namespace dclp
