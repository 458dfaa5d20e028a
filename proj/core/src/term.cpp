#include "dclp/term.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <sstream>
#include <unordered_map>

namespace dclp {

Term::Term(Kind kind, std::string text, long long i, double r,
           std::vector<TermPtr> args)
    : kind_(kind), text_(std::move(text)), int_(i), real_(r),
      args_(std::move(args)) {
  ground_ = kind_ != Kind::Variable;
  for (const auto& a : args_) ground_ = ground_ && a->is_ground();
}

TermPtr Term::var(std::string name) {
  return TermPtr(new Term(Kind::Variable, std::move(name), 0, 0.0, {}));
}
TermPtr Term::integer(long long value) {
  return TermPtr(new Term(Kind::Integer, {}, value, 0.0, {}));
}
TermPtr Term::real(double value) {
  return TermPtr(new Term(Kind::Real, {}, 0, value, {}));
}
TermPtr Term::symbol(std::string name) {
  return TermPtr(new Term(Kind::Symbol, std::move(name), 0, 0.0, {}));
}
TermPtr Term::compound(std::string functor, std::vector<TermPtr> args) {
  return TermPtr(
      new Term(Kind::Compound, std::move(functor), 0, 0.0, std::move(args)));
}
TermPtr Term::outcome(TermPtr inner) {
  std::vector<TermPtr> args;
  args.push_back(std::move(inner));
  return TermPtr(new Term(Kind::Outcome, {}, 0, 0.0, std::move(args)));
}

namespace {

int kind_rank(Term::Kind k) {
  switch (k) {
    case Term::Kind::Variable: return 0;
    case Term::Kind::Integer: return 1;
    case Term::Kind::Real: return 1;
    case Term::Kind::Symbol: return 2;
    case Term::Kind::Compound: return 3;
    case Term::Kind::Outcome: return 4;
  }
  return 5;
}

int cmp(long long a, long long b) { return a < b ? -1 : (a > b ? 1 : 0); }
int cmp(double a, double b) { return a < b ? -1 : (a > b ? 1 : 0); }
int cmp(std::size_t a, std::size_t b) { return a < b ? -1 : (a > b ? 1 : 0); }

}  // namespace

int compare_terms(const Term& a, const Term& b) {
  int ra = kind_rank(a.kind()), rb = kind_rank(b.kind());
  if (ra != rb) return ra < rb ? -1 : 1;
  switch (a.kind()) {
    case Term::Kind::Variable:
    case Term::Kind::Symbol: {
      if (a.kind() != b.kind()) return a.kind() < b.kind() ? -1 : 1;
      int c = a.name().compare(b.name());
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    case Term::Kind::Integer:
    case Term::Kind::Real: {
      // Numeric kinds are ordered by value, integer before real on ties.
      if (a.kind() == Term::Kind::Integer && b.kind() == Term::Kind::Integer)
        return cmp(a.int_value(), b.int_value());
      int c = cmp(a.as_real(), b.as_real());
      if (c != 0) return c;
      if (a.kind() == b.kind()) return 0;
      return a.kind() == Term::Kind::Integer ? -1 : 1;
    }
    case Term::Kind::Compound: {
      if (int c = cmp(a.args().size(), b.args().size())) return c;
      if (int c = a.name().compare(b.name())) return c < 0 ? -1 : 1;
      for (std::size_t i = 0; i < a.args().size(); ++i)
        if (int c = compare_terms(*a.args()[i], *b.args()[i])) return c;
      return 0;
    }
    case Term::Kind::Outcome:
      return compare_terms(*a.inner(), *b.inner());
  }
  return 0;
}

bool term_equals(const Term& a, const Term& b) {
  return compare_terms(a, b) == 0;
}

std::size_t term_hash(const Term& t) {
  std::size_t h = static_cast<std::size_t>(kind_rank(t.kind())) * 0x9e3779b9u;
  auto mix = [&h](std::size_t v) {
    h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  };
  switch (t.kind()) {
    case Term::Kind::Variable:
    case Term::Kind::Symbol:
    case Term::Kind::Compound:
      mix(std::hash<std::string>{}(t.name()));
      break;
    case Term::Kind::Integer:
      mix(std::hash<long long>{}(t.int_value()));
      break;
    case Term::Kind::Real:
      mix(std::hash<double>{}(t.real_value()));
      break;
    case Term::Kind::Outcome:
      break;
  }
  for (const auto& a : t.args()) mix(term_hash(*a));
  return h;
}

void collect_vars(const TermPtr& t, std::vector<std::string>& out) {
  if (t->kind() == Term::Kind::Variable) {
    out.push_back(t->name());
    return;
  }
  for (const auto& a : t->args()) collect_vars(a, out);
}

bool contains_var(const TermPtr& t, const std::string& name) {
  if (t->kind() == Term::Kind::Variable) return t->name() == name;
  for (const auto& a : t->args())
    if (contains_var(a, name)) return true;
  return false;
}

TermPtr Atom::as_term() const {
  if (args.empty()) return Term::symbol(pred);
  return Term::compound(pred, args);
}

bool Atom::is_ground() const {
  for (const auto& a : args)
    if (!a->is_ground()) return false;
  return true;
}

bool is_dist_rel(const std::string& pred) {
  return pred == "dist_eq" || pred == "dist_lt" || pred == "dist_leq" ||
         pred == "dist_gt" || pred == "dist_geq";
}

bool is_probabilistic_fact(const Atom& a) {
  return a.arity() == 2 && is_dist_rel(a.pred);
}

std::optional<Atom> atom_from_term(const TermPtr& t) {
  if (t->kind() == Term::Kind::Symbol) return Atom{t->name(), {}};
  if (t->kind() == Term::Kind::Compound) return Atom{t->name(), t->args()};
  return std::nullopt;
}

int compare_atoms(const Atom& a, const Atom& b) {
  if (int c = cmp(a.args.size(), b.args.size())) return c;
  if (int c = a.pred.compare(b.pred)) return c < 0 ? -1 : 1;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (int c = compare_terms(*a.args[i], *b.args[i])) return c;
  return 0;
}

bool atom_equals(const Atom& a, const Atom& b) {
  return compare_atoms(a, b) == 0;
}

std::size_t atom_hash(const Atom& a) {
  std::size_t h = std::hash<std::string>{}(a.pred) ^
                  (a.args.size() * 0x9e3779b97f4a7c15ull);
  for (const auto& t : a.args)
    h ^= term_hash(*t) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

bool Substitution::bind(const std::string& var, TermPtr value) {
  return bindings_.emplace(var, std::move(value)).second;
}

const TermPtr* Substitution::lookup(const std::string& var) const {
  auto it = bindings_.find(var);
  return it == bindings_.end() ? nullptr : &it->second;
}

TermPtr Substitution::apply(const TermPtr& t) const {
  if (bindings_.empty() || t->is_ground()) return t;
  switch (t->kind()) {
    case Term::Kind::Variable: {
      const TermPtr* bound = lookup(t->name());
      if (!bound) return t;
      return apply(*bound);
    }
    case Term::Kind::Compound:
    case Term::Kind::Outcome: {
      bool changed = false;
      std::vector<TermPtr> args;
      args.reserve(t->args().size());
      for (const auto& a : t->args()) {
        args.push_back(apply(a));
        changed = changed || args.back().get() != a.get();
      }
      if (!changed) return t;
      if (t->kind() == Term::Kind::Outcome)
        return Term::outcome(std::move(args.front()));
      return Term::compound(t->name(), std::move(args));
    }
    default:
      return t;
  }
}

Atom Substitution::apply(const Atom& a) const {
  if (bindings_.empty() || a.is_ground()) return a;
  Atom out{a.pred, {}};
  out.args.reserve(a.args.size());
  for (const auto& t : a.args) out.args.push_back(apply(t));
  return out;
}

namespace {

// Walks a variable through the bindings until it is unbound or non-variable.
TermPtr walk(TermPtr t, const Substitution& s) {
  while (t->kind() == Term::Kind::Variable) {
    const TermPtr* bound = s.lookup(t->name());
    if (!bound) return t;
    t = *bound;
  }
  return t;
}

bool occurs(const std::string& var, const TermPtr& t, const Substitution& s) {
  TermPtr w = walk(t, s);
  if (w->kind() == Term::Kind::Variable) return w->name() == var;
  for (const auto& a : w->args())
    if (occurs(var, a, s)) return true;
  return false;
}

bool unify_rec(const TermPtr& a, const TermPtr& b, Substitution& s,
               std::vector<std::string>& trail) {
  TermPtr x = walk(a, s);
  TermPtr y = walk(b, s);
  if (x->kind() == Term::Kind::Variable &&
      y->kind() == Term::Kind::Variable && x->name() == y->name())
    return true;
  if (x->kind() == Term::Kind::Variable) {
    if (occurs(x->name(), y, s)) return false;
    s.bind(x->name(), y);
    trail.push_back(x->name());
    return true;
  }
  if (y->kind() == Term::Kind::Variable) {
    if (occurs(y->name(), x, s)) return false;
    s.bind(y->name(), x);
    trail.push_back(y->name());
    return true;
  }
  if (x->kind() != y->kind()) return false;
  switch (x->kind()) {
    case Term::Kind::Integer:
      return x->int_value() == y->int_value();
    case Term::Kind::Real:
      return x->real_value() == y->real_value();
    case Term::Kind::Symbol:
      return x->name() == y->name();
    case Term::Kind::Compound:
      if (x->name() != y->name() || x->args().size() != y->args().size())
        return false;
      for (std::size_t i = 0; i < x->args().size(); ++i)
        if (!unify_rec(x->args()[i], y->args()[i], s, trail)) return false;
      return true;
    case Term::Kind::Outcome:
      return unify_rec(x->inner(), y->inner(), s, trail);
    default:
      return false;
  }
}

}  // namespace

bool unify_into(const TermPtr& a, const TermPtr& b, Substitution& subst) {
  std::vector<std::string> trail;
  if (unify_rec(a, b, subst, trail)) return true;
  for (const auto& name : trail) subst.erase(name);
  return false;
}

bool unify_atoms_into(const Atom& a, const Atom& b, Substitution& subst) {
  if (a.pred != b.pred || a.args.size() != b.args.size()) return false;
  std::vector<std::string> trail;
  auto restore = [&]() {
    for (const auto& name : trail) subst.erase(name);
  };
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    std::vector<std::string> local;
    if (!unify_rec(a.args[i], b.args[i], subst, local)) {
      for (const auto& name : local) subst.erase(name);
      restore();
      return false;
    }
    trail.insert(trail.end(), local.begin(), local.end());
  }
  return true;
}

bool unify_terms_trail(const TermPtr& a, const TermPtr& b,
                       Substitution& subst, std::vector<std::string>& trail) {
  std::vector<std::string> local;
  if (unify_rec(a, b, subst, local)) {
    trail.insert(trail.end(), local.begin(), local.end());
    return true;
  }
  for (const auto& name : local) subst.erase(name);
  return false;
}

bool unify_atoms_trail(const Atom& a, const Atom& b, Substitution& subst,
                       std::vector<std::string>& trail) {
  if (a.pred != b.pred || a.args.size() != b.args.size()) return false;
  std::vector<std::string> local;
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!unify_rec(a.args[i], b.args[i], subst, local)) {
      for (const auto& name : local) subst.erase(name);
      return false;
    }
  }
  trail.insert(trail.end(), local.begin(), local.end());
  return true;
}

void undo_trail(Substitution& subst, std::vector<std::string>& trail,
                std::size_t from) {
  for (std::size_t i = from; i < trail.size(); ++i) subst.erase(trail[i]);
  trail.resize(from);
}

std::optional<Substitution> unify(const TermPtr& a, const TermPtr& b) {
  Substitution s;
  if (unify_into(a, b, s)) return s;
  return std::nullopt;
}

std::optional<Substitution> unify_atoms(const Atom& a, const Atom& b) {
  Substitution s;
  if (unify_atoms_into(a, b, s)) return s;
  return std::nullopt;
}

namespace {

TermPtr canon_rec(const TermPtr& t,
                  std::unordered_map<std::string, std::string>& names,
                  const char* prefix) {
  switch (t->kind()) {
    case Term::Kind::Variable: {
      auto it = names.find(t->name());
      if (it == names.end()) {
        std::string fresh = prefix + std::to_string(names.size());
        it = names.emplace(t->name(), std::move(fresh)).first;
      }
      return Term::var(it->second);
    }
    case Term::Kind::Compound:
    case Term::Kind::Outcome: {
      bool changed = false;
      std::vector<TermPtr> args;
      args.reserve(t->args().size());
      for (const auto& a : t->args()) {
        args.push_back(canon_rec(a, names, prefix));
        changed = changed || args.back().get() != a.get();
      }
      if (!changed) return t;
      if (t->kind() == Term::Kind::Outcome)
        return Term::outcome(std::move(args.front()));
      return Term::compound(t->name(), std::move(args));
    }
    default:
      return t;
  }
}

}  // namespace

Atom canonicalize_atom(const Atom& a) {
  if (a.is_ground()) return a;
  std::unordered_map<std::string, std::string> names;
  Atom out{a.pred, {}};
  out.args.reserve(a.args.size());
  for (const auto& t : a.args) out.args.push_back(canon_rec(t, names, "_G"));
  return out;
}

namespace {

TermPtr rename_rec(const TermPtr& t, const std::string& suffix) {
  switch (t->kind()) {
    case Term::Kind::Variable:
      return Term::var(t->name() + suffix);
    case Term::Kind::Compound:
    case Term::Kind::Outcome: {
      std::vector<TermPtr> args;
      args.reserve(t->args().size());
      for (const auto& a : t->args()) args.push_back(rename_rec(a, suffix));
      if (t->kind() == Term::Kind::Outcome)
        return Term::outcome(std::move(args.front()));
      return Term::compound(t->name(), std::move(args));
    }
    default:
      return t;
  }
}

}  // namespace

TermPtr rename_vars(const TermPtr& t, const std::string& suffix) {
  if (t->is_ground()) return t;
  return rename_rec(t, suffix);
}

Atom rename_vars(const Atom& a, const std::string& suffix) {
  if (a.is_ground()) return a;
  Atom out{a.pred, {}};
  out.args.reserve(a.args.size());
  for (const auto& t : a.args) out.args.push_back(rename_rec(t, suffix));
  return out;
}

namespace {

void format_real(std::ostream& os, double v) {
  std::array<char, 32> buf;
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  std::string s(buf.data(), end);
  // Keep reals visibly real so the printed form reparses as a real.
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  os << s;
}

void print_rec(std::ostream& os, const TermPtr& t);

bool print_list(std::ostream& os, const TermPtr& t) {
  // Cons cells are '[|]'(Head, Tail); the empty list is the symbol '[]'.
  os << '[';
  TermPtr cur = t;
  bool first = true;
  while (true) {
    if (cur->kind() == Term::Kind::Symbol && cur->name() == "[]") break;
    if (cur->kind() == Term::Kind::Compound && cur->name() == "[|]" &&
        cur->args().size() == 2) {
      if (!first) os << ", ";
      print_rec(os, cur->args()[0]);
      first = false;
      cur = cur->args()[1];
      continue;
    }
    os << " | ";
    print_rec(os, cur);
    break;
  }
  os << ']';
  return true;
}

void print_rec(std::ostream& os, const TermPtr& t) {
  switch (t->kind()) {
    case Term::Kind::Variable:
      os << t->name();
      break;
    case Term::Kind::Integer:
      os << t->int_value();
      break;
    case Term::Kind::Real:
      format_real(os, t->real_value());
      break;
    case Term::Kind::Symbol:
      if (t->name() == "[]")
        os << "[]";
      else
        os << t->name();
      break;
    case Term::Kind::Outcome:
      os << "~(";
      print_rec(os, t->inner());
      os << ')';
      break;
    case Term::Kind::Compound: {
      if (t->name() == "[|]" && t->args().size() == 2) {
        print_list(os, t);
        return;
      }
      static const std::array<const char*, 4> infix = {"+", "-", "*", "/"};
      if (t->args().size() == 2) {
        for (const char* op : infix) {
          if (t->name() == op) {
            os << '(';
            print_rec(os, t->args()[0]);
            os << ' ' << op << ' ';
            print_rec(os, t->args()[1]);
            os << ')';
            return;
          }
        }
        if (t->name() == "is") {
          print_rec(os, t->args()[0]);
          os << " is ";
          print_rec(os, t->args()[1]);
          return;
        }
      }
      os << t->name() << '(';
      for (std::size_t i = 0; i < t->args().size(); ++i) {
        if (i) os << ", ";
        print_rec(os, t->args()[i]);
      }
      os << ')';
      break;
    }
  }
}

}  // namespace

std::string term_to_string(const TermPtr& t) {
  std::ostringstream os;
  print_rec(os, t);
  return os.str();
}

std::string atom_to_string(const Atom& a) {
  std::ostringstream os;
  if (a.pred == kCallPred && a.args.size() == 1) {
    os << "c(";
    print_rec(os, a.args[0]);
    os << ')';
    return os.str();
  }
  if (a.pred == kDistHeadPred && a.args.size() == 2) {
    print_rec(os, a.args[0]);
    os << " ~ ";
    print_rec(os, a.args[1]);
    return os.str();
  }
  std::string shown =
      is_wrapped_pred(a.pred) ? "a_" + unwrapped_name(a.pred) : a.pred;
  os << shown;
  if (!a.args.empty()) {
    os << '(';
    for (std::size_t i = 0; i < a.args.size(); ++i) {
      if (i) os << ", ";
      print_rec(os, a.args[i]);
    }
    os << ')';
  }
  return os.str();
}

}  // namespace dclp
