#include "dclp/validate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>

namespace dclp {

namespace {

std::string pred_node(const Atom& a) {
  return a.pred + "/" + std::to_string(a.arity());
}

std::string rv_functor_node(const TermPtr& rv) {
  if (rv->kind() == Term::Kind::Symbol) return rv->name() + "/0~";
  if (rv->kind() == Term::Kind::Compound)
    return rv->name() + "/" + std::to_string(rv->args().size()) + "~";
  return "?~";
}

struct RankGraph {
  std::vector<std::string> names;
  std::unordered_map<std::string, int> ids;
  // adjacency: edge (u -> v, strict) constrains rank(v) >= rank(u) + strict
  std::vector<std::vector<std::pair<int, int>>> out;

  int node(const std::string& name) {
    auto it = ids.find(name);
    if (it != ids.end()) return it->second;
    int id = static_cast<int>(names.size());
    ids.emplace(name, id);
    names.push_back(name);
    out.emplace_back();
    return id;
  }

  void edge(const std::string& from, const std::string& to, int strict) {
    int u = node(from), v = node(to);
    out[u].emplace_back(v, strict);
  }
};

// Collects "g/k~" nodes for every ~(t) subterm, where g/k is the functor of
// the named random variable.
void collect_outcome_nodes(const TermPtr& t, std::vector<std::string>& nodes) {
  if (t->kind() == Term::Kind::Outcome) {
    nodes.push_back(rv_functor_node(t->inner()));
    collect_outcome_nodes(t->inner(), nodes);
    return;
  }
  for (const auto& a : t->args()) collect_outcome_nodes(a, nodes);
}

void collect_outcome_nodes(const Atom& a, std::vector<std::string>& nodes) {
  for (const auto& t : a.args) collect_outcome_nodes(t, nodes);
}

// Strongly connected components (Tarjan, iterative).
std::vector<int> scc_of(const RankGraph& g) {
  int n = static_cast<int>(g.names.size());
  std::vector<int> comp(n, -1), low(n, 0), disc(n, -1), stk;
  std::vector<bool> on_stack(n, false);
  int timer = 0, ncomp = 0;
  std::vector<std::tuple<int, std::size_t>> frames;
  for (int s = 0; s < n; ++s) {
    if (disc[s] != -1) continue;
    frames.emplace_back(s, 0);
    while (!frames.empty()) {
      auto& [u, ei] = frames.back();
      if (ei == 0) {
        disc[u] = low[u] = timer++;
        stk.push_back(u);
        on_stack[u] = true;
      }
      if (ei < g.out[u].size()) {
        int v = g.out[u][ei].first;
        ++ei;
        if (disc[v] == -1) {
          frames.emplace_back(v, 0);
        } else if (on_stack[v]) {
          low[u] = std::min(low[u], disc[v]);
        }
      } else {
        if (low[u] == disc[u]) {
          while (true) {
            int v = stk.back();
            stk.pop_back();
            on_stack[v] = false;
            comp[v] = ncomp;
            if (v == u) break;
          }
          ++ncomp;
        }
        frames.pop_back();
        if (!frames.empty()) {
          int parent = std::get<0>(frames.back());
          low[parent] = std::min(low[parent], low[u]);
        }
      }
    }
  }
  return comp;
}

bool literal_number(const TermPtr& t, double& out) {
  if (t->kind() == Term::Kind::Integer) {
    out = static_cast<double>(t->int_value());
    return true;
  }
  if (t->kind() == Term::Kind::Real) {
    out = t->real_value();
    return true;
  }
  return false;
}

void check_template(const DistributionalClause& dc, ValidationReport& rep) {
  const auto& d = dc.dist;
  if (d.kind == DistKind::Categorical) {
    bool all_literal = true;
    double sum = 0.0;
    for (const auto& [p, v] : d.entries) {
      double x;
      if (literal_number(p, x)) {
        sum += x;
        if (x < 0.0 || x > 1.0)
          rep.errors.push_back(
              {"categorical probability " + term_to_string(p) +
               " outside [0,1] in " + dist_clause_to_string(dc)});
      } else {
        all_literal = false;
      }
    }
    if (all_literal && !d.entries.empty() && std::abs(sum - 1.0) > 1e-9)
      rep.errors.push_back({"categorical probabilities sum to " +
                            std::to_string(sum) + " in " +
                            dist_clause_to_string(dc)});
  }

  // Range restriction: every variable in the template must occur in the
  // random-variable term or be bound by the body.
  std::vector<std::string> bound;
  collect_vars(dc.rv, bound);
  for (const auto& b : dc.body)
    for (const auto& t : b.args) collect_vars(t, bound);
  std::vector<std::string> used;
  for (const auto& [p, v] : d.entries) {
    collect_vars(p, used);
    collect_vars(v, used);
  }
  for (const auto& t : d.params) collect_vars(t, used);
  for (const auto& name : used) {
    if (std::find(bound.begin(), bound.end(), name) == bound.end())
      rep.errors.push_back({"variable " + name +
                            " in distribution is bound by neither the random "
                            "variable nor the body in " +
                            dist_clause_to_string(dc)});
  }
}

bool template_may_be_continuous(const DistributionTemplate& d) {
  return d.kind == DistKind::Gamma || d.kind == DistKind::UniformContinuous;
}

bool rv_may_be_continuous(const TermPtr& rv, const Program& p) {
  for (const auto& dc : p.dist_clauses)
    if (template_may_be_continuous(dc.dist) &&
        unify(rv, rename_vars(dc.rv, "_v")))
      return true;
  return false;
}

void check_reserved_arities(const Atom& a, ValidationReport& rep) {
  if (is_dist_rel(a.pred) && a.arity() != 2)
    rep.errors.push_back({"reserved predicate " + a.pred + " used with arity " +
                          std::to_string(a.arity())});
}

}  // namespace

ValidationReport validate(const Program& p) {
  ValidationReport rep;

  for (const auto& dc : p.dist_clauses) check_template(dc, rep);
  for (const auto& c : p.clauses) {
    check_reserved_arities(c.head, rep);
    for (const auto& b : c.body) check_reserved_arities(b, rep);
  }
  for (const auto& dc : p.dist_clauses)
    for (const auto& b : dc.body) check_reserved_arities(b, rep);

  // dist_eq comparing two continuous outcomes is almost surely false.
  auto warn_continuous_eq = [&](const Atom& a) {
    if (a.pred != "dist_eq" || a.arity() != 2) return;
    if (a.args[0]->kind() == Term::Kind::Outcome &&
        a.args[1]->kind() == Term::Kind::Outcome &&
        rv_may_be_continuous(a.args[0]->inner(), p) &&
        rv_may_be_continuous(a.args[1]->inner(), p))
      rep.warnings.push_back(
          {"dist_eq compares two continuous outcomes in " +
           atom_to_string(a) + "; exact equality is almost surely false"});
  };
  for (const auto& c : p.clauses)
    for (const auto& b : c.body) warn_continuous_eq(b);
  for (const auto& dc : p.dist_clauses)
    for (const auto& b : dc.body) warn_continuous_eq(b);

  // Rank graph over predicates and random-variable definitions.
  RankGraph g;
  auto note_atom = [&](const Atom& a, const std::string& holder_node,
                       int strict) {
    g.edge(pred_node(a), holder_node, strict);
    std::vector<std::string> mentioned;
    collect_outcome_nodes(a, mentioned);
    for (const auto& rv_node : mentioned) g.edge(rv_node, pred_node(a), 0);
    // A findall goal behaves as a body atom of the enclosing clause.
    if (a.pred == "findall" && a.arity() == 3) {
      if (auto goal = atom_from_term(a.args[1])) {
        g.edge(pred_node(*goal), holder_node, strict);
        std::vector<std::string> inner;
        collect_outcome_nodes(*goal, inner);
        for (const auto& rv_node : inner) g.edge(rv_node, pred_node(*goal), 0);
      }
    }
  };

  for (const auto& c : p.clauses) {
    std::string head_node = pred_node(c.head);
    g.node(head_node);
    std::vector<std::string> head_mentions;
    collect_outcome_nodes(c.head, head_mentions);
    for (const auto& rv_node : head_mentions) g.edge(rv_node, head_node, 0);
    for (const auto& b : c.body) note_atom(b, head_node, 0);
  }
  for (const auto& dc : p.dist_clauses) {
    std::string dnode = rv_functor_node(dc.rv);
    g.node(dnode);
    std::vector<std::string> head_mentions;
    collect_outcome_nodes(dc.rv, head_mentions);
    for (const auto& [prob, value] : dc.dist.entries) {
      collect_outcome_nodes(prob, head_mentions);
      collect_outcome_nodes(value, head_mentions);
    }
    for (const auto& t : dc.dist.params) collect_outcome_nodes(t, head_mentions);
    for (const auto& rv_node : head_mentions) g.edge(rv_node, dnode, 0);
    for (const auto& b : dc.body) note_atom(b, dnode, 1);
  }

  std::vector<int> comp = scc_of(g);
  int ncomp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  bool cycle = false;
  for (std::size_t u = 0; u < g.out.size() && !cycle; ++u) {
    for (const auto& [v, strict] : g.out[u]) {
      if (strict && comp[u] == comp[static_cast<std::size_t>(v)]) {
        std::ostringstream os;
        os << "distribution stratification cycle through:";
        for (std::size_t w = 0; w < g.names.size(); ++w)
          if (comp[w] == comp[u]) os << ' ' << g.names[w];
        rep.errors.push_back({os.str()});
        cycle = true;
        break;
      }
    }
  }

  if (!cycle) {
    // Longest-path layering over the condensation.
    std::vector<int> rank_of_comp(static_cast<std::size_t>(ncomp), 0);
    std::vector<std::vector<std::pair<int, int>>> cedges(
        static_cast<std::size_t>(ncomp));
    std::vector<int> indeg(static_cast<std::size_t>(ncomp), 0);
    for (std::size_t u = 0; u < g.out.size(); ++u)
      for (const auto& [v, strict] : g.out[u])
        if (comp[u] != comp[static_cast<std::size_t>(v)]) {
          cedges[comp[u]].emplace_back(comp[static_cast<std::size_t>(v)],
                                       strict);
          ++indeg[comp[static_cast<std::size_t>(v)]];
        }
    std::vector<int> queue;
    for (int i = 0; i < ncomp; ++i)
      if (indeg[static_cast<std::size_t>(i)] == 0) queue.push_back(i);
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      int u = queue[qi];
      for (const auto& [v, strict] : cedges[static_cast<std::size_t>(u)]) {
        rank_of_comp[static_cast<std::size_t>(v)] =
            std::max(rank_of_comp[static_cast<std::size_t>(v)],
                     rank_of_comp[static_cast<std::size_t>(u)] + strict);
        if (--indeg[static_cast<std::size_t>(v)] == 0) queue.push_back(v);
      }
    }
    std::map<std::string, int> ranks;
    for (std::size_t u = 0; u < g.names.size(); ++u)
      ranks[g.names[u]] = rank_of_comp[static_cast<std::size_t>(comp[u])];
    rep.predicate_rank = std::move(ranks);
  }

  if (!p.dist_clauses.empty()) {
    rep.warnings.push_back(
        {"uniqueness of the distribution per ground random variable is "
         "checked at runtime, not statically"});
    rep.warnings.push_back(
        {"measurability of probabilistic facts is assumed, not verified"});
    rep.warnings.push_back(
        {"finite support of derivations is assumed, not verified"});
  }

  return rep;
}

}  // namespace dclp
