#pragma once

// Test-side oracles, kept independent of the forward-chaining engine and of
// the magic transformation they are used to check. Shared by the unit and
// acceptance suites.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dclp/parser.hpp"
#include "dclp/program.hpp"
#include "dclp/term.hpp"

namespace dclp::testing {

inline std::string slurp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Naive ground fixpoint for pure rule/fact programs (no builtins, no
// probabilistic facts): repeatedly matches clause bodies against the
// current atom set until nothing new derives.
class NaiveModel {
 public:
  explicit NaiveModel(const Program& p) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& c : p.clauses) {
        Substitution theta;
        changed = derive(c, 0, theta) || changed;
      }
    }
  }

  bool contains(const Atom& a) const {
    return keys_.count(atom_to_string(a)) > 0;
  }
  const std::vector<Atom>& atoms() const { return atoms_; }

 private:
  bool derive(const Clause& c, std::size_t i, Substitution& theta) {
    if (i == c.body.size()) {
      Atom head = theta.apply(c.head);
      if (!head.is_ground())
        throw std::runtime_error("naive oracle needs range-restricted rules");
      if (!keys_.insert(atom_to_string(head)).second) return false;
      atoms_.push_back(std::move(head));
      return true;
    }
    bool changed = false;
    // Plain scan; quadratic and proud, this is an oracle for tiny programs.
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
      Atom stored = atoms_[k];
      std::vector<std::string> trail;
      Atom pattern = theta.apply(c.body[i]);
      if (unify_atoms_trail(pattern, stored, theta, trail)) {
        changed = derive(c, i + 1, theta) || changed;
        undo_trail(theta, trail);
      }
    }
    return changed;
  }

  std::vector<Atom> atoms_;
  std::set<std::string> keys_;
};

// Goal atoms visited by a bounded SLD search for `goal` over the program's
// ordinary clauses. Used as the relevance oracle: forward chaining on the
// seeded transformed program must derive only atoms some SLD derivation
// visits.
class SldVisits {
 public:
  SldVisits(const Program& p, const Atom& goal, long step_bound = 200000)
      : program_(p), budget_(step_bound) {
    Substitution theta;
    std::vector<Atom> goals{goal};
    walk(goals, 0, theta, 0);
  }

  bool covers(const Atom& ground_atom) const {
    for (const auto& g : visited_) {
      Atom fresh = rename_vars(g, "#cov");
      if (unify_atoms(fresh, ground_atom)) return true;
    }
    return false;
  }

  std::size_t size() const { return visited_.size(); }

 private:
  // Depth-capped so cyclic programs terminate; the visited set saturates
  // long before the cap on the corpus.
  void walk(std::vector<Atom>& goals, std::size_t i, Substitution& theta,
            int depth) {
    if (budget_-- <= 0 || depth > 50) return;
    if (i >= goals.size()) return;
    Atom g = theta.apply(goals[i]);
    if (seen_.insert(atom_to_string(canonicalize_atom(g))).second)
      visited_.push_back(g);
    for (const auto& c : program_.clauses) {
      if (c.head.pred != g.pred || c.head.arity() != g.arity()) continue;
      std::string suffix = "#s" + std::to_string(fresh_++);
      Atom head = rename_vars(c.head, suffix);
      std::vector<std::string> trail;
      if (!unify_atoms_trail(g, head, theta, trail)) continue;
      std::vector<Atom> rest;
      for (const auto& b : c.body) rest.push_back(rename_vars(b, suffix));
      for (std::size_t k = i + 1; k < goals.size(); ++k)
        rest.push_back(goals[k]);
      walk(rest, 0, theta, depth + 1);
      undo_trail(theta, trail);
    }
  }

  const Program& program_;
  long budget_;
  int fresh_ = 0;
  std::vector<Atom> visited_;
  std::set<std::string> seen_;
};

inline double poisson_pmf(double rate, long long k) {
  return std::exp(-rate + k * std::log(rate) - std::lgamma(k + 1.0));
}

// P(X > threshold) for X ~ Poisson(rate).
inline double poisson_tail(double rate, long long threshold) {
  double cdf = 0.0;
  for (long long k = 0; k <= threshold; ++k) cdf += poisson_pmf(rate, k);
  return 1.0 - cdf;
}

inline double binomial_coeff(int n, int k) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                  std::lgamma(n - k + 1.0));
}

// Closed-form urn evidence likelihood: n balls, each green with probability
// 1/2, `draws` draws with replacement, every observation green, observation
// correct with probability 0.8. Draws are exchangeable given the colors, so
//   p(e | n) = sum_g C(n,g) (1/2)^n ((0.2 + 0.6 g / n))^draws.
inline double urn_evidence_given_n(int n, int draws) {
  double sum = 0.0;
  for (int g = 0; g <= n; ++g) {
    double p_green_obs = 0.2 + 0.6 * static_cast<double>(g) / n;
    sum += binomial_coeff(n, g) * std::pow(0.5, n) *
           std::pow(p_green_obs, draws);
  }
  return sum;
}

// Posterior over n in {1..max_n} for a prior given as weights.
inline std::vector<double> urn_posterior(const std::vector<double>& prior,
                                         int draws) {
  std::vector<double> post(prior.size());
  double total = 0.0;
  for (std::size_t i = 0; i < prior.size(); ++i) {
    post[i] = prior[i] * urn_evidence_given_n(static_cast<int>(i) + 1, draws);
    total += post[i];
  }
  for (auto& x : post) x /= total;
  return post;
}

struct CorpusEntry {
  std::string name;
  Program program;
  std::vector<Atom> queries;
  Evidence evidence;
  bool probabilistic = false;
};

inline std::vector<CorpusEntry> load_corpus(const std::string& dir) {
  std::vector<CorpusEntry> out;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".dc") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    CorpusEntry e;
    e.name = path.stem().string();
    e.program = parse_program(slurp_file(path.string()));
    e.probabilistic = !e.program.dist_clauses.empty();
    std::filesystem::path qpath = path;
    qpath.replace_extension(".query");
    std::istringstream qs(slurp_file(qpath.string()));
    std::string line;
    while (std::getline(qs, line)) {
      if (line.empty()) continue;
      e.queries.push_back(parse_atom_string(line));
    }
    std::filesystem::path epath = path;
    epath.replace_extension(".ev");
    if (std::filesystem::exists(epath))
      e.evidence = parse_evidence(slurp_file(epath.string()), e.program);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace dclp::testing
