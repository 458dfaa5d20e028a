#include <doctest.h>

#include "dclp/engine.hpp"
#include "dclp/enumerate.hpp"
#include "dclp/validate.hpp"
#include "oracle_utils.hpp"

using namespace dclp;
using namespace dclp::testing;

namespace {

const std::vector<CorpusEntry>& corpus() {
  static std::vector<CorpusEntry> entries = load_corpus(DCLP_CORPUS_DIR);
  return entries;
}

Program transformed_as_program(const TransformedProgram& t) {
  return Program{t.clauses, {}, t.builtin_whitelist};
}

bool uses_builtins(const Program& p) {
  auto scan = [&](const std::vector<Atom>& body) {
    for (const auto& a : body)
      if (p.has_builtin(a.pred, a.arity())) return true;
    return false;
  };
  for (const auto& c : p.clauses)
    if (scan(c.body)) return true;
  return false;
}

}  // namespace

TEST_CASE("corpus composition matches its charter") {
  std::size_t det = 0, prob = 0;
  for (const auto& e : corpus()) (e.probabilistic ? prob : det)++;
  CHECK(det >= 10);
  CHECK(prob >= 15);
  CHECK(det + prob >= 25);
}

TEST_CASE("every corpus program validates") {
  for (const auto& e : corpus()) {
    ValidationReport r = validate(e.program);
    INFO(e.name);
    CHECK(r.ok());
    CHECK(r.predicate_rank.has_value());
  }
}

TEST_CASE("deterministic corpus: magic-seeded chaining matches the naive "
          "least model") {
  for (const auto& e : corpus()) {
    if (e.probabilistic || uses_builtins(e.program)) continue;
    NaiveModel naive(e.program);
    for (const auto& q : e.queries) {
      INFO(e.name << " ?- " << atom_to_string(q));
      auto seeded = seed_program(pmagic_transform(e.program), q, Evidence{});
      Interpretation derived =
          tp_fixpoint(transformed_as_program(seeded), {});
      CHECK(derived.contains(q) == naive.contains(q));

      // Exact enumeration agrees with plain membership on one-world
      // programs.
      auto oracle = exact_enumerate(e.program, q, Evidence{});
      CHECK(oracle.p_q_and_e == (naive.contains(q) ? 1.0 : 0.0));
      CHECK(oracle.p_e == 1.0);
    }
  }
}

TEST_CASE("deterministic corpus: derived atoms are relevant to the query") {
  for (const auto& e : corpus()) {
    if (e.probabilistic || uses_builtins(e.program)) continue;
    for (const auto& q : e.queries) {
      INFO(e.name << " ?- " << atom_to_string(q));
      SldVisits visits(e.program, q);
      auto seeded = seed_program(pmagic_transform(e.program), q, Evidence{});
      Interpretation derived =
          tp_fixpoint(transformed_as_program(seeded), {});
      for (const Atom& a : derived.atoms()) {
        if (is_call_pred(a.pred) || is_wrapped_pred(a.pred)) continue;
        INFO("derived " << atom_to_string(a));
        CHECK(visits.covers(a));
      }
    }
  }
}

// Programs whose rules ground probabilistic facts only through call atoms
// (the user-defined between/3 over outcome bounds); forward chaining on the
// untransformed program flounders on them, so only the transformed route
// enumerates. They stay in the sampler-consistency suite below.
const std::set<std::string> kCallDrivenOnly = {"p05_between", "p09_mini_urn"};

TEST_CASE("probabilistic corpus: the transformation preserves exact "
          "distributions") {
  std::size_t compared = 0;
  for (const auto& e : corpus()) {
    if (!e.probabilistic || kCallDrivenOnly.count(e.name)) continue;
    auto transformed = pmagic_transform(e.program);
    for (const auto& q : e.queries) {
      INFO(e.name << " ?- " << atom_to_string(q));
      auto direct = exact_enumerate(e.program, q, e.evidence);
      auto magic = exact_enumerate_transformed(transformed, q, e.evidence);
      CHECK(std::abs(direct.p_q_and_e - magic.p_q_and_e) <= 1e-9);
      CHECK(std::abs(direct.p_e - magic.p_e) <= 1e-9);
      CHECK(direct.p_e > 0.0);  // corpus evidence is satisfiable
      ++compared;
    }
  }
  CHECK(compared >= 15);
}

TEST_CASE("probabilistic corpus: sampled estimates are consistent with the "
          "oracle") {
  // A light version of the acceptance criterion: one seed, both methods.
  for (const auto& e : corpus()) {
    if (!e.probabilistic) continue;
    auto transformed = pmagic_transform(e.program);
    for (const auto& q : e.queries) {
      auto oracle = exact_enumerate_transformed(transformed, q, e.evidence);
      auto truth = oracle.conditional();
      REQUIRE(truth);
      for (Method m : {Method::Rejection, Method::LikelihoodWeighting}) {
        SamplerConfig cfg;
        cfg.method = m;
        cfg.depth = 2;
        cfg.max_samples = 4000;
        cfg.seed = 1234;
        auto res = evaluate(e.program, q, e.evidence, cfg);
        INFO(e.name << " ?- " << atom_to_string(q)
                    << (m == Method::Rejection ? " [rejection]" : " [lw]"));
        REQUIRE(res.estimate);
        double tol = 4.0 * res.stats.standard_error() + 1e-9;
        CHECK(std::abs(*res.estimate - *truth) <= tol);
      }
    }
  }
}

TEST_CASE("ground instances respect the predicate ranking at runtime") {
  for (const auto& e : corpus()) {
    if (!e.probabilistic) continue;
    ValidationReport rep = validate(e.program);
    REQUIRE(rep.predicate_rank.has_value());
    const auto& rank = *rep.predicate_rank;

    auto node_of = [](const Atom& a) -> std::string {
      if (a.pred == kDistHeadPred) {
        auto rv = a.args[0];
        std::string f = rv->kind() == Term::Kind::Compound
                            ? rv->name() + "/" +
                                  std::to_string(rv->args().size())
                            : rv->name() + "/0";
        return f + "~";
      }
      return a.pred + "/" + std::to_string(a.arity());
    };
    auto rank_of = [&](const std::string& node) -> std::optional<int> {
      auto it = rank.find(node);
      if (it == rank.end()) return std::nullopt;
      return it->second;
    };

    EngineHooks hooks;
    std::size_t checked = 0;
    hooks.on_derive = [&](const Atom& head, const std::vector<Atom>& body) {
      bool head_is_dist = head.pred == kDistHeadPred;
      auto hr = rank_of(node_of(head));
      if (!hr) return;
      for (const Atom& b : body) {
        Atom plain = b;
        if (is_call_pred(plain.pred)) continue;
        if (is_wrapped_pred(plain.pred))
          plain.pred = unwrapped_name(plain.pred);
        auto br = rank_of(node_of(plain));
        if (!br) continue;
        ++checked;
        if (head_is_dist)
          CHECK(*hr > *br);
        else
          CHECK(*hr >= *br);
      }
    };
    for (const auto& q : e.queries) {
      SamplerConfig cfg;
      cfg.max_samples = 50;
      cfg.seed = 77;
      (void)evaluate(e.program, q, e.evidence, cfg, &hooks);
    }
    CHECK(checked > 0);
  }
}
