#include <doctest.h>

#include "dclp/parser.hpp"
#include "dclp/validate.hpp"

using namespace dclp;

namespace {

const char* kExample1 = R"(
nballs ~ poisson(6).
color(B) ~ [0.7:b, 0.3:g] :- between(1, ~(nballs), B).
diameter(B, MD) ~ gamma(MD/20, 20) :-
    between(1, ~(nballs), B),
    mean_diameter(~(color(B)), MD).
mean_diameter(C, 5) :- dist_eq(C, b).
mean_diameter(C, 10) :- dist_eq(C, g).
between(I, J, I) :- dist_leq(I, J).
between(I, J, K) :- dist_lt(I, J), I1 is I + 1, between(I1, J, K).
)";

}  // namespace

TEST_CASE("the ball-color-diameter program is distribution stratified") {
  ValidationReport r = validate(parse_program(kExample1));
  CHECK(r.ok());
  REQUIRE(r.predicate_rank.has_value());
  const auto& rank = *r.predicate_rank;
  REQUIRE(rank.count("nballs/0~"));
  REQUIRE(rank.count("color/1~"));
  REQUIRE(rank.count("diameter/2~"));
  CHECK(rank.at("nballs/0~") < rank.at("color/1~"));
  CHECK(rank.at("color/1~") < rank.at("diameter/2~"));
}

TEST_CASE("self-dependent random variables are rejected") {
  ValidationReport r =
      validate(parse_program("a ~ uniform([1]) :- dist_eq(~(a), 1)."));
  REQUIRE_FALSE(r.ok());
  CHECK(r.errors[0].message.find("cycle") != std::string::npos);
  CHECK_FALSE(r.predicate_rank.has_value());
}

TEST_CASE("purely deterministic programs validate silently at rank zero") {
  ValidationReport r = validate(parse_program("a :- b.\nb.\np(X) :- a."));
  CHECK(r.ok());
  CHECK(r.warnings.empty());
  REQUIRE(r.predicate_rank.has_value());
  for (const auto& [name, rank] : *r.predicate_rank) CHECK(rank == 0);
}

TEST_CASE("probabilistic programs carry the assumption warnings") {
  ValidationReport r = validate(parse_program("x ~ poisson(2)."));
  CHECK(r.ok());
  CHECK(r.warnings.size() == 3);
}

TEST_CASE("categorical probability literals are checked") {
  ValidationReport bad_sum =
      validate(parse_program("x ~ [0.7:a, 0.7:b]."));
  CHECK_FALSE(bad_sum.ok());
  ValidationReport out_of_range =
      validate(parse_program("x ~ [1.5:a, -0.5:b]."));
  CHECK_FALSE(out_of_range.ok());
}

TEST_CASE("distribution variables must be range restricted") {
  ValidationReport r = validate(parse_program("x(A) ~ uniform(L)."));
  CHECK_FALSE(r.ok());
  CHECK(r.errors[0].message.find("L") != std::string::npos);
}

TEST_CASE("reserved relation arities are enforced") {
  ValidationReport r = validate(parse_program("a :- dist_eq(1, 2, 3)."));
  CHECK_FALSE(r.ok());
}

TEST_CASE("comparing two continuous outcomes warns") {
  ValidationReport r = validate(parse_program(
      "t1 ~ gamma(2, 2).\nt2 ~ gamma(3, 1).\nsame :- dist_eq(~(t1), ~(t2))."));
  CHECK(r.ok());
  bool warned = false;
  for (const auto& w : r.warnings)
    warned = warned || w.message.find("continuous") != std::string::npos;
  CHECK(warned);
}

TEST_CASE("conditionally defined variables order below their users") {
  ValidationReport r = validate(parse_program(
      "obs(D) ~ [0.8:g, 0.2:b] :- draw(D), dist_eq(~(col(~(pick(D)))), g).\n"
      "col(B) ~ [0.5:g, 0.5:b] :- ball(B).\n"
      "pick(D) ~ uniform([1, 2]) :- draw(D).\n"
      "ball(1).\nball(2).\ndraw(1).\n"));
  CHECK(r.ok());
  const auto& rank = *r.predicate_rank;
  CHECK(rank.at("col/1~") < rank.at("obs/1~"));
  CHECK(rank.at("pick/1~") < rank.at("obs/1~"));
}
