#include <doctest.h>

#include "dclp/magic.hpp"
#include "dclp/parser.hpp"

using namespace dclp;

namespace {

bool contains_line(const std::string& text, const std::string& line) {
  return text.find(line + "\n") != std::string::npos;
}

}  // namespace

TEST_CASE("magic guards a unit clause with its own call") {
  auto t = magic_transform(parse_program("a."));
  std::string out = transformed_to_string(t);
  CHECK(contains_line(out, "a :- c(a)."));
  CHECK(t.clauses.size() == 1);
}

TEST_CASE("magic adds one propagation clause per body atom") {
  auto t = magic_transform(parse_program("a :- b."));
  std::string out = transformed_to_string(t);
  CHECK(contains_line(out, "a :- c(a), b."));
  CHECK(contains_line(out, "c(b) :- c(a)."));
  CHECK(t.clauses.size() == 2);
}

TEST_CASE("magic propagates left context") {
  auto t = magic_transform(parse_program("p(X) :- q(X), r(X)."));
  std::string out = transformed_to_string(t);
  CHECK(contains_line(out, "p(X) :- c(p(X)), q(X), r(X)."));
  CHECK(contains_line(out, "c(q(X)) :- c(p(X))."));
  CHECK(contains_line(out, "c(r(X)) :- c(p(X)), q(X)."));
  CHECK(t.clauses.size() == 3);
}

TEST_CASE("pmagic wraps builtins and guards distributional clauses") {
  auto p = parse_program("many :- dist_gt(~(number), 9).\n"
                         "number ~ poisson(6).\n");
  auto t = pmagic_transform(p);
  std::string out = transformed_to_string(t);

  CHECK(contains_line(out, "many :- c(many), a_dist_gt(~(number), 9)."));
  CHECK(contains_line(out, "c(dist_gt(~(number), 9)) :- c(many)."));
  CHECK(contains_line(
      out, "a_dist_gt(_W0, _W1) :- c(dist_gt(_W0, _W1)), dist_gt(_W0, _W1)."));

  // Ten guarded copies: five relations, both argument positions.
  CHECK(t.dist_clauses.size() == 10);
  std::size_t left = 0, right = 0;
  for (const auto& dc : t.dist_clauses) {
    REQUIRE(dc.body.size() == 1);
    CHECK(dc.body[0].pred == kCallPred);
    auto inner = atom_from_term(dc.body[0].args[0]);
    REQUIRE(inner);
    CHECK(is_dist_rel(inner->pred));
    if (inner->args[0]->kind() == Term::Kind::Outcome)
      ++left;
    else
      ++right;
  }
  CHECK(left == 5);
  CHECK(right == 5);

  CHECK(t.call_wrapper_map.count("dist_gt/2") == 1);
  CHECK(t.call_wrapper_map.at("dist_gt/2") == wrapped_name("dist_gt"));
}

TEST_CASE("pmagic without distributional clauses degenerates to magic") {
  auto p = parse_program("a :- b.\nb.\n");
  CHECK(transformed_to_string(pmagic_transform(p)) ==
        transformed_to_string(magic_transform(p)));
}

TEST_CASE("guard variables are fresh per generated clause") {
  auto p = parse_program("x ~ uniform([1, 2]) :- cond.\n"
                         "y ~ uniform([3, 4]) :- cond.\ncond.\n");
  auto t = pmagic_transform(p);
  std::set<std::string> guards;
  for (const auto& dc : t.dist_clauses)
    guards.insert(atom_to_string(dc.body[0]));
  CHECK(guards.size() == t.dist_clauses.size());
}

TEST_CASE("dist clause bodies get propagation clauses per guard copy") {
  auto p = parse_program("color(B) ~ [0.5:r, 0.5:g] :- ball(B).\nball(1).\n");
  auto t = pmagic_transform(p);
  std::size_t props = 0;
  for (const auto& c : t.clauses) {
    if (c.head.pred != kCallPred || c.body.empty()) continue;
    auto inner = atom_from_term(c.head.args[0]);
    if (inner && inner->pred == "ball") ++props;
  }
  CHECK(props == 10);
}

TEST_CASE("findall goals gain call propagation") {
  auto p = parse_program(
      "drawn(D) ~ uniform(L) :- draw(D), findall(B, ball(B), L).\n"
      "ball(1).\ndraw(1).\n");
  auto t = pmagic_transform(p);
  std::string out = transformed_to_string(t);
  CHECK(out.find("c(ball(B)) :- c(findall(B, ball(B), L)).") !=
        std::string::npos);
}

TEST_CASE("seeding adds call facts idempotently") {
  auto p = parse_program("many :- dist_gt(~(number), 9).\nnumber ~ poisson(6).\n");
  auto t = pmagic_transform(p);
  Atom many{"many", {}};
  Evidence e;
  e.positive.push_back(Atom{"a", {}});
  e.negative.push_back(Atom{"b", {}});

  auto seeded = seed_program(t, many, e);
  std::string out = transformed_to_string(seeded);
  CHECK(contains_line(out, "c(many)."));
  CHECK(contains_line(out, "c(a)."));
  CHECK(contains_line(out, "c(b)."));
  CHECK(seeded.clauses.size() == t.clauses.size() + 3);

  auto again = seed_program(seeded, many, e);
  CHECK(again.clauses.size() == seeded.clauses.size());
}

TEST_CASE("transform output reparses") {
  auto p = parse_program("many :- dist_gt(~(number), 9).\nnumber ~ poisson(6).\n");
  auto seeded = seed_program(pmagic_transform(p), Atom{"many", {}}, Evidence{});
  std::string out = transformed_to_string(seeded);
  Program reparsed = parse_program(out);
  CHECK(reparsed.clauses.size() == seeded.clauses.size());
  CHECK(reparsed.dist_clauses.size() == seeded.dist_clauses.size());
}
