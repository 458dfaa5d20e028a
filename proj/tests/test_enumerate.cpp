#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "dclp/enumerate.hpp"
#include "dclp/parser.hpp"

using namespace dclp;

namespace {

Atom atom(const std::string& text) { return parse_atom_string(text); }

Program load(const std::string& name) {
  std::ifstream in(std::string(DCLP_PROGRAMS_DIR) + "/" + name);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_program(os.str());
}

}  // namespace

TEST_CASE("truncated poisson tail probability") {
  Program p = load("many.dc");
  EnumerateOptions opt;
  opt.poisson_cap = 30;
  auto res = exact_enumerate(p, atom("many"), Evidence{}, opt);
  // 1 - CDF_Poisson(6)(9); the truncation tail at 30 is below 1e-9.
  double term = std::exp(-6.0), cdf9 = 0.0;
  for (int k = 0; k <= 9; ++k) {
    cdf9 += term;
    term *= 6.0 / (k + 1);
  }
  CHECK(std::abs(res.p_q_and_e - (1.0 - cdf9)) <= 1e-4);
  CHECK(res.p_e == doctest::Approx(1.0));
  REQUIRE(res.conditional());
  CHECK(std::abs(*res.conditional() - 0.0839) <= 1e-3);
}

TEST_CASE("an unbounded prior without a cap is an error") {
  Program p = load("many.dc");
  CHECK_THROWS_AS(exact_enumerate(p, atom("many"), Evidence{}), EngineError);
}

TEST_CASE("a reachable continuous variable is an error") {
  Program p = parse_program("t ~ gamma(2, 2).\nhot :- dist_gt(~(t), 5).\n");
  CHECK_THROWS_AS(exact_enumerate(p, atom("hot"), Evidence{}), EngineError);
}

TEST_CASE("deterministic programs enumerate to 0/1 in one world") {
  Program p = parse_program("a :- b.\nb.\nc :- missing.\n");
  auto yes = exact_enumerate(p, atom("a"), Evidence{});
  CHECK(yes.p_q_and_e == 1.0);
  CHECK(yes.p_e == 1.0);
  CHECK(yes.worlds == 1);
  auto no = exact_enumerate(p, atom("c"), Evidence{});
  CHECK(no.p_q_and_e == 0.0);
}

TEST_CASE("conditional probabilities are exact rationals") {
  Program p = parse_program(
      "n ~ uniform([1, 2, 3]).\n"
      "flip(N) ~ [0.6:heads, 0.4:tails] :- val(N), dist_leq(~(n), N).\n"
      "flip(N) ~ [0.2:heads, 0.8:tails] :- val(N), dist_gt(~(n), N).\n"
      "val(1).\nval(2).\nval(3).\n");
  Evidence e = parse_evidence("+dist_eq(~(flip(2)), heads).\n", p);
  auto res = exact_enumerate(p, atom("dist_eq(~(n), 1)"), e);
  REQUIRE(res.conditional());
  // p(e|n) = 0.6, 0.6, 0.2 with a uniform prior: posterior(1) = 3/7.
  CHECK(std::abs(*res.conditional() - 3.0 / 7.0) <= 1e-12);
  CHECK(std::abs(res.p_e - 1.4 / 3.0) <= 1e-12);
}

TEST_CASE("negative evidence conditions the enumeration") {
  Program p = parse_program(
      "c1 ~ [0.5:h, 0.5:t].\nc2 ~ [0.5:h, 0.5:t].\n"
      "both :- dist_eq(~(c1), h), dist_eq(~(c2), h).\n"
      "first :- dist_eq(~(c1), h).\n");
  Evidence e;
  e.negative.push_back(atom("both"));
  auto res = exact_enumerate(p, atom("first"), e);
  REQUIRE(res.conditional());
  CHECK(std::abs(*res.conditional() - 1.0 / 3.0) <= 1e-12);
}

TEST_CASE("transformed enumeration agrees with the direct one") {
  Program p = parse_program(
      "x ~ uniform([1, 2, 3, 4]).\n"
      "y ~ uniform([1, 2, 3, 4]).\n"
      "less :- dist_lt(~(x), ~(y)).\n");
  auto direct = exact_enumerate(p, atom("less"), Evidence{});
  auto transformed = exact_enumerate_transformed(pmagic_transform(p),
                                                 atom("less"), Evidence{});
  CHECK(std::abs(direct.p_q_and_e - transformed.p_q_and_e) <= 1e-12);
  CHECK(std::abs(direct.p_q_and_e - 6.0 / 16.0) <= 1e-12);
}

TEST_CASE("the world cap aborts oversized enumerations") {
  Program p = parse_program(
      "a ~ uniform([1, 2, 3, 4, 5]).\nb ~ uniform([1, 2, 3, 4, 5]).\n"
      "q :- dist_eq(~(a), ~(b)).\n");
  EnumerateOptions opt;
  opt.max_worlds = 10;
  CHECK_THROWS_AS(exact_enumerate(p, atom("q"), Evidence{}, opt),
                  EngineError);
}

TEST_CASE("query probability on a reduced urn matches the sampler") {
  // Small enough to enumerate: 3 balls max, 2 draws.
  Program p = parse_program(
      "nballs ~ uniform([1, 2, 3]).\n"
      "ball(M) :- between(1, ~(nballs), M).\n"
      "color(B) ~ [0.5:green, 0.5:blue] :- ball(B).\n"
      "draw(N) :- between(1, 2, N).\n"
      "drawnball(D) ~ uniform(L) :- draw(D), findall(B, ball(B), L).\n"
      "obscolor(D) ~ [0.8:green, 0.2:blue] :- draw(D), "
      "dist_eq(~(color(~(drawnball(D)))), green).\n"
      "obscolor(D) ~ [0.2:green, 0.8:blue] :- draw(D), "
      "dist_eq(~(color(~(drawnball(D)))), blue).\n"
      "between(I, J, I) :- dist_leq(I, J).\n"
      "between(I, J, K) :- dist_lt(I, J), I1 is I + 1, between(I1, J, K).\n");
  Evidence e = parse_evidence(
      "+dist_eq(~(obscolor(1)), green).\n+dist_eq(~(obscolor(2)), green).\n",
      p);
  Atom q = atom("dist_eq(~(nballs), 2)");
  auto oracle = exact_enumerate_transformed(pmagic_transform(p), q, e);
  REQUIRE(oracle.conditional());

  SamplerConfig cfg;
  cfg.method = Method::LikelihoodWeighting;
  cfg.max_samples = 20000;
  cfg.seed = 31;
  auto est = evaluate(p, q, e, cfg);
  REQUIRE(est.estimate);
  CHECK(std::abs(*est.estimate - *oracle.conditional()) <=
        3.0 * est.stats.standard_error());
}
