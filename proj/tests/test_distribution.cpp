#include <doctest.h>

#include <cmath>
#include <map>

#include "dclp/distribution.hpp"

using namespace dclp;

namespace {

TermPtr sym(const char* n) { return Term::symbol(n); }
TermPtr num(long long x) { return Term::integer(x); }

Distribution range_uniform(long long lo, long long hi) {
  std::vector<TermPtr> values;
  for (long long k = lo; k <= hi; ++k) values.push_back(num(k));
  return Distribution::uniform_discrete(std::move(values));
}

}  // namespace

TEST_CASE("point mass draws its only value") {
  auto d = Distribution::categorical({{1.0, sym("red")}});
  RandomSource r(7);
  CHECK(term_to_string(d.draw(r)) == "red");
}

TEST_CASE("same seed gives identical draw sequences") {
  auto d = range_uniform(1, 10);
  RandomSource a(123), b(123);
  for (int k = 0; k < 200; ++k)
    CHECK(term_to_string(d.draw(a)) == term_to_string(d.draw(b)));
}

TEST_CASE("derived worker streams are stable") {
  CHECK(RandomSource::derive_stream(42, 0) == RandomSource::derive_stream(42, 0));
  CHECK(RandomSource::derive_stream(42, 0) != RandomSource::derive_stream(42, 1));
}

TEST_CASE("poisson empirical mean matches the rate") {
  auto d = Distribution::poisson(6.0);
  RandomSource r(2024);
  double sum = 0.0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) sum += d.draw(r)->as_real();
  CHECK(std::abs(sum / n - 6.0) <= 0.1);
}

TEST_CASE("large-rate poisson sampler stays close to its mean") {
  auto d = Distribution::poisson(80.0);
  RandomSource r(5);
  double sum = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) sum += d.draw(r)->as_real();
  // 3 sigma of the sample mean is sqrt(80/20000)*3 = 0.19.
  CHECK(std::abs(sum / n - 80.0) <= 0.3);
}

TEST_CASE("gamma sampling matches its mean for both shape regimes") {
  RandomSource r(99);
  for (double shape : {0.5, 4.0}) {
    auto d = Distribution::gamma(shape, 2.0);
    double sum = 0.0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) sum += d.draw(r)->as_real();
    double mean = shape * 2.0;
    double sigma3 = 3.0 * std::sqrt(shape * 4.0 / n);
    CHECK(std::abs(sum / n - mean) <= sigma3 * 1.5);
  }
}

TEST_CASE("uniform continuous draws stay in range") {
  auto d = Distribution::uniform_continuous(-1.0, 2.0);
  RandomSource r(1);
  for (int k = 0; k < 1000; ++k) {
    double x = d.draw(r)->real_value();
    CHECK(x >= -1.0);
    CHECK(x < 2.0);
  }
}

TEST_CASE("mass of finite distributions") {
  auto d = Distribution::categorical({{0.7, sym("b")}, {0.3, sym("g")}});
  CHECK(d.mass(sym("b")) == doctest::Approx(0.7));
  CHECK(d.mass(sym("r")) == 0.0);
  CHECK(range_uniform(1, 8).mass(num(3)) == doctest::Approx(0.125));
}

TEST_CASE("removal renormalizes and reports the removed mass") {
  auto d = Distribution::categorical({{0.7, sym("b")}, {0.3, sym("g")}});
  auto [forced, removed] = d.remove_and_renormalize(sym("g"));
  CHECK(removed == doctest::Approx(0.3));
  REQUIRE(forced.entries().size() == 1);
  CHECK(forced.entries()[0].prob == doctest::Approx(1.0));
  CHECK(term_to_string(forced.entries()[0].value) == "b");

  auto half = Distribution::categorical({{0.5, sym("a")}, {0.5, sym("b")}});
  auto [unchanged, zero] = half.remove_and_renormalize(sym("c"));
  CHECK(zero == 0.0);
  CHECK(unchanged.entries().size() == 2);

  auto [thirds, quarter] = range_uniform(1, 4).remove_and_renormalize(num(2));
  CHECK(quarter == doctest::Approx(0.25));
  REQUIRE(thirds.entries().size() == 3);
  for (const auto& e : thirds.entries())
    CHECK(e.prob == doctest::Approx(1.0 / 3.0));

  auto point = Distribution::categorical({{1.0, sym("x")}});
  auto [empty, all] = point.remove_and_renormalize(sym("x"));
  CHECK(all == doctest::Approx(1.0));
  CHECK(empty.empty());
}

TEST_CASE("masses always renormalize to one") {
  auto d = range_uniform(1, 6);
  RandomSource r(3);
  while (d.support_size() > 1) {
    d = d.remove_and_renormalize(d.entries()[r.below(d.support_size())].value)
            .first;
    double sum = 0.0;
    for (const auto& e : d.entries()) sum += e.prob;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("comparison relations") {
  CHECK(compare_values("dist_gt", num(12), num(9)));
  CHECK(compare_values("dist_eq", sym("b"), sym("b")));
  CHECK(compare_values("dist_leq", num(3), num(3)));
  CHECK(compare_values("dist_lt", num(3), Term::real(3.5)));
  CHECK_FALSE(compare_values("dist_eq", num(3), num(4)));
  // Mixed integer/real comparisons coerce.
  CHECK(compare_values("dist_eq", num(3), Term::real(3.0)));
  CHECK_THROWS_AS(compare_values("dist_lt", sym("a"), sym("b")),
                  DistributionError);
}

TEST_CASE("ordering relations are mutually dual") {
  RandomSource r(11);
  for (int k = 0; k < 500; ++k) {
    auto a = Term::integer(static_cast<long long>(r.below(7)));
    auto b = Term::real(static_cast<double>(r.below(7)) / 2.0);
    CHECK(compare_values("dist_lt", a, b) !=
          compare_values("dist_geq", a, b));
    CHECK(compare_values("dist_gt", a, b) !=
          compare_values("dist_leq", a, b));
  }
}

TEST_CASE("categorical invariants are enforced") {
  CHECK_THROWS_AS(Distribution::categorical({{0.7, sym("a")}}),
                  DistributionError);
  CHECK_THROWS_AS(
      Distribution::categorical({{0.5, sym("a")}, {0.5, sym("a")}}),
      DistributionError);
  CHECK_THROWS_AS(Distribution::poisson(0.0), DistributionError);
  CHECK_THROWS_AS(Distribution::gamma(1.0, 0.0), DistributionError);
  CHECK_THROWS_AS(Distribution::uniform_continuous(2.0, 2.0),
                  DistributionError);
  RandomSource r(1);
  CHECK_THROWS_AS(Distribution().draw(r), DistributionError);
}

TEST_CASE("chi-square goodness of fit for categorical draws") {
  auto d = Distribution::categorical(
      {{0.5, sym("a")}, {0.3, sym("b")}, {0.2, sym("c")}});
  RandomSource r(77);
  std::map<std::string, int> counts;
  const int n = 100000;
  for (int k = 0; k < n; ++k) counts[term_to_string(d.draw(r))]++;
  double chi2 = 0.0;
  for (const auto& e : d.entries()) {
    double expected = e.prob * n;
    double observed = counts[term_to_string(e.value)];
    chi2 += (observed - expected) * (observed - expected) / expected;
  }
  // 0.999 quantile of chi-square with 2 degrees of freedom.
  CHECK(chi2 <= 13.816);
}

TEST_CASE("uniform over a bag merges duplicate values") {
  auto d = Distribution::uniform_discrete({num(1), num(1), num(2)});
  CHECK(d.mass(num(1)) == doctest::Approx(2.0 / 3.0));
  CHECK(d.mass(num(2)) == doctest::Approx(1.0 / 3.0));
}
