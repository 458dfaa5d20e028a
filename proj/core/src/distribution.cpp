#include "dclp/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace dclp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t RandomSource::derive_stream(std::uint64_t master,
                                          std::uint64_t i) {
  return splitmix64(master ^ ((i + 1) * 0x9E3779B97F4A7C15ull));
}

double RandomSource::uniform01() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomSource::below(std::uint64_t n) {
  if (n == 0) throw DistributionError("below(0)");
  std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                        std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return x % n;
}

Distribution Distribution::categorical(
    std::vector<CategoricalEntry> entries) {
  Distribution d;
  d.kind_ = DistKind::Categorical;
  double sum = 0.0;
  for (const auto& e : entries) {
    if (!(e.prob >= 0.0 && e.prob <= 1.0 + 1e-12))
      throw DistributionError("categorical probability out of [0,1]: " +
                              std::to_string(e.prob));
    if (!e.value->is_ground())
      throw DistributionError("categorical value must be ground");
    sum += e.prob;
  }
  if (!entries.empty() && std::abs(sum - 1.0) > 1e-9)
    throw DistributionError("categorical probabilities sum to " +
                            std::to_string(sum) + ", expected 1");
  for (std::size_t i = 0; i < entries.size(); ++i)
    for (std::size_t j = i + 1; j < entries.size(); ++j)
      if (term_equals(*entries[i].value, *entries[j].value))
        throw DistributionError("duplicate categorical value " +
                                term_to_string(entries[i].value));
  d.entries_ = std::move(entries);
  return d;
}

Distribution Distribution::uniform_discrete(std::vector<TermPtr> values) {
  Distribution d;
  d.kind_ = DistKind::UniformDiscrete;
  // Duplicates in the source list carry multiplicity (drawing a random
  // element of a bag); entries are merged and sorted for determinism.
  std::map<TermPtr, int, TermPtrLess> counts;
  for (const auto& v : values) {
    if (!v->is_ground())
      throw DistributionError("uniform value must be ground");
    counts[v] += 1;
  }
  double n = static_cast<double>(values.size());
  for (const auto& [v, c] : counts)
    d.entries_.push_back({static_cast<double>(c) / n, v});
  return d;
}

Distribution Distribution::uniform_continuous(double low, double high) {
  if (!(low < high))
    throw DistributionError("uniform(low, high) requires low < high");
  Distribution d;
  d.kind_ = DistKind::UniformContinuous;
  d.p0_ = low;
  d.p1_ = high;
  return d;
}

Distribution Distribution::poisson(double rate) {
  if (!(rate > 0.0)) throw DistributionError("poisson rate must be > 0");
  Distribution d;
  d.kind_ = DistKind::Poisson;
  d.p0_ = rate;
  return d;
}

Distribution Distribution::gamma(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw DistributionError("gamma shape and scale must be > 0");
  Distribution d;
  d.kind_ = DistKind::Gamma;
  d.p0_ = shape;
  d.p1_ = scale;
  return d;
}

const std::vector<CategoricalEntry>& Distribution::entries() const {
  if (!finite())
    throw DistributionError("entries() on a non-finite distribution");
  return entries_;
}

namespace {

// Inversion by sequential search for small rates; PTRS transformed rejection
// (Hoermann 1993) above. Both consume only uniform01 draws, keeping the
// sequence reproducible.
long long draw_poisson(double rate, RandomSource& rng) {
  if (rate <= 30.0) {
    double l = std::exp(-rate);
    double p = 1.0;
    long long k = 0;
    do {
      ++k;
      p *= rng.uniform01();
    } while (p > l);
    return k - 1;
  }
  const double mu = rate;
  const double smu = std::sqrt(mu);
  const double b = 0.931 + 2.53 * smu;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  while (true) {
    double u = rng.uniform01() - 0.5;
    double v = rng.uniform01();
    double us = 0.5 - std::abs(u);
    double k = std::floor((2.0 * a / us + b) * u + mu + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<long long>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
    double rhs = -mu + k * std::log(mu) - std::lgamma(k + 1.0);
    if (lhs <= rhs) return static_cast<long long>(k);
  }
}

// Marsaglia-Tsang squeeze method; shape < 1 is boosted through
// gamma(shape+1) * u^(1/shape).
double draw_gamma(double shape, double scale, RandomSource& rng) {
  if (shape < 1.0) {
    double u = rng.uniform01();
    while (u <= 0.0) u = rng.uniform01();
    return draw_gamma(shape + 1.0, scale, rng) *
           std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    // Polar Box-Muller from uniform01 draws only.
    double u1 = rng.uniform01();
    while (u1 <= 0.0) u1 = rng.uniform01();
    double u2 = rng.uniform01();
    double x = std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = rng.uniform01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return scale * d * v;
  }
}

}  // namespace

TermPtr Distribution::draw(RandomSource& rng) const {
  switch (kind_) {
    case DistKind::Categorical:
    case DistKind::UniformDiscrete: {
      if (entries_.empty())
        throw DistributionError("draw from an empty distribution");
      double u = rng.uniform01();
      double acc = 0.0;
      for (const auto& e : entries_) {
        acc += e.prob;
        if (u < acc) return e.value;
      }
      return entries_.back().value;
    }
    case DistKind::UniformContinuous:
      return Term::real(p0_ + rng.uniform01() * (p1_ - p0_));
    case DistKind::Poisson:
      return Term::integer(draw_poisson(p0_, rng));
    case DistKind::Gamma:
      return Term::real(draw_gamma(p0_, p1_, rng));
  }
  throw DistributionError("draw: unreachable");
}

double Distribution::mass(const TermPtr& value) const {
  if (!finite())
    throw DistributionError(
        "point mass queried on a continuous distribution");
  for (const auto& e : entries_)
    if (term_equals(*e.value, *value)) return e.prob;
  return 0.0;
}

std::pair<Distribution, double> Distribution::remove_and_renormalize(
    const TermPtr& value) const {
  if (!finite())
    throw DistributionError(
        "remove_and_renormalize on a continuous distribution");
  double removed = 0.0;
  std::vector<CategoricalEntry> kept;
  kept.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (term_equals(*e.value, *value))
      removed = e.prob;
    else
      kept.push_back(e);
  }
  if (removed == 0.0) {
    Distribution unchanged = *this;
    return {std::move(unchanged), 0.0};
  }
  Distribution d;
  d.kind_ = DistKind::Categorical;
  if (!kept.empty() && removed < 1.0) {
    double scale = 1.0 / (1.0 - removed);
    for (auto& e : kept) e.prob *= scale;
    d.entries_ = std::move(kept);
  }
  return {std::move(d), removed};
}

bool Distribution::equals(const Distribution& other) const {
  if (kind_ != other.kind_) return false;
  if (finite()) {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (std::abs(entries_[i].prob - other.entries_[i].prob) > 1e-12)
        return false;
      if (!term_equals(*entries_[i].value, *other.entries_[i].value))
        return false;
    }
    return true;
  }
  return p0_ == other.p0_ && p1_ == other.p1_;
}

std::string Distribution::to_string() const {
  std::ostringstream os;
  switch (kind_) {
    case DistKind::Categorical:
    case DistKind::UniformDiscrete: {
      os << '[';
      for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (i) os << ", ";
        os << entries_[i].prob << ':' << term_to_string(entries_[i].value);
      }
      os << ']';
      break;
    }
    case DistKind::UniformContinuous:
      os << "uniform(" << p0_ << ", " << p1_ << ')';
      break;
    case DistKind::Poisson:
      os << "poisson(" << p0_ << ')';
      break;
    case DistKind::Gamma:
      os << "gamma(" << p0_ << ", " << p1_ << ')';
      break;
  }
  return os.str();
}

bool compare_values(const std::string& rel, const TermPtr& v1,
                    const TermPtr& v2) {
  if (rel == "dist_eq") {
    if (v1->is_number() && v2->is_number()) {
      if (v1->kind() == Term::Kind::Integer &&
          v2->kind() == Term::Kind::Integer)
        return v1->int_value() == v2->int_value();
      return v1->as_real() == v2->as_real();
    }
    return term_equals(*v1, *v2);
  }
  if (!v1->is_number() || !v2->is_number())
    throw DistributionError("ordering relation " + rel +
                            " applied to non-numeric values " +
                            term_to_string(v1) + ", " + term_to_string(v2));
  if (v1->kind() == Term::Kind::Integer &&
      v2->kind() == Term::Kind::Integer) {
    long long a = v1->int_value(), b = v2->int_value();
    if (rel == "dist_lt") return a < b;
    if (rel == "dist_leq") return a <= b;
    if (rel == "dist_gt") return a > b;
    if (rel == "dist_geq") return a >= b;
  } else {
    double a = v1->as_real(), b = v2->as_real();
    if (rel == "dist_lt") return a < b;
    if (rel == "dist_leq") return a <= b;
    if (rel == "dist_gt") return a > b;
    if (rel == "dist_geq") return a >= b;
  }
  throw DistributionError("unknown relation " + rel);
}

}  // namespace dclp
