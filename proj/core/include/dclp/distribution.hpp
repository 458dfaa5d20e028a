#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dclp/program.hpp"
#include "dclp/term.hpp"

namespace dclp {

class DistributionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic pseudo-random stream. The generator is std::mt19937_64 (a
// fixed, standardized algorithm) and every draw below maps its raw 64-bit
// output through documented arithmetic, so identical seeds produce identical
// draw sequences across platforms. Worker stream i is derived from the
// master seed as splitmix64(seed XOR (i+1) * 0x9E3779B97F4A7C15).
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : gen_(seed) {}

  static std::uint64_t derive_stream(std::uint64_t master, std::uint64_t i);
  static RandomSource for_stream(std::uint64_t master, std::uint64_t i) {
    return RandomSource(derive_stream(master, i));
  }

  // Uniform on [0,1) with 53-bit resolution: (x >> 11) * 2^-53.
  double uniform01();
  // Uniform integer in [0, n) by rejection; n >= 1.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 gen_;
};

struct CategoricalEntry {
  double prob;
  TermPtr value;
};

// A distribution with fully ground parameters. Finite kinds (categorical,
// discrete uniform) support point-mass queries and renormalization; the
// others only support sampling.
class Distribution {
 public:
  Distribution() = default;  // empty categorical

  static Distribution categorical(std::vector<CategoricalEntry> entries);
  static Distribution uniform_discrete(std::vector<TermPtr> values);
  static Distribution uniform_continuous(double low, double high);
  static Distribution poisson(double rate);
  static Distribution gamma(double shape, double scale);

  DistKind kind() const { return kind_; }
  bool finite() const {
    return kind_ == DistKind::Categorical ||
           kind_ == DistKind::UniformDiscrete;
  }
  bool empty() const { return finite() && entries_.empty(); }
  std::size_t support_size() const { return entries_.size(); }
  // Finite kinds only; entries in declaration order (discrete uniform sorted
  // by term order, duplicates merged).
  const std::vector<CategoricalEntry>& entries() const;

  double param0() const { return p0_; }  // rate / shape / low
  double param1() const { return p1_; }  // scale / high

  TermPtr draw(RandomSource& rng) const;
  double mass(const TermPtr& value) const;

  // Deletes `value` and divides the remaining masses by (1 - p). Returns the
  // new distribution and the removed mass; unchanged with mass 0 when the
  // value is absent. Removing the last entry yields the empty distribution.
  std::pair<Distribution, double> remove_and_renormalize(
      const TermPtr& value) const;

  bool equals(const Distribution& other) const;
  std::string to_string() const;

 private:
  DistKind kind_ = DistKind::Categorical;
  std::vector<CategoricalEntry> entries_;
  double p0_ = 0.0, p1_ = 0.0;
};

// Truth of rel(v1, v2) on ground values. Ordering relations require numbers
// (integer coerced to real when mixed); dist_eq on non-numbers is structural
// equality. Ordering on non-numbers throws DistributionError.
bool compare_values(const std::string& rel, const TermPtr& v1,
                    const TermPtr& v2);

}  // namespace dclp
