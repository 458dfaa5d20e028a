#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dclp/distribution.hpp"
#include "dclp/magic.hpp"
#include "dclp/program.hpp"
#include "dclp/term.hpp"

namespace dclp {

class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Growing set of derived atoms. Atoms are stored in insertion order in a
// canonical variable renaming, indexed by predicate and first-argument
// shape. Non-ground atoms (call atoms with free variables) are allowed.
class Interpretation {
 public:
  bool contains(const Atom& a) const;
  // Returns true when the atom is new. Canonicalizes variables.
  bool insert(const Atom& a);
  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  // Indices (ascending) of stored atoms below `limit` that may unify with
  // the pattern.
  void candidates(const Atom& pattern, std::size_t limit,
                  std::vector<std::size_t>& out) const;

 private:
  std::vector<Atom> atoms_;
  // Canonical structural hash -> indices (collisions checked by equality).
  std::unordered_map<std::size_t, std::vector<std::size_t>> dedupe_;
  // (predicate, arity, first-argument shape) -> indices.
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> coarse_;
  // (predicate, arity) with a variable-shaped first argument.
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> var_first_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_pred_;
};

// T_dis: one sampled value per ground random variable per run.
using ValueTable = std::map<TermPtr, TermPtr, TermPtrLess>;

// T_pf: evaluated probabilistic facts, keyed by the resolved ground fact.
struct FactEntry {
  bool truth;
  double weight;
};
using FactTable = std::map<Atom, FactEntry, AtomLess>;

enum class Method { Rejection, LikelihoodWeighting };

struct SamplerConfig {
  Method method = Method::Rejection;
  unsigned depth = 0;
  std::size_t max_samples = 1000;
  std::uint64_t seed = 1;
  bool stderr_stop = false;      // fixed count when false
  double stderr_threshold = 0.0;
  unsigned workers = 1;
  std::size_t max_derived = 1000000;
};

struct EstimatorState {
  double n_plus = 0.0;
  double n_minus = 0.0;
  std::size_t samples_drawn = 0;
  std::size_t accepted = 0;
  double sum_weight_sq = 0.0;

  std::optional<double> estimate() const {
    double w = n_plus + n_minus;
    if (w <= 0.0) return std::nullopt;
    return n_plus / w;
  }
  double acceptance_rate() const {
    return samples_drawn == 0
               ? 0.0
               : static_cast<double>(accepted) /
                     static_cast<double>(samples_drawn);
  }
  // Standard error of the weighted estimate:
  // sqrt(p(1-p) * sum(w^2) / (sum w)^2). Reduces to sqrt(p(1-p)/n) for
  // 0/1 weights.
  double standard_error() const {
    auto p = estimate();
    double w = n_plus + n_minus;
    if (!p || w <= 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(std::max(0.0, *p * (1.0 - *p)) * sum_weight_sq /
                     (w * w));
  }
};

struct WeightedSample {
  Interpretation interpretation;
  double weight = 0.0;
};

struct EvaluateResult {
  std::optional<double> estimate;  // nullopt: no accepted samples
  EstimatorState stats;
};

// Context for the depth-bounded backward provers: the current derivations,
// tabled values/facts, an optional value hypothesis for one random
// variable, and the original (untransformed) program to reason over.
struct LookaheadContext {
  const Interpretation* interp = nullptr;
  const ValueTable* values = nullptr;
  const Program* original = nullptr;
  TermPtr hyp_rv;     // may be null
  TermPtr hyp_value;  // may be null
};

// Optimistic bounded proof: unresolved probabilistic facts and goals at the
// depth bound are assumed to succeed. Returns true iff a proof was found;
// a false answer guarantees no exact proof exists under the hypothesis.
bool maybe_proof(const Atom& goal, unsigned depth, const LookaheadContext& ctx);
// Pessimistic dual: unresolved facts and bounded goals are assumed to fail.
// Returns true iff the bounded search fails everywhere; a false answer
// guarantees the goal is exactly provable from tabled facts.
bool maybe_fail(const Atom& goal, unsigned depth, const LookaheadContext& ctx);

struct PruneEvent {
  TermPtr rv;
  TermPtr value;
  double mass;  // mass at removal time in the progressively renormalized D'
};

struct PruneOutcome {
  Distribution dist;     // remaining distribution (possibly empty)
  double weight = 1.0;   // accumulated w_h
  std::vector<PruneEvent> removed;
};

// Likelihood-weighting value pruning for one finite distribution:
// (1) values named by negative dist_eq evidence are removed, (2) a positive
// dist_eq evidence value collapses the distribution to a point mass, and
// (3) values under which some positive evidence loses every optimistic
// proof, or some negative evidence becomes exactly provable, are removed.
// Each removal renormalizes and multiplies the weight by (1 - mass).
PruneOutcome lookahead_prune(const TermPtr& rv, const Distribution& d,
                             const Evidence& e, unsigned depth,
                             const LookaheadContext& ctx);

// Deterministic least fixpoint of the one-step consequence operator above
// `facts`. The program must not contain distributional clauses; ground
// numeric probabilistic facts in bodies are evaluated directly.
Interpretation tp_fixpoint(const Program& p, const std::vector<Atom>& facts,
                           std::size_t max_derived = 1000000);

// Frozen mid-run sampler state, taken before a random variable was pruned
// and sampled. Opaque; pass it to resume_with_forced_value. Valid while the
// program and evidence given to the producing run stay alive.
struct SampleSnapshot {
  std::shared_ptr<const void> engine;
  std::shared_ptr<const void> state;
};

// Hooks for instrumentation. on_prune fires per value removed by lookahead;
// the snapshot callback can replay the run with the value forced instead.
struct EngineHooks {
  std::function<void(const PruneEvent&, const SampleSnapshot&)> on_prune;
  // Fires per derived clause-head instance (head, body instances).
  std::function<void(const Atom&, const std::vector<Atom>&)> on_derive;
};

// One forward-chained sample from the seeded transformed program.
WeightedSample sample_interpretation(const TransformedProgram& seeded,
                                     const Program& original,
                                     const Evidence& e,
                                     const SamplerConfig& cfg,
                                     RandomSource rng,
                                     const EngineHooks* hooks = nullptr);

// Replays a snapshot taken by on_prune with `rv` forcibly tabled to `value`,
// runs the sample to completion, and returns its final weight.
double resume_with_forced_value(const SampleSnapshot& snapshot,
                                const TermPtr& rv, const TermPtr& value);

// Estimates p(query | evidence) by repeated sampling of the seeded
// probabilistic-magic transform of `p`. Sample j draws from the stream
// RandomSource::for_stream(cfg.seed, j), so results are reproducible for
// any worker count.
EvaluateResult evaluate(const Program& p, const Atom& query, const Evidence& e,
                        const SamplerConfig& cfg,
                        const EngineHooks* hooks = nullptr);

// Weighted histogram of the sampled values of one random variable across
// accepted samples; estimates the whole posterior in a single pass.
struct PosteriorResult {
  std::vector<std::pair<TermPtr, double>> points;  // sorted by term order
  EstimatorState stats;
};
PosteriorResult evaluate_posterior(const Program& p, const TermPtr& rv,
                                   const Evidence& e,
                                   const SamplerConfig& cfg);

}  // namespace dclp
