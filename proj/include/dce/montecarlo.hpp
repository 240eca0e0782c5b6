// Trial-level simulation of both temporal orders: sample pair states, apply
// sequential Born-rule measurements with collapse, record outcomes, sort
// retrospectively into subensembles, estimate correlations with uncertainty.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dce/ensembles.hpp"
#include "dce/qmath.hpp"

namespace dce {

// Counter-based stream: the draw sequence is a pure function of
// (seed, stream_id, draw index), identical across runs and thread
// schedules. SplitMix64 with a per-stream key derived from (seed, stream).
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next_u64();
    double next_uniform();  // in [0, 1)

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Per-trial substream key: trial t under setting s draws from stream
// s * 2^40 + t, so sweep steps and auxiliary runs never share randomness.
std::uint64_t trial_stream(int settings_id, std::int64_t trial_id);

// One sampled pair's full outcome history, for retrospective sorting.
struct TrialRecord {
    std::int64_t trial_id = 0;
    // Which ensemble component was drawn. Hidden bookkeeping: estimators
    // never use it; a diagnostics flag exposes it for preparation-grouped
    // checks of the forward story.
    int component_index = 0;
    int first_i = 0;  // particle 1 outcome: 1 = along analyzer, 2 = perpendicular
    int first_j = 0;  // particle 2 outcome, same labels
    std::optional<int> later_outcome;  // A in 1..4; empty when skipped
    int settings_id = 0;
};

// Empirical counterpart of CorrelationReport.
struct EstimateReport {
    std::int64_t n = 0;
    double p_same = 0.0;
    double correlation = 0.0;  // 2 p_same - 1
    double std_error = 0.0;    // binomial on p_same, doubled for the correlation
};

// Conditioning on an outcome that was never observed.
struct EmptySubensemble : std::runtime_error {
    explicit EmptySubensemble(const std::string& what) : std::runtime_error(what) {}
};

// Draw component k with probability weight_k by inverse CDF on one uniform.
// Intervals are [lo, hi) with the final interval closed.
std::pair<int, PureState4> sample_component(const EnsembleSpec& ensemble,
                                            RngStream& rng);

// Projective measurement: outcome row drawn by the Born rule from a single
// uniform, state collapses onto that basis row. Returns the 0-based row
// index and the post-measurement state. Throws std::invalid_argument on an
// unnormalized state or non-unitary basis.
std::pair<int, PureState4> measure(const PureState4& state, const Basis4& basis,
                                   RngStream& rng);

// n trials of the forward order: sample a component, measure it in
// product_basis(angles). later_outcome stays empty. Validates inputs once,
// then runs trials on `threads` workers; records are identical for any
// thread count.
std::vector<TrialRecord> run_forward(const EnsembleSpec& ensemble,
                                     ProductAngles angles, std::int64_t n,
                                     std::uint64_t seed, int settings_id = 0,
                                     int threads = 1);

// n trials of the reverse (delayed-choice) order: sample a component,
// measure in product_basis(angles) with collapse, then measure the
// collapsed product state in `later`. Pass std::nullopt for "no later
// measurement at all".
std::vector<TrialRecord> run_reverse(const EnsembleSpec& input, ProductAngles angles,
                                     const std::optional<Basis4>& later,
                                     std::int64_t n, std::uint64_t seed,
                                     int settings_id = 0, int threads = 1);

// Partition of the records by later outcome; trial order is preserved and
// the buckets are disjoint and jointly exhaustive.
struct Subensembles {
    std::array<std::vector<TrialRecord>, 4> by_outcome;  // index A-1
    std::vector<TrialRecord> unmeasured;
};

Subensembles sort_subensembles(const std::vector<TrialRecord>& records);

// p_same = fraction with first_i == first_j; correlation = 2 p_same - 1;
// std_error = 2 sqrt(p (1-p) / n). Throws EmptySubensemble on no records.
EstimateReport estimate_correlation(const std::vector<TrialRecord>& records);

}  // namespace dce
