#include "dce/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <thread>

namespace dce {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

// SplitMix64 finalizer (Steele/Lea/Flood; Vigna's constants).
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : key_(mix64(mix64(seed ^ 0x5851f42d4c957f2dull) + (stream_id + 1) * kGamma)) {}

std::uint64_t RngStream::next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
}

double RngStream::next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t trial_stream(int settings_id, std::int64_t trial_id) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(settings_id)) << 40) +
           static_cast<std::uint64_t>(trial_id);
}

std::pair<int, PureState4> sample_component(const EnsembleSpec& ensemble,
                                            RngStream& rng) {
    const double u = rng.next_uniform();
    const int last = static_cast<int>(ensemble.components.size()) - 1;
    double cum = 0.0;
    for (int k = 0; k < last; ++k) {
        cum += ensemble.components[k].weight;
        if (u < cum) return {k, ensemble.components[k].state};
    }
    return {last, ensemble.components[last].state};  // final interval closed
}

namespace {

// Born sampling without input validation; run_* validate once per run.
std::pair<int, PureState4> measure_unchecked(const PureState4& state,
                                             const Basis4& basis, RngStream& rng) {
    std::array<double, 4> p{};
    for (int row = 0; row < 4; ++row)
        p[row] = std::norm(inner_product(basis.rows[row], state));
    const double u = rng.next_uniform();
    double cum = 0.0;
    for (int row = 0; row < 3; ++row) {
        cum += p[row];
        if (u < cum) return {row, basis.rows[row]};
    }
    return {3, basis.rows[3]};
}

void check_run_inputs(const EnsembleSpec& ensemble, std::int64_t n, const char* where) {
    if (n < 1)
        throw std::invalid_argument(std::string(where) + ": trial count must be >= 1");
    const auto violations = validate(ensemble);
    if (!violations.empty())
        throw std::invalid_argument(std::string(where) + ": " + violations.front());
}

// Run work(lo, hi) over [0, n) split across `threads` workers. Each trial
// writes only its own record slot, so the partitioning cannot change the
// result.
void run_partitioned(std::int64_t n, int threads,
                     const std::function<void(std::int64_t, std::int64_t)>& work) {
    const std::int64_t workers =
        std::max<std::int64_t>(1, std::min<std::int64_t>(threads, n));
    if (workers == 1) {
        work(0, n);
        return;
    }
    const std::int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (std::int64_t w = 0; w < workers; ++w) {
        const std::int64_t lo = w * chunk;
        const std::int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(work, lo, hi);
    }
    for (auto& t : pool) t.join();
}

}  // namespace

std::pair<int, PureState4> measure(const PureState4& state, const Basis4& basis,
                                   RngStream& rng) {
    if (!is_normalized(state))
        throw std::invalid_argument("measure: state is not normalized");
    if (verify_unitarity(basis) > kAmpTol)
        throw std::invalid_argument("measure: basis is not unitary");
    return measure_unchecked(state, basis, rng);
}

std::vector<TrialRecord> run_forward(const EnsembleSpec& ensemble,
                                     ProductAngles angles, std::int64_t n,
                                     std::uint64_t seed, int settings_id,
                                     int threads) {
    check_run_inputs(ensemble, n, "run_forward");
    const Basis4 pb = product_basis(angles);
    std::vector<TrialRecord> records(static_cast<size_t>(n));
    run_partitioned(n, threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t t = lo; t < hi; ++t) {
            RngStream rng(seed, trial_stream(settings_id, t));
            const auto [component, state] = sample_component(ensemble, rng);
            const auto [row, post] = measure_unchecked(state, pb, rng);
            (void)post;
            const auto [i, j] = basis_labels(row);
            records[static_cast<size_t>(t)] =
                TrialRecord{t, component, i, j, std::nullopt, settings_id};
        }
    });
    return records;
}

std::vector<TrialRecord> run_reverse(const EnsembleSpec& input, ProductAngles angles,
                                     const std::optional<Basis4>& later,
                                     std::int64_t n, std::uint64_t seed,
                                     int settings_id, int threads) {
    check_run_inputs(input, n, "run_reverse");
    if (later && verify_unitarity(*later) > kAmpTol)
        throw std::invalid_argument("run_reverse: later basis is not unitary");
    const Basis4 pb = product_basis(angles);
    std::vector<TrialRecord> records(static_cast<size_t>(n));
    run_partitioned(n, threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t t = lo; t < hi; ++t) {
            RngStream rng(seed, trial_stream(settings_id, t));
            const auto [component, state] = sample_component(input, rng);
            const auto [row, post] = measure_unchecked(state, pb, rng);
            std::optional<int> outcome_a;
            if (later) {
                const auto [a, final_state] = measure_unchecked(post, *later, rng);
                (void)final_state;
                outcome_a = a + 1;
            }
            const auto [i, j] = basis_labels(row);
            records[static_cast<size_t>(t)] =
                TrialRecord{t, component, i, j, outcome_a, settings_id};
        }
    });
    return records;
}

Subensembles sort_subensembles(const std::vector<TrialRecord>& records) {
    Subensembles buckets;
    for (const auto& record : records) {
        if (record.later_outcome)
            buckets.by_outcome[static_cast<size_t>(*record.later_outcome - 1)]
                .push_back(record);
        else
            buckets.unmeasured.push_back(record);
    }
    return buckets;
}

EstimateReport estimate_correlation(const std::vector<TrialRecord>& records) {
    if (records.empty())
        throw EmptySubensemble(
            "estimate_correlation: no records (conditioning on an unobserved outcome)");
    std::int64_t same = 0;
    for (const auto& record : records)
        if (record.first_i == record.first_j) ++same;
    const auto n = static_cast<std::int64_t>(records.size());
    EstimateReport report;
    report.n = n;
    report.p_same = static_cast<double>(same) / static_cast<double>(n);
    report.correlation = 2.0 * report.p_same - 1.0;
    report.std_error =
        2.0 * std::sqrt(report.p_same * (1.0 - report.p_same) / static_cast<double>(n));
    return report;
}

}  // namespace dce
