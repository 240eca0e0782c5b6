#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dce/analytics.hpp"
#include "dce/montecarlo.hpp"
#include "support.hpp"

using namespace dce;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("RngStream determinism and stream separation") {
    RngStream a(123, 7), b(123, 7), c(123, 8), d(124, 7);
    bool all_equal = true, differs_stream = false, differs_seed = false;
    for (int k = 0; k < 100; ++k) {
        const std::uint64_t va = a.next_u64();
        all_equal = all_equal && (va == b.next_u64());
        differs_stream = differs_stream || (va != c.next_u64());
        differs_seed = differs_seed || (va != d.next_u64());
    }
    CHECK(all_equal);
    CHECK(differs_stream);
    CHECK(differs_seed);
}

TEST_CASE("RngStream uniforms live in [0, 1) with sane mean") {
    RngStream rng(99, 0);
    double sum = 0.0;
    const int n = 20000;
    for (int k = 0; k < n; ++k) {
        const double u = rng.next_uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    // 6 sigma of a mean of n uniforms.
    CHECK(std::abs(sum / n - 0.5) < 6.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("sample_component") {
    SUBCASE("degenerate ensemble always picks index 0") {
        EnsembleSpec single;
        single.components.push_back({1.0, bell_basis().rows[0]});
        RngStream rng(5, 0);
        for (int k = 0; k < 32; ++k)
            CHECK(sample_component(single, rng).first == 0);
    }
    SUBCASE("uniform Bell frequencies within 4 sigma at 1e5 draws") {
        const EnsembleSpec mixture = uniform_bell_mixture();
        const int n = 100000;
        std::array<int, 4> counts{};
        for (int t = 0; t < n; ++t) {
            RngStream rng(2718, static_cast<std::uint64_t>(t));
            ++counts[static_cast<size_t>(sample_component(mixture, rng).first)];
        }
        const double sigma = std::sqrt(0.25 * 0.75 / n);
        for (int k = 0; k < 4; ++k)
            CHECK(std::abs(counts[static_cast<size_t>(k)] / double(n) - 0.25) <
                  4.0 * sigma);
    }
    SUBCASE("identical (seed, stream) repeats the draw") {
        const EnsembleSpec mixture = uniform_bell_mixture();
        for (int t = 0; t < 50; ++t) {
            RngStream r1(9, static_cast<std::uint64_t>(t));
            RngStream r2(9, static_cast<std::uint64_t>(t));
            CHECK(sample_component(mixture, r1).first ==
                  sample_component(mixture, r2).first);
        }
    }
}

TEST_CASE("measure") {
    SUBCASE("a basis state measured in its own basis is certain") {
        const PureState4 vv{{1.0, 0.0, 0.0, 0.0}};
        const Basis4 computational = product_basis({0.0, 0.0});
        for (int t = 0; t < 20; ++t) {
            RngStream rng(1, static_cast<std::uint64_t>(t));
            const auto [row, post] = measure(vv, computational, rng);
            CHECK(row == 0);
            CHECK(std::abs(post.amps[0] - Amplitude{1.0, 0.0}) < 1e-15);
        }
    }
    SUBCASE("B1 at equal angles never yields mixed outcomes") {
        const PureState4 b1 = bell_basis().rows[0];
        const Basis4 pb = product_basis({0.0, 0.0});
        int same[2] = {0, 0};
        const int n = 4000;
        for (int t = 0; t < n; ++t) {
            RngStream rng(77, static_cast<std::uint64_t>(t));
            const int row = measure(b1, pb, rng).first;
            CHECK((row == 0 || row == 3));
            ++same[row == 0 ? 0 : 1];
        }
        const double sigma = std::sqrt(0.25 / n);
        CHECK(std::abs(same[0] / double(n) - 0.5) < 4.0 * sigma);
    }
    SUBCASE("|VV> in the Bell basis splits between B1 and B2") {
        const PureState4 vv{{1.0, 0.0, 0.0, 0.0}};
        const Basis4 bell = bell_basis();
        int first = 0;
        const int n = 4000;
        for (int t = 0; t < n; ++t) {
            RngStream rng(78, static_cast<std::uint64_t>(t));
            const int row = measure(vv, bell, rng).first;
            CHECK((row == 0 || row == 1));
            if (row == 0) ++first;
        }
        CHECK(std::abs(first / double(n) - 0.5) < 4.0 * std::sqrt(0.25 / n));
    }
    SUBCASE("collapse lands on the measured basis row") {
        RngStream rng(79, 0);
        const Basis4 basis = testsupport::random_unitary_basis(rng);
        const PureState4 state = testsupport::random_state(rng);
        const auto [row, post] = measure(state, basis, rng);
        for (int k = 0; k < 4; ++k)
            CHECK(std::abs(post.amps[k] - basis.rows[static_cast<size_t>(row)].amps[k]) <
                  1e-15);
    }
    SUBCASE("invalid inputs are rejected") {
        RngStream rng(80, 0);
        const PureState4 unnormalized{{0.5, 0.0, 0.0, 0.0}};
        CHECK_THROWS_AS(measure(unnormalized, bell_basis(), rng), std::invalid_argument);
        Basis4 bad = bell_basis();
        for (auto& amp : bad.rows[2].amps) amp *= 0.9;
        const PureState4 vv{{1.0, 0.0, 0.0, 0.0}};
        CHECK_THROWS_AS(measure(vv, bad, rng), std::invalid_argument);
    }
}

TEST_CASE("run_forward") {
    const EnsembleSpec mixture = uniform_bell_mixture();
    SUBCASE("n = 1 yields one valid record") {
        const auto records = run_forward(mixture, {0.4, 0.1}, 1, 5);
        REQUIRE(records.size() == 1);
        CHECK(records[0].trial_id == 0);
        CHECK((records[0].first_i == 1 || records[0].first_i == 2));
        CHECK((records[0].first_j == 1 || records[0].first_j == 2));
        CHECK(!records[0].later_outcome.has_value());
    }
    SUBCASE("grouping by preparation recovers the Bell correlation; ungrouped is null") {
        const std::int64_t n = 100000;
        const auto records = run_forward(mixture, {kPi / 6.0, 0.0}, n, 21);
        std::vector<TrialRecord> b1_group;
        for (const auto& record : records)
            if (record.component_index == 0) b1_group.push_back(record);
        const EstimateReport grouped = estimate_correlation(b1_group);
        CHECK(std::abs(grouped.correlation - 0.5) < 4.0 * grouped.std_error);
        const EstimateReport ungrouped = estimate_correlation(records);
        CHECK(std::abs(ungrouped.correlation) < 4.0 * ungrouped.std_error);
    }
    SUBCASE("invalid trial count is rejected") {
        CHECK_THROWS_AS(run_forward(mixture, {0.0, 0.0}, 0, 1), std::invalid_argument);
    }
}

TEST_CASE("run_reverse") {
    const EnsembleSpec mixed = maximally_mixed_products();
    SUBCASE("the A=1 subensemble recovers the Bell correlation") {
        const std::int64_t n = 100000;
        const auto records = run_reverse(mixed, {kPi / 6.0, 0.0}, bell_basis(), n, 33);
        const Subensembles buckets = sort_subensembles(records);
        const EstimateReport estimate = estimate_correlation(buckets.by_outcome[0]);
        CHECK(std::abs(estimate.correlation - 0.5) < 4.0 * estimate.std_error);
        const EstimateReport ungrouped = estimate_correlation(records);
        CHECK(std::abs(ungrouped.correlation) < 4.0 * ungrouped.std_error);
    }
    SUBCASE("skip leaves every later outcome absent") {
        const auto records = run_reverse(mixed, {0.3, 0.1}, std::nullopt, 1000, 7);
        for (const auto& record : records) CHECK(!record.later_outcome.has_value());
    }
    SUBCASE("the later choice cannot alter first outcomes drawn from the same seed") {
        const auto with_bell = run_reverse(mixed, {0.9, 0.2}, bell_basis(), 2000, 99);
        const auto with_skip = run_reverse(mixed, {0.9, 0.2}, std::nullopt, 2000, 99);
        REQUIRE(with_bell.size() == with_skip.size());
        for (size_t k = 0; k < with_bell.size(); ++k) {
            CHECK(with_bell[k].first_i == with_skip[k].first_i);
            CHECK(with_bell[k].first_j == with_skip[k].first_j);
        }
    }
    SUBCASE("skip vs bell first-outcome marginals agree statistically across seeds") {
        const std::int64_t n = 20000;
        const auto with_bell = run_reverse(mixed, {0.7, 0.2}, bell_basis(), n, 1001);
        const auto with_skip = run_reverse(mixed, {0.7, 0.2}, std::nullopt, n, 2002);
        std::array<double, 4> f_bell{}, f_skip{};
        for (const auto& r : with_bell)
            f_bell[static_cast<size_t>(flat_index(r.first_i, r.first_j))] += 1.0 / n;
        for (const auto& r : with_skip)
            f_skip[static_cast<size_t>(flat_index(r.first_i, r.first_j))] += 1.0 / n;
        for (int k = 0; k < 4; ++k) {
            const double pooled = 0.5 * (f_bell[static_cast<size_t>(k)] +
                                         f_skip[static_cast<size_t>(k)]);
            const double sigma = std::sqrt(2.0 * pooled * (1.0 - pooled) / n);
            CHECK(std::abs(f_bell[static_cast<size_t>(k)] -
                           f_skip[static_cast<size_t>(k)]) < 4.0 * sigma);
        }
    }
}

TEST_CASE("sort_subensembles") {
    SUBCASE("example partition") {
        std::vector<TrialRecord> records;
        records.push_back({0, 0, 1, 1, 1, 0});
        records.push_back({1, 0, 1, 2, 2, 0});
        records.push_back({2, 0, 2, 2, 1, 0});
        records.push_back({3, 0, 2, 1, std::nullopt, 0});
        const Subensembles buckets = sort_subensembles(records);
        REQUIRE(buckets.by_outcome[0].size() == 2);
        CHECK(buckets.by_outcome[0][0].trial_id == 0);
        CHECK(buckets.by_outcome[0][1].trial_id == 2);
        REQUIRE(buckets.by_outcome[1].size() == 1);
        CHECK(buckets.by_outcome[1][0].trial_id == 1);
        CHECK(buckets.by_outcome[2].empty());
        CHECK(buckets.by_outcome[3].empty());
        REQUIRE(buckets.unmeasured.size() == 1);
        CHECK(buckets.unmeasured[0].trial_id == 3);
    }
    SUBCASE("empty input gives empty buckets") {
        const Subensembles buckets = sort_subensembles({});
        for (const auto& bucket : buckets.by_outcome) CHECK(bucket.empty());
        CHECK(buckets.unmeasured.empty());
    }
    SUBCASE("buckets partition a big reverse run with quarter weights") {
        const std::int64_t n = 100000;
        const auto records =
            run_reverse(maximally_mixed_products(), {0.3, 1.0}, bell_basis(), n, 4);
        const Subensembles buckets = sort_subensembles(records);
        size_t total = buckets.unmeasured.size();
        const double sigma = std::sqrt(0.25 * 0.75 / n);
        for (const auto& bucket : buckets.by_outcome) {
            total += bucket.size();
            CHECK(std::abs(bucket.size() / double(n) - 0.25) < 4.0 * sigma);
        }
        CHECK(total == records.size());
    }
}

TEST_CASE("estimate_correlation") {
    SUBCASE("all-same records") {
        std::vector<TrialRecord> records(10, TrialRecord{0, 0, 1, 1, std::nullopt, 0});
        const EstimateReport report = estimate_correlation(records);
        CHECK(report.p_same == doctest::Approx(1.0));
        CHECK(report.correlation == doctest::Approx(1.0));
        CHECK(report.std_error == doctest::Approx(0.0));
    }
    SUBCASE("an even same/diff split is null") {
        std::vector<TrialRecord> records;
        for (int k = 0; k < 10; ++k)
            records.push_back({k, 0, 1, k % 2 == 0 ? 1 : 2, std::nullopt, 0});
        const EstimateReport report = estimate_correlation(records);
        CHECK(report.correlation == doctest::Approx(0.0));
        CHECK(report.std_error ==
              doctest::Approx(2.0 * std::sqrt(0.25 / 10.0)).epsilon(1e-12));
    }
    SUBCASE("empty input throws") {
        CHECK_THROWS_AS(estimate_correlation({}), EmptySubensemble);
    }
}

TEST_CASE("determinism: records are identical across reruns and thread counts") {
    const EnsembleSpec mixed = maximally_mixed_products();
    const auto reference = run_reverse(mixed, {0.6, 0.15}, bell_basis(), 5000, 12345, 3, 1);
    const auto rerun = run_reverse(mixed, {0.6, 0.15}, bell_basis(), 5000, 12345, 3, 1);
    const auto threaded = run_reverse(mixed, {0.6, 0.15}, bell_basis(), 5000, 12345, 3, 4);
    REQUIRE(reference.size() == rerun.size());
    REQUIRE(reference.size() == threaded.size());
    for (size_t k = 0; k < reference.size(); ++k) {
        CHECK(reference[k].trial_id == rerun[k].trial_id);
        CHECK(reference[k].first_i == rerun[k].first_i);
        CHECK(reference[k].first_j == rerun[k].first_j);
        CHECK(reference[k].later_outcome == rerun[k].later_outcome);
        CHECK(reference[k].component_index == rerun[k].component_index);
        CHECK(reference[k].first_i == threaded[k].first_i);
        CHECK(reference[k].first_j == threaded[k].first_j);
        CHECK(reference[k].later_outcome == threaded[k].later_outcome);
        CHECK(reference[k].component_index == threaded[k].component_index);
    }
}

TEST_CASE("MC estimates converge to the exact values across seeds") {
    // 100 independent seeds at n = 1e4; at least 99 must land within 4 sigma.
    const std::int64_t n = 10000;
    SUBCASE("forward, whole ensemble") {
        const EnsembleSpec mixture = uniform_bell_mixture();
        const ProductAngles angles{kPi / 6.0, 0.0};
        const double exact =
            whole_ensemble_correlation(mixture, angles).correlation;
        int hits = 0;
        for (int seed = 0; seed < 100; ++seed) {
            const auto records =
                run_forward(mixture, angles, n, static_cast<std::uint64_t>(seed));
            const EstimateReport estimate = estimate_correlation(records);
            if (std::abs(estimate.correlation - exact) <= 4.0 * estimate.std_error)
                ++hits;
        }
        CHECK(hits >= 99);
    }
    SUBCASE("reverse, conditioned on A=1") {
        const EnsembleSpec mixed = maximally_mixed_products();
        const ProductAngles angles{kPi / 6.0, 0.0};
        const double exact =
            retrospective_correlation(angles, mixed, bell_basis(), 1).correlation;
        int hits = 0;
        for (int seed = 100; seed < 200; ++seed) {
            const auto records = run_reverse(mixed, angles, bell_basis(), n,
                                             static_cast<std::uint64_t>(seed));
            const EstimateReport estimate =
                estimate_correlation(sort_subensembles(records).by_outcome[0]);
            if (std::abs(estimate.correlation - exact) <= 4.0 * estimate.std_error)
                ++hits;
        }
        CHECK(hits >= 99);
    }
}
