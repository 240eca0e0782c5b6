#include "dce/oracle.hpp"

#include <cmath>
#include <map>

namespace dce::oracle {

namespace {

using Row = std::array<Amplitude, 4>;

// The oracle builds the product rows and transition probabilities itself
// rather than calling into qmath.
std::array<Row, 4> oracle_product_rows(ProductAngles angles) {
    const double ct = std::cos(angles.theta), st = std::sin(angles.theta);
    const double cp = std::cos(angles.phi), sp = std::sin(angles.phi);
    const double one[2][2] = {{ct, st}, {-st, ct}};
    const double two[2][2] = {{cp, sp}, {-sp, cp}};
    std::array<Row, 4> rows{};
    for (int u = 0; u < 2; ++u)
        for (int v = 0; v < 2; ++v)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    rows[u * 2 + v][i * 2 + j] = one[u][i] * two[v][j];
    return rows;
}

double transition_probability(const Row& from, const Row& to) {
    Amplitude overlap{0.0, 0.0};
    for (int k = 0; k < 4; ++k) overlap += std::conj(from[k]) * to[k];
    return std::norm(overlap);
}

}  // namespace

PathDistribution enumerate_paths(const EnsembleSpec& input, ProductAngles angles,
                                 const Basis4& later) {
    const auto rows = oracle_product_rows(angles);
    PathDistribution paths;
    paths.entries.reserve(input.components.size() * 16);
    for (size_t k = 0; k < input.components.size(); ++k) {
        const auto& component = input.components[k];
        for (int ij = 0; ij < 4; ++ij) {
            const double p_first = transition_probability(rows[ij], component.state.amps);
            for (int a = 0; a < 4; ++a) {
                const double p_later =
                    transition_probability(later.rows[a].amps, rows[ij]);
                paths.entries.push_back(PathEntry{static_cast<int>(k), ij, a,
                                                  component.weight * p_first * p_later});
            }
        }
    }
    return paths;
}

PathDistribution marginalize(const PathDistribution& paths, Keep keep) {
    std::map<std::array<int, 3>, double> sums;
    for (const auto& entry : paths.entries) {
        const std::array<int, 3> key{keep.component ? entry.component : -1,
                                     keep.first ? entry.first : -1,
                                     keep.later ? entry.later : -1};
        sums[key] += entry.probability;
    }
    PathDistribution out;
    out.entries.reserve(sums.size());
    for (const auto& [key, probability] : sums)
        out.entries.push_back(PathEntry{key[0], key[1], key[2], probability});
    return out;
}

double total_probability(const PathDistribution& paths) {
    double total = 0.0;
    for (const auto& entry : paths.entries) total += entry.probability;
    return total;
}

std::array<std::array<double, 4>, 4> first_later_table(const PathDistribution& paths) {
    std::array<std::array<double, 4>, 4> table{};
    for (const auto& entry : paths.entries)
        if (entry.first >= 0 && entry.later >= 0)
            table[static_cast<size_t>(entry.first)][static_cast<size_t>(entry.later)] +=
                entry.probability;
    return table;
}

}  // namespace dce::oracle
