// Brute-force enumerator of the exact joint distribution over (ensemble
// component, first product outcome, later outcome). Used to cross-validate
// the analytics and Monte Carlo paths, so it keeps its own arithmetic:
// clarity over speed, and no shared Born-rule helpers that could let a bug
// confirm itself.

#pragma once

#include <array>
#include <vector>

#include "dce/ensembles.hpp"
#include "dce/qmath.hpp"

namespace dce::oracle {

// One Born-rule path with its exhaustively multiplied probability:
// weight_k * |<row_ij|psi_k>|^2 * |<B_A|row_ij>|^2. Indices are 0-based
// flat; a dropped variable reads -1 after marginalization.
struct PathEntry {
    int component = -1;
    int first = -1;
    int later = -1;
    double probability = 0.0;
};

struct PathDistribution {
    std::vector<PathEntry> entries;
};

PathDistribution enumerate_paths(const EnsembleSpec& input, ProductAngles angles,
                                 const Basis4& later);

struct Keep {
    bool component = false;
    bool first = false;
    bool later = false;
};

// Sum probabilities over the dropped variables; entries come back sorted
// by the kept keys and the result still sums to 1.
PathDistribution marginalize(const PathDistribution& paths, Keep keep);

double total_probability(const PathDistribution& paths);

// 4x4 (first, later) table, the shape analytics.joint_distribution uses.
std::array<std::array<double, 4>, 4> first_later_table(const PathDistribution& paths);

}  // namespace dce::oracle
