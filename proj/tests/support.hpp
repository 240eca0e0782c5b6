// Deterministic random generators for property tests: states, alpha tables,
// ensembles, and unitary bases via Gram-Schmidt on random complex matrices.

#pragma once

#include <cmath>
#include <numbers>

#include "dce/ensembles.hpp"
#include "dce/montecarlo.hpp"
#include "dce/qmath.hpp"

namespace dce::testsupport {

inline double uniform_in(RngStream& rng, double lo, double hi) {
    return lo + (hi - lo) * rng.next_uniform();
}

// Box-Muller; next_uniform() < 1 keeps the log argument positive.
inline double standard_normal(RngStream& rng) {
    const double u1 = rng.next_uniform();
    const double u2 = rng.next_uniform();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

inline ProductAngles random_angles(RngStream& rng) {
    return ProductAngles{uniform_in(rng, -std::numbers::pi, 2.0 * std::numbers::pi),
                         uniform_in(rng, -std::numbers::pi, 2.0 * std::numbers::pi)};
}

inline PureState4 random_state(RngStream& rng) {
    PureState4 state;
    double norm2 = 0.0;
    for (auto& amp : state.amps) {
        amp = Amplitude{standard_normal(rng), standard_normal(rng)};
        norm2 += std::norm(amp);
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& amp : state.amps) amp *= inv;
    return state;
}

inline AlphaTable random_alpha(RngStream& rng) {
    AlphaTable alpha;
    double total = 0.0;
    for (auto& a : alpha.alpha) {
        a = rng.next_uniform() + 1e-6;
        total += a;
    }
    for (auto& a : alpha.alpha) a /= total;
    return alpha;
}

inline EnsembleSpec random_ensemble(RngStream& rng, int max_components = 4) {
    const int count = 1 + static_cast<int>(rng.next_uniform() * max_components);
    EnsembleSpec spec;
    double total = 0.0;
    for (int k = 0; k < count; ++k) {
        const double w = rng.next_uniform() + 1e-6;
        spec.components.push_back({w, random_state(rng)});
        total += w;
    }
    for (auto& component : spec.components) component.weight /= total;
    return spec;
}

// Orthonormalize four random complex vectors (modified Gram-Schmidt, two
// passes); the result passes verify_unitarity at working precision.
inline Basis4 random_unitary_basis(RngStream& rng) {
    Basis4 basis;
    for (int a = 0; a < 4; ++a) {
        PureState4 v = random_state(rng);
        for (int pass = 0; pass < 2; ++pass) {
            for (int b = 0; b < a; ++b) {
                const Amplitude overlap = inner_product(basis.rows[b], v);
                for (int k = 0; k < 4; ++k)
                    v.amps[k] -= overlap * basis.rows[b].amps[k];
            }
        }
        const double norm2 = norm_squared(v);
        if (norm2 < 1e-12) return random_unitary_basis(rng);  // retry, degenerate draw
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& amp : v.amps) amp *= inv;
        basis.rows[a] = v;
    }
    return basis;
}

}  // namespace dce::testsupport
