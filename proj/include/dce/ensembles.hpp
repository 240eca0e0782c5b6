// Declarative mixtures of particle-pair states: the Bell mixture of the
// forward experiment and the product mixtures of the reverse one.

#pragma once

#include <string>
#include <vector>

#include "dce/qmath.hpp"

namespace dce {

// Weight-sum tolerance; looser than kAmpTol because config files carry
// decimal-rounded weights.
inline constexpr double kWeightTol = 1e-9;

struct EnsembleComponent {
    double weight = 0.0;
    PureState4 state;
};

// A finite weighted mixture of two-qubit pure states. Component identity
// is kept explicit so trial records can be grouped by preparation later;
// this is deliberately not a density matrix.
struct EnsembleSpec {
    std::vector<EnsembleComponent> components;
};

// Relative frequencies alpha_ij of the four product outcomes, flattened
// with the shared (i, j) index convention.
struct AlphaTable {
    std::array<double, 4> alpha{};
};

// Empty iff all invariants hold; each violation names the failed invariant
// and the offending component (1-based).
std::vector<std::string> validate(const EnsembleSpec& spec);
std::vector<std::string> validate(const AlphaTable& alpha);

// The four Bell states with weight 1/4 each.
EnsembleSpec uniform_bell_mixture();

// Mixture of the product_basis(angles) rows with weights alpha_ij.
// Throws std::invalid_argument when alpha is invalid.
EnsembleSpec product_mixture(const AlphaTable& alpha, ProductAngles angles);

// Uniform mixture of the four computational product states. Every
// product-basis measurement of it yields alpha_ij = 1/4, at any angles.
EnsembleSpec maximally_mixed_products();

// Copy of `spec` with weights rescaled to sum to 1. Throws when the total
// weight is not positive. Opt-in: constructors and validators reject
// non-normalized weights rather than silently rescaling.
EnsembleSpec normalized(const EnsembleSpec& spec);

}  // namespace dce
