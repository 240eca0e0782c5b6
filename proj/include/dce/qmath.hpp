// Two-qubit amplitudes, pure states, measurement bases and their validity
// checks. Everything here is an immutable value; all operations are pure.

#pragma once

#include <array>
#include <complex>
#include <utility>

namespace dce {

using Amplitude = std::complex<double>;

// Tolerance for exact-arithmetic checks (normalization, orthonormality):
// ~1e4 x double epsilon, absorbing accumulation over 4-element sums.
inline constexpr double kAmpTol = 1e-12;

// Index convention, used everywhere including file formats: basis labels
// i, j in {1, 2} with 1 <-> V and 2 <-> H in the photon realization;
// flattened row-major as (i-1)*2 + (j-1).
constexpr int flat_index(int i, int j) { return (i - 1) * 2 + (j - 1); }
constexpr std::pair<int, int> basis_labels(int flat) {
    return {flat / 2 + 1, flat % 2 + 1};
}

// A two-qubit pure state: amplitudes over |VV>, |VH>, |HV>, |HH>.
// Valid states are normalized to within kAmpTol.
struct PureState4 {
    std::array<Amplitude, 4> amps{};
};

// An orthonormal 4-state measurement basis; row A holds the coefficients
// of basis state A over the product labels (i, j).
struct Basis4 {
    std::array<PureState4, 4> rows{};
};

// Analyzer angles in radians for the two observers' product measurement.
// Any finite value is accepted; outcome probabilities are pi-periodic per
// particle, so [0, pi) is the canonical reporting range.
struct ProductAngles {
    double theta = 0.0;
    double phi = 0.0;
};

double norm_squared(const PureState4& s);
bool is_normalized(const PureState4& s, double tol = kAmpTol);
bool is_finite(const PureState4& s);

// <a|b>, conjugate-linear in the first argument.
Amplitude inner_product(const PureState4& a, const PureState4& b);

// The four Bell states, rows fixed as B1(+), B2(-), B3(+), B4(-):
//   B1, B2 = sqrt(1/2) [|V1 V2> +- |H1 H2>]
//   B3, B4 = sqrt(1/2) [|V1 H2> +- |H1 V2>]
Basis4 bell_basis();

// Product basis of the theta- and phi-analyzer eigenstates. Rows are
// ordered (par,par), (par,perp), (perp,par), (perp,perp), where "par" is
// the cos|V> + sin|H> eigenstate along the analyzer and "perp" the
// orthogonal -sin|V> + cos|H> one. Throws std::invalid_argument on
// non-finite angles.
Basis4 product_basis(ProductAngles angles);

// Maximum absolute deviation over both unitarity conditions: row
// orthonormality (Gram = identity) and column completeness. Diagnostic
// only, never throws; callers treat residual <= kAmpTol as valid.
double verify_unitarity(const Basis4& basis) noexcept;

// Rows of `basis` re-expressed in the coordinates of the orthonormal
// `frame`: result row A at (i, j) is <frame_ij|basis_A>, so that
// basis_A = sum_ij result[A][ij] |frame_ij>. Preserves unitarity.
Basis4 express_in_frame(const Basis4& basis, const Basis4& frame);

// Reduce an angle to the canonical reporting range [0, pi).
double canonical_angle(double angle);

}  // namespace dce
