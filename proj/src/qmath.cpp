#include "dce/qmath.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace dce {

double norm_squared(const PureState4& s) {
    double total = 0.0;
    for (const auto& a : s.amps) total += std::norm(a);
    return total;
}

bool is_normalized(const PureState4& s, double tol) {
    return is_finite(s) && std::abs(norm_squared(s) - 1.0) <= tol;
}

bool is_finite(const PureState4& s) {
    for (const auto& a : s.amps)
        if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) return false;
    return true;
}

Amplitude inner_product(const PureState4& a, const PureState4& b) {
    Amplitude acc{0.0, 0.0};
    for (int k = 0; k < 4; ++k) acc += std::conj(a.amps[k]) * b.amps[k];
    return acc;
}

Basis4 bell_basis() {
    const double r = std::sqrt(0.5);
    Basis4 b;
    b.rows[0].amps = {r, 0.0, 0.0, r};   // B1 = (|VV> + |HH>)/sqrt2
    b.rows[1].amps = {r, 0.0, 0.0, -r};  // B2 = (|VV> - |HH>)/sqrt2
    b.rows[2].amps = {0.0, r, r, 0.0};   // B3 = (|VH> + |HV>)/sqrt2
    b.rows[3].amps = {0.0, r, -r, 0.0};  // B4 = (|VH> - |HV>)/sqrt2
    return b;
}

Basis4 product_basis(ProductAngles angles) {
    if (!std::isfinite(angles.theta) || !std::isfinite(angles.phi))
        throw std::invalid_argument("product_basis: angles must be finite");
    const double ct = std::cos(angles.theta), st = std::sin(angles.theta);
    const double cp = std::cos(angles.phi), sp = std::sin(angles.phi);
    // Single-particle eigenstates over (V, H): row 0 = par, row 1 = perp.
    const double one[2][2] = {{ct, st}, {-st, ct}};
    const double two[2][2] = {{cp, sp}, {-sp, cp}};
    Basis4 b;
    for (int u = 0; u < 2; ++u)
        for (int v = 0; v < 2; ++v) {
            PureState4& row = b.rows[u * 2 + v];
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    row.amps[i * 2 + j] = one[u][i] * two[v][j];
        }
    return b;
}

double verify_unitarity(const Basis4& basis) noexcept {
    double worst = 0.0;
    // Row orthonormality: <row_A|row_B> = delta_AB.
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            Amplitude g = inner_product(basis.rows[a], basis.rows[b]);
            g -= (a == b) ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(g));
        }
    // Column completeness: sum_A conj(a_A,ij) a_A,rs = delta_ir delta_js.
    for (int ij = 0; ij < 4; ++ij)
        for (int rs = 0; rs < 4; ++rs) {
            Amplitude g{0.0, 0.0};
            for (int a = 0; a < 4; ++a)
                g += std::conj(basis.rows[a].amps[ij]) * basis.rows[a].amps[rs];
            g -= (ij == rs) ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(g));
        }
    if (!std::isfinite(worst)) return std::numeric_limits<double>::infinity();
    return worst;
}

Basis4 express_in_frame(const Basis4& basis, const Basis4& frame) {
    Basis4 out;
    for (int a = 0; a < 4; ++a)
        for (int ij = 0; ij < 4; ++ij)
            out.rows[a].amps[ij] = inner_product(frame.rows[ij], basis.rows[a]);
    return out;
}

double canonical_angle(double angle) {
    const double pi = std::numbers::pi;
    double r = std::fmod(angle, pi);
    if (r < 0.0) r += pi;
    return r;
}

}  // namespace dce
