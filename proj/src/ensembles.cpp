#include "dce/ensembles.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace dce {

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, pattern, a, b);
    return buf;
}

}  // namespace

std::vector<std::string> validate(const EnsembleSpec& spec) {
    std::vector<std::string> violations;
    if (spec.components.empty()) {
        violations.emplace_back("ensemble has no components");
        return violations;
    }
    double total = 0.0;
    for (size_t k = 0; k < spec.components.size(); ++k) {
        const auto& c = spec.components[k];
        const int label = static_cast<int>(k) + 1;
        if (!std::isfinite(c.weight)) {
            violations.push_back("component " + std::to_string(label) +
                                 " weight is not finite");
            continue;
        }
        if (c.weight < 0.0)
            violations.push_back("component " + std::to_string(label) +
                                 fmt(" weight %g is negative", c.weight));
        total += c.weight;
        if (!is_finite(c.state)) {
            violations.push_back("component " + std::to_string(label) +
                                 " state has non-finite amplitude");
        } else if (std::abs(norm_squared(c.state) - 1.0) > kAmpTol) {
            violations.push_back("component " + std::to_string(label) +
                                 fmt(" state norm %g", std::sqrt(norm_squared(c.state))));
        }
    }
    if (std::isfinite(total) && std::abs(total - 1.0) > kWeightTol)
        violations.push_back(fmt("weights sum to %g", total));
    return violations;
}

std::vector<std::string> validate(const AlphaTable& alpha) {
    std::vector<std::string> violations;
    double total = 0.0;
    for (int flat = 0; flat < 4; ++flat) {
        const double a = alpha.alpha[flat];
        const auto [i, j] = basis_labels(flat);
        if (!std::isfinite(a)) {
            violations.push_back("alpha[i=" + std::to_string(i) + ",j=" +
                                 std::to_string(j) + "] is not finite");
            continue;
        }
        if (a < 0.0)
            violations.push_back("alpha[i=" + std::to_string(i) + ",j=" +
                                 std::to_string(j) + fmt("] is negative (%g)", a));
        total += a;
    }
    if (std::isfinite(total) && std::abs(total - 1.0) > kWeightTol)
        violations.push_back(fmt("alpha entries sum to %g", total));
    return violations;
}

EnsembleSpec uniform_bell_mixture() {
    const Basis4 bell = bell_basis();
    EnsembleSpec spec;
    spec.components.reserve(4);
    for (int a = 0; a < 4; ++a)
        spec.components.push_back({0.25, bell.rows[a]});
    return spec;
}

EnsembleSpec product_mixture(const AlphaTable& alpha, ProductAngles angles) {
    const auto violations = validate(alpha);
    if (!violations.empty())
        throw std::invalid_argument("product_mixture: " + violations.front());
    const Basis4 pb = product_basis(angles);
    EnsembleSpec spec;
    spec.components.reserve(4);
    for (int flat = 0; flat < 4; ++flat)
        spec.components.push_back({alpha.alpha[flat], pb.rows[flat]});
    return spec;
}

EnsembleSpec maximally_mixed_products() {
    return product_mixture(AlphaTable{{0.25, 0.25, 0.25, 0.25}}, ProductAngles{0.0, 0.0});
}

EnsembleSpec normalized(const EnsembleSpec& spec) {
    double total = 0.0;
    for (const auto& c : spec.components) total += c.weight;
    if (!(total > 0.0) || !std::isfinite(total))
        throw std::invalid_argument("normalized: total weight must be positive");
    EnsembleSpec out = spec;
    for (auto& c : out.components) c.weight /= total;
    return out;
}

}  // namespace dce
