#include "dce/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dce {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void require_outcome_index(int outcome_a, const char* where) {
    if (outcome_a < 1 || outcome_a > 4)
        throw std::invalid_argument(std::string(where) +
                                    ": later outcome index must be in 1..4");
}

}  // namespace

JointDistribution joint_distribution(const AlphaTable& alpha, const Basis4& entangled) {
    const auto alpha_violations = validate(alpha);
    if (!alpha_violations.empty())
        throw std::invalid_argument("joint_distribution: " + alpha_violations.front());
    const double residual = verify_unitarity(entangled);
    if (residual > kAmpTol)
        throw std::invalid_argument("joint_distribution: basis unitarity residual " +
                                    std::to_string(residual) + " exceeds tolerance");
    JointDistribution joint;
    for (int ij = 0; ij < 4; ++ij)
        for (int a = 0; a < 4; ++a)
            joint.p[ij][a] = alpha.alpha[ij] * std::norm(entangled.rows[a].amps[ij]);
    return joint;
}

std::array<double, 4> entangled_marginal(const JointDistribution& joint) {
    std::array<double, 4> marginal{};
    for (int a = 0; a < 4; ++a) {
        double sum = 0.0;
        for (int ij = 0; ij < 4; ++ij) sum += joint.p[ij][a];
        marginal[a] = clamp01(sum);
    }
    return marginal;
}

std::array<double, 4> retrospective_conditional(const JointDistribution& joint,
                                                int outcome_a) {
    require_outcome_index(outcome_a, "retrospective_conditional");
    const int a = outcome_a - 1;
    double sum = 0.0;
    for (int ij = 0; ij < 4; ++ij) sum += joint.p[ij][a];
    if (sum < kZeroMarginalTol)
        throw ZeroMarginal("retrospective_conditional: later outcome " +
                           std::to_string(outcome_a) + " has zero marginal probability");
    std::array<double, 4> conditional{};
    for (int ij = 0; ij < 4; ++ij) conditional[ij] = clamp01(joint.p[ij][a] / sum);
    return conditional;
}

AlphaTable induced_alpha(const EnsembleSpec& ensemble, ProductAngles angles) {
    const Basis4 pb = product_basis(angles);
    AlphaTable alpha;
    for (const auto& component : ensemble.components)
        for (int ij = 0; ij < 4; ++ij)
            alpha.alpha[ij] +=
                component.weight * std::norm(inner_product(pb.rows[ij], component.state));
    for (auto& a : alpha.alpha) a = clamp01(a);
    return alpha;
}

CorrelationReport outcome_correlation(const std::array<double, 4>& p_ij) {
    CorrelationReport report;
    report.p_same = clamp01(p_ij[flat_index(1, 1)] + p_ij[flat_index(2, 2)]);
    report.p_diff = clamp01(p_ij[flat_index(1, 2)] + p_ij[flat_index(2, 1)]);
    report.correlation = std::clamp(report.p_same - report.p_diff, -1.0, 1.0);
    return report;
}

CorrelationReport state_correlation(const PureState4& state, ProductAngles angles) {
    const Basis4 pb = product_basis(angles);
    std::array<double, 4> p{};
    for (int row = 0; row < 4; ++row)
        p[row] = std::norm(inner_product(pb.rows[row], state));
    return outcome_correlation(p);
}

CorrelationReport forward_correlation(int bell_index, ProductAngles angles) {
    require_outcome_index(bell_index, "forward_correlation");
    return state_correlation(bell_basis().rows[bell_index - 1], angles);
}

CorrelationReport whole_ensemble_correlation(const EnsembleSpec& ensemble,
                                             ProductAngles angles) {
    const Basis4 pb = product_basis(angles);
    std::array<double, 4> p{};
    for (const auto& component : ensemble.components)
        for (int row = 0; row < 4; ++row)
            p[row] +=
                component.weight * std::norm(inner_product(pb.rows[row], component.state));
    return outcome_correlation(p);
}

CorrelationReport retrospective_correlation(ProductAngles alpha_angles,
                                            const EnsembleSpec& input,
                                            const Basis4& entangled,
                                            int outcome_a) {
    require_outcome_index(outcome_a, "retrospective_correlation");
    const AlphaTable alpha = induced_alpha(input, alpha_angles);
    // Coefficients a_Aij of the later basis over the earlier outcomes.
    const Basis4 local = express_in_frame(entangled, product_basis(alpha_angles));
    const JointDistribution joint = joint_distribution(alpha, local);
    return outcome_correlation(retrospective_conditional(joint, outcome_a));
}

ChshReport chsh(const ChshSettings& settings, const CorrelationSource& source) {
    ChshReport report;
    report.settings = {ProductAngles{settings.a, settings.b},
                       ProductAngles{settings.a, settings.b_prime},
                       ProductAngles{settings.a_prime, settings.b},
                       ProductAngles{settings.a_prime, settings.b_prime}};
    for (int k = 0; k < 4; ++k)
        report.correlations[k] = source(report.settings[k].theta, report.settings[k].phi);
    report.s_value = report.correlations[0] - report.correlations[1] +
                     report.correlations[2] + report.correlations[3];
    return report;
}

std::array<double, 2> observer1_marginal(const EnsembleSpec& ensemble,
                                         double theta, double phi) {
    const Basis4 pb = product_basis(ProductAngles{theta, phi});
    double par = 0.0, perp = 0.0;
    for (const auto& component : ensemble.components) {
        // Rows 0, 1 share particle 1's "par" factor; rows 2, 3 the "perp" one.
        par += component.weight *
               (std::norm(inner_product(pb.rows[0], component.state)) +
                std::norm(inner_product(pb.rows[1], component.state)));
        perp += component.weight *
                (std::norm(inner_product(pb.rows[2], component.state)) +
                 std::norm(inner_product(pb.rows[3], component.state)));
    }
    return {clamp01(par), clamp01(perp)};
}

double no_signaling_check(const EnsembleSpec& ensemble, double theta,
                          double phi_a, double phi_b) {
    const auto at_a = observer1_marginal(ensemble, theta, phi_a);
    const auto at_b = observer1_marginal(ensemble, theta, phi_b);
    return std::max(std::abs(at_a[0] - at_b[0]), std::abs(at_a[1] - at_b[1]));
}

}  // namespace dce
