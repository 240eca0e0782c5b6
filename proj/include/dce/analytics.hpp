// Exact closed-form evaluation of the experiment's probabilities and
// correlations: the forward protocol (entangle first, measure in a product
// basis), the reverse delayed-choice protocol (product measurement first,
// entangling measurement later, retrospective conditioning), CHSH values
// and no-signaling marginals.

#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <string>

#include "dce/ensembles.hpp"
#include "dce/qmath.hpp"

namespace dce {

// Marginals below this are treated as zero: dividing by round-off noise
// when conditioning produces garbage.
inline constexpr double kZeroMarginalTol = 1e-14;

// Thrown when conditioning on a later outcome whose marginal probability
// is zero; callers must not silently substitute a uniform distribution.
struct ZeroMarginal : std::runtime_error {
    explicit ZeroMarginal(const std::string& what) : std::runtime_error(what) {}
};

// Joint table over (earlier product outcome ij) x (later entangled
// outcome A): p[ij][A] = alpha_ij * |a_Aij|^2.
struct JointDistribution {
    std::array<std::array<double, 4>, 4> p{};
};

// Same/different statistics of the two observers' binary outcomes.
// "Same" means both along the analyzer or both perpendicular, i.e. the
// (par,par) and (perp,perp) rows; flipping that convention would negate
// every correlation.
struct CorrelationReport {
    double p_same = 0.0;
    double p_diff = 0.0;
    double correlation = 0.0;  // p_same - p_diff
};

// Analyzer settings for the four CHSH terms.
struct ChshSettings {
    double a = 0.0;
    double a_prime = 0.0;
    double b = 0.0;
    double b_prime = 0.0;
};

// E(theta, phi) in [-1, 1]; abstract so the same CHSH path serves exact
// forward, exact retrospective and Monte Carlo estimated correlations.
using CorrelationSource = std::function<double(double, double)>;

struct ChshReport {
    std::array<ProductAngles, 4> settings{};  // (a,b), (a,b'), (a',b), (a',b')
    std::array<double, 4> correlations{};
    double s_value = 0.0;  // E(a,b) - E(a,b') + E(a',b) + E(a',b')
};

// p[ij][A] = alpha_ij * |a_Aij|^2, where row A of `entangled` holds the
// coefficients a_Aij over the earlier outcomes (i, j). The product form is
// valid precisely because the earlier measurement collapsed each pair onto
// a product state; `alpha` is the post-first-measurement outcome table.
// Throws std::invalid_argument on invalid alpha or a non-unitary basis.
JointDistribution joint_distribution(const AlphaTable& alpha, const Basis4& entangled);

// Column sums: probability of each later outcome A. Sums to 1.
std::array<double, 4> entangled_marginal(const JointDistribution& joint);

// Distribution over earlier outcomes (i, j) given later outcome A (1..4):
// column A divided by its sum. Throws ZeroMarginal when the column sum is
// below kZeroMarginalTol.
std::array<double, 4> retrospective_conditional(const JointDistribution& joint,
                                                int outcome_a);

// Outcome table alpha_ij induced by Born-rule measurement of `ensemble`
// in product_basis(angles).
AlphaTable induced_alpha(const EnsembleSpec& ensemble, ProductAngles angles);

// Same/diff report of a probability distribution over the four (i, j)
// outcomes. Entries are clamped to [0, 1] after the arithmetic.
CorrelationReport outcome_correlation(const std::array<double, 4>& p_ij);

// Correlation of a single prepared state measured in product_basis(angles),
// by Born-rule enumeration of the four outcomes.
CorrelationReport state_correlation(const PureState4& state, ProductAngles angles);

// Pairs prepared in Bell state `bell_index` (1..4), then measured at the
// given angles. For B1 this equals cos^2/sin^2 of (theta - phi) and a
// correlation of cos 2(theta - phi).
CorrelationReport forward_correlation(int bell_index, ProductAngles angles);

// Weighted average of the per-component reports; zero correlation for the
// uniform Bell mixture at every angle pair.
CorrelationReport whole_ensemble_correlation(const EnsembleSpec& ensemble,
                                             ProductAngles angles);

// The full reverse pipeline: measure `input` in product_basis(alpha_angles)
// (giving alpha), re-express `entangled` over those outcomes, build the
// joint, condition on later outcome A, and report same/diff over the
// earlier (i, j) outcomes. Propagates ZeroMarginal.
CorrelationReport retrospective_correlation(ProductAngles alpha_angles,
                                            const EnsembleSpec& input,
                                            const Basis4& entangled,
                                            int outcome_a);

ChshReport chsh(const ChshSettings& settings, const CorrelationSource& source);

// Observer 1's outcome marginal (par, perp) at `theta` with observer 2
// measuring at `phi`, unconditioned on anything later.
std::array<double, 2> observer1_marginal(const EnsembleSpec& ensemble,
                                         double theta, double phi);

// Max absolute change in observer 1's marginal when observer 2 switches
// from phi_a to phi_b. Zero (within kAmpTol) for every ensemble.
double no_signaling_check(const EnsembleSpec& ensemble, double theta,
                          double phi_a, double phi_b);

}  // namespace dce
