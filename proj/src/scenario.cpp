#include "dce/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "dce/montecarlo.hpp"

namespace dce {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr double kSelfCheckSigma = 5.0;

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

// Angles are radians; a string of the form "<value> deg" is converted at
// parse time so one numeric convention holds end-to-end.
std::optional<double> parse_angle_value(const json& v, const std::string& path,
                                        std::vector<std::string>& violations) {
    if (v.is_number()) {
        const double value = v.get<double>();
        if (!std::isfinite(value)) {
            violations.push_back(path + ": angle must be finite");
            return std::nullopt;
        }
        return value;
    }
    if (v.is_string()) {
        std::string text = v.get<std::string>();
        const auto suffix = text.rfind("deg");
        if (suffix != std::string::npos &&
            text.find_first_not_of(" \t", suffix + 3) == std::string::npos) {
            const std::string number = text.substr(0, suffix);
            try {
                size_t used = 0;
                const double degrees = std::stod(number, &used);
                if (number.find_first_not_of(" \t", used) == std::string::npos &&
                    std::isfinite(degrees))
                    return degrees * std::numbers::pi / 180.0;
            } catch (const std::exception&) {
            }
        }
        violations.push_back(path + ": cannot parse angle '" + text +
                             "' (expected radians or \"<value> deg\")");
        return std::nullopt;
    }
    violations.push_back(path + ": expected a number or \"<value> deg\" string");
    return std::nullopt;
}

AngleSpec parse_angle_spec(const json& v, const std::string& path,
                           std::vector<std::string>& violations) {
    if (v.is_object()) {
        AngleSweep sweep;
        bool ok = true;
        for (const char* key : {"start", "stop", "steps"})
            if (!v.contains(key)) {
                violations.push_back(path + ": sweep requires start, stop and steps");
                return 0.0;
            }
        if (auto start = parse_angle_value(v.at("start"), path + ".start", violations))
            sweep.start = *start;
        else
            ok = false;
        if (auto stop = parse_angle_value(v.at("stop"), path + ".stop", violations))
            sweep.stop = *stop;
        else
            ok = false;
        if (v.at("steps").is_number_integer())
            sweep.steps = v.at("steps").get<int>();
        else {
            violations.push_back(path + ".steps: expected an integer");
            ok = false;
        }
        if (ok && sweep.steps < 2)
            violations.push_back(path + ".steps: sweep needs at least 2 steps (got " +
                                 std::to_string(sweep.steps) + ")");
        return sweep;
    }
    if (auto value = parse_angle_value(v, path, violations)) return *value;
    return 0.0;
}

std::optional<Amplitude> parse_amplitude(const json& v, const std::string& path,
                                         std::vector<std::string>& violations) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        violations.push_back(path + ": expected a [re, im] pair");
        return std::nullopt;
    }
    return Amplitude{v[0].get<double>(), v[1].get<double>()};
}

std::optional<PureState4> parse_state(const json& v, const std::string& path,
                                      std::vector<std::string>& violations) {
    if (!v.is_array() || v.size() != 4) {
        violations.push_back(path + ": expected 4 amplitudes ordered VV, VH, HV, HH");
        return std::nullopt;
    }
    PureState4 state;
    for (size_t k = 0; k < 4; ++k) {
        auto amp = parse_amplitude(v[k], path + "[" + std::to_string(k) + "]", violations);
        if (!amp) return std::nullopt;
        state.amps[k] = *amp;
    }
    return state;
}

void parse_ensemble(const json& v, ScenarioConfig& config,
                    std::vector<std::string>& violations) {
    if (v.is_string()) {
        const std::string preset = v.get<std::string>();
        if (preset == "uniform_bell") {
            config.ensemble = uniform_bell_mixture();
            config.ensemble_label = preset;
        } else if (preset == "maximally_mixed") {
            config.ensemble = maximally_mixed_products();
            config.ensemble_label = preset;
        } else {
            violations.push_back("ensemble: unknown preset '" + preset +
                                 "' (expected uniform_bell or maximally_mixed)");
        }
        return;
    }
    if (!v.is_object()) {
        violations.push_back("ensemble: expected a preset name or an object");
        return;
    }
    const bool normalize = v.value("normalize", false);
    if (v.contains("alpha")) {
        const auto& alpha_json = v.at("alpha");
        if (!alpha_json.is_array() || alpha_json.size() != 4) {
            violations.push_back(
                "ensemble.alpha: expected 4 weights ordered (1,1),(1,2),(2,1),(2,2)");
            return;
        }
        AlphaTable alpha;
        for (size_t k = 0; k < 4; ++k) {
            if (!alpha_json[k].is_number()) {
                violations.push_back("ensemble.alpha[" + std::to_string(k) +
                                     "]: expected a number");
                return;
            }
            alpha.alpha[k] = alpha_json[k].get<double>();
        }
        if (normalize) {
            const double total =
                alpha.alpha[0] + alpha.alpha[1] + alpha.alpha[2] + alpha.alpha[3];
            if (total > 0.0)
                for (auto& a : alpha.alpha) a /= total;
        }
        ProductAngles angles;
        if (!v.contains("angles") || !v.at("angles").is_object()) {
            violations.push_back("ensemble.angles: required with alpha");
            return;
        }
        if (auto theta = parse_angle_value(v.at("angles").value("theta", json(0.0)),
                                           "ensemble.angles.theta", violations))
            angles.theta = *theta;
        if (auto phi = parse_angle_value(v.at("angles").value("phi", json(0.0)),
                                         "ensemble.angles.phi", violations))
            angles.phi = *phi;
        for (const auto& violation : validate(alpha))
            violations.push_back("ensemble.alpha: " + violation);
        if (violations.empty()) {
            config.ensemble = product_mixture(alpha, angles);
            config.ensemble_label = "explicit";
        }
        return;
    }
    if (v.contains("components")) {
        const auto& list = v.at("components");
        if (!list.is_array() || list.empty()) {
            violations.push_back("ensemble.components: expected a non-empty array");
            return;
        }
        EnsembleSpec spec;
        for (size_t k = 0; k < list.size(); ++k) {
            const std::string path = "ensemble.components[" + std::to_string(k) + "]";
            const auto& item = list[k];
            if (!item.is_object() || !item.contains("weight") || !item.contains("state")) {
                violations.push_back(path + ": expected {weight, state}");
                return;
            }
            if (!item.at("weight").is_number()) {
                violations.push_back(path + ".weight: expected a number");
                return;
            }
            auto state = parse_state(item.at("state"), path + ".state", violations);
            if (!state) return;
            spec.components.push_back({item.at("weight").get<double>(), *state});
        }
        if (normalize) {
            try {
                spec = normalized(spec);
            } catch (const std::invalid_argument& e) {
                violations.push_back(std::string("ensemble: ") + e.what());
                return;
            }
        }
        for (const auto& violation : validate(spec))
            violations.push_back("ensemble: " + violation);
        config.ensemble = spec;
        config.ensemble_label = "explicit";
        return;
    }
    violations.push_back("ensemble: expected preset, alpha+angles, or components");
}

void parse_later_basis(const json& v, ScenarioConfig& config,
                       std::vector<std::string>& violations) {
    if (v.is_string()) {
        const std::string label = v.get<std::string>();
        if (label == "bell") {
            config.later_basis = bell_basis();
            config.later_basis_label = "bell";
        } else if (label == "none") {
            config.later_basis = std::nullopt;
            config.later_basis_label = "none";
        } else {
            violations.push_back("later_basis: unknown choice '" + label +
                                 "' (expected bell, none, or a 4x4 matrix)");
        }
        return;
    }
    if (!v.is_array() || v.size() != 4) {
        violations.push_back("later_basis: expected \"bell\", \"none\", or 4 rows");
        return;
    }
    Basis4 basis;
    for (size_t a = 0; a < 4; ++a) {
        auto row = parse_state(v[a], "later_basis[" + std::to_string(a) + "]", violations);
        if (!row) return;
        basis.rows[a] = *row;
    }
    const double residual = verify_unitarity(basis);
    if (residual > kAmpTol) {
        violations.push_back("later_basis: unitarity residual " + fmt_g(residual) +
                             " exceeds " + fmt_g(kAmpTol));
        return;
    }
    config.later_basis = basis;
    config.later_basis_label = "explicit";
}

OutputKind parse_output_kind(const std::string& name, std::vector<std::string>& violations) {
    if (name == "summary_table") return OutputKind::kSummaryTable;
    if (name == "joint_csv") return OutputKind::kJointCsv;
    if (name == "records_csv") return OutputKind::kRecordsCsv;
    if (name == "report_json") return OutputKind::kReportJson;
    violations.push_back("outputs: unknown output '" + name + "'");
    return OutputKind::kSummaryTable;
}

int sweep_steps(const AngleSpec& spec) {
    if (const auto* sweep = std::get_if<AngleSweep>(&spec)) return sweep->steps;
    return 1;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations_in)
    : std::runtime_error("invalid scenario config (" +
                         std::to_string(violations_in.size()) + " violation(s)): " +
                         (violations_in.empty() ? std::string("?") : violations_in.front())),
      violations(std::move(violations_in)) {}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("cannot read config file: " + path);

    json doc;
    try {
        doc = json::parse(buffer.str());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config parse error: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("config parse error: top level must be an object");

    std::vector<std::string> violations;
    ScenarioConfig config;

    static const std::vector<std::string> known_keys = {
        "name", "mode",   "ensemble", "angles",  "later_basis",
        "trials", "seed", "chsh_settings", "outputs"};
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (std::find(known_keys.begin(), known_keys.end(), key) == known_keys.end())
            violations.push_back("unknown key '" + key + "'");
    }

    if (doc.contains("name")) {
        if (doc.at("name").is_string())
            config.name = doc.at("name").get<std::string>();
        else
            violations.push_back("name: expected a string");
    }

    bool mode_known = false;
    if (!doc.contains("mode")) {
        violations.push_back("mode: required (forward or reverse)");
    } else if (doc.at("mode") == "forward") {
        config.mode = Mode::kForward;
        mode_known = true;
    } else if (doc.at("mode") == "reverse") {
        config.mode = Mode::kReverse;
        mode_known = true;
    } else {
        violations.push_back("mode: must be \"forward\" or \"reverse\"");
    }

    if (doc.contains("ensemble"))
        parse_ensemble(doc.at("ensemble"), config, violations);
    else
        violations.push_back("ensemble: required");

    if (doc.contains("angles") && doc.at("angles").is_object()) {
        const auto& angles = doc.at("angles");
        if (angles.contains("theta"))
            config.theta = parse_angle_spec(angles.at("theta"), "angles.theta", violations);
        else
            violations.push_back("angles.theta: required");
        if (angles.contains("phi"))
            config.phi = parse_angle_spec(angles.at("phi"), "angles.phi", violations);
        else
            violations.push_back("angles.phi: required");
    } else {
        violations.push_back("angles: required ({theta, phi})");
    }
    const int theta_steps = sweep_steps(config.theta);
    const int phi_steps = sweep_steps(config.phi);
    if (theta_steps > 1 && phi_steps > 1 && theta_steps != phi_steps)
        violations.push_back("angles: theta and phi sweeps must have equal steps");

    if (doc.contains("later_basis")) {
        if (mode_known && config.mode == Mode::kForward)
            violations.push_back("later_basis: forbidden in forward mode");
        else
            parse_later_basis(doc.at("later_basis"), config, violations);
    }

    if (doc.contains("trials")) {
        if (doc.at("trials").is_number_integer() &&
            doc.at("trials").get<std::int64_t>() >= 0)
            config.trials = doc.at("trials").get<std::int64_t>();
        else
            violations.push_back("trials: expected an integer >= 0");
    }

    if (doc.contains("seed")) {
        if (doc.at("seed").is_number_unsigned())
            config.seed = doc.at("seed").get<std::uint64_t>();
        else if (doc.at("seed").is_number_integer() && doc.at("seed").get<std::int64_t>() >= 0)
            config.seed = static_cast<std::uint64_t>(doc.at("seed").get<std::int64_t>());
        else
            violations.push_back("seed: expected a non-negative integer");
    }

    if (doc.contains("chsh_settings")) {
        const auto& settings = doc.at("chsh_settings");
        if (!settings.is_object()) {
            violations.push_back("chsh_settings: expected {a, a_prime, b, b_prime}");
        } else {
            ChshSettings parsed;
            bool ok = true;
            const std::pair<const char*, double*> fields[] = {{"a", &parsed.a},
                                                              {"a_prime", &parsed.a_prime},
                                                              {"b", &parsed.b},
                                                              {"b_prime", &parsed.b_prime}};
            for (const auto& [key, slot] : fields) {
                if (!settings.contains(key)) {
                    violations.push_back(std::string("chsh_settings.") + key + ": required");
                    ok = false;
                    continue;
                }
                if (auto value = parse_angle_value(settings.at(key),
                                                   std::string("chsh_settings.") + key,
                                                   violations))
                    *slot = *value;
                else
                    ok = false;
            }
            if (ok) config.chsh_settings = parsed;
        }
    }

    if (doc.contains("outputs")) {
        if (!doc.at("outputs").is_array()) {
            violations.push_back("outputs: expected an array of output names");
        } else {
            for (const auto& entry : doc.at("outputs")) {
                if (!entry.is_string()) {
                    violations.push_back("outputs: entries must be strings");
                    continue;
                }
                config.outputs.push_back(
                    parse_output_kind(entry.get<std::string>(), violations));
            }
        }
    }
    if (config.outputs.empty()) config.outputs.push_back(OutputKind::kSummaryTable);
    if (mode_known && config.mode == Mode::kForward &&
        std::find(config.outputs.begin(), config.outputs.end(), OutputKind::kJointCsv) !=
            config.outputs.end())
        violations.push_back("outputs: joint_csv requires mode=reverse");

    if (!violations.empty()) throw ValidationError(std::move(violations));
    return config;
}

std::vector<ProductAngles> resolve_angle_steps(const ScenarioConfig& config) {
    const int steps = std::max(sweep_steps(config.theta), sweep_steps(config.phi));
    auto value_at = [](const AngleSpec& spec, int step) {
        if (const auto* sweep = std::get_if<AngleSweep>(&spec)) {
            if (sweep->steps <= 1) return sweep->start;
            const double t = static_cast<double>(step) /
                             static_cast<double>(sweep->steps - 1);
            return sweep->start + t * (sweep->stop - sweep->start);
        }
        return std::get<double>(spec);
    };
    std::vector<ProductAngles> out;
    out.reserve(static_cast<size_t>(steps));
    for (int s = 0; s < steps; ++s)
        out.push_back(ProductAngles{value_at(config.theta, s), value_at(config.phi, s)});
    return out;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

namespace {

struct QuantityRow {
    std::string quantity;
    std::optional<double> exact;
    std::optional<double> estimate;
    std::optional<double> std_error;
    std::optional<double> z;
    std::string note;
    bool deviant = false;
};

QuantityRow make_row(std::string quantity, std::optional<double> exact,
                     std::optional<double> estimate, std::optional<double> std_error,
                     std::string note = "") {
    QuantityRow row;
    row.quantity = std::move(quantity);
    row.exact = exact;
    row.estimate = estimate;
    row.std_error = std_error;
    row.note = std::move(note);
    if (exact && estimate) {
        const double diff = *estimate - *exact;
        const double se = std_error.value_or(0.0);
        if (se > 0.0) {
            row.z = diff / se;
            row.deviant = std::abs(diff) > kSelfCheckSigma * se;
        } else {
            row.z = std::abs(diff) <= 1e-12 ? 0.0
                                            : std::numeric_limits<double>::infinity();
            row.deviant = std::abs(diff) > 1e-12;
        }
    }
    return row;
}

struct StepResult {
    int settings_id = 0;
    ProductAngles angles;
    std::optional<AlphaTable> alpha;
    std::optional<JointDistribution> joint;
    std::optional<std::array<double, 4>> marginal;
    std::vector<QuantityRow> rows;
};

struct ChshOutcomeResult {
    std::string conditioned_on;  // "A=1".."A=4" or "all"
    std::optional<ChshReport> exact;
    std::optional<double> estimate_s;
    std::optional<double> std_error;
    std::optional<double> z;
    std::string note;
    bool deviant = false;
};

struct ChshResult {
    ChshSettings settings;
    std::vector<ChshOutcomeResult> outcomes;
};

bool wants(const ScenarioConfig& config, OutputKind kind) {
    return std::find(config.outputs.begin(), config.outputs.end(), kind) !=
           config.outputs.end();
}

std::string sanitized_name(const std::string& name) {
    std::string out;
    for (char c : name)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'
                          ? c
                          : '_');
    return out.empty() ? std::string("scenario") : out;
}

void estimate_into_rows(const std::vector<TrialRecord>& bucket, const std::string& name,
                        std::optional<double> exact, std::vector<QuantityRow>& rows) {
    try {
        const EstimateReport estimate = estimate_correlation(bucket);
        rows.push_back(
            make_row(name, exact, estimate.correlation, estimate.std_error));
    } catch (const EmptySubensemble&) {
        rows.push_back(make_row(name, exact, std::nullopt, std::nullopt,
                                "empty_subensemble"));
    }
}

StepResult run_step(const ScenarioConfig& config, int settings_id, ProductAngles angles,
                    std::int64_t trials, std::uint64_t seed, int threads,
                    bool diagnostics, std::vector<TrialRecord>& record_sink) {
    StepResult step;
    step.settings_id = settings_id;
    step.angles = angles;

    std::vector<TrialRecord> records;
    if (config.mode == Mode::kForward) {
        const CorrelationReport whole = whole_ensemble_correlation(config.ensemble, angles);
        if (trials > 0)
            records = run_forward(config.ensemble, angles, trials, seed, settings_id,
                                  threads);
        if (!records.empty()) {
            const EstimateReport est = estimate_correlation(records);
            step.rows.push_back(make_row("corr[all]", whole.correlation, est.correlation,
                                         est.std_error));
        } else {
            step.rows.push_back(
                make_row("corr[all]", whole.correlation, std::nullopt, std::nullopt));
        }
        if (diagnostics) {
            for (size_t k = 0; k < config.ensemble.components.size(); ++k) {
                const CorrelationReport exact =
                    state_correlation(config.ensemble.components[k].state, angles);
                const std::string name = "corr[prep=" + std::to_string(k + 1) + "]";
                if (records.empty()) {
                    step.rows.push_back(make_row(name, exact.correlation, std::nullopt,
                                                 std::nullopt));
                    continue;
                }
                std::vector<TrialRecord> grouped;
                for (const auto& record : records)
                    if (record.component_index == static_cast<int>(k))
                        grouped.push_back(record);
                estimate_into_rows(grouped, name, exact.correlation, step.rows);
            }
        }
    } else {
        const AlphaTable alpha = induced_alpha(config.ensemble, angles);
        step.alpha = alpha;
        if (trials > 0)
            records = run_reverse(config.ensemble, angles, config.later_basis, trials,
                                  seed, settings_id, threads);
        Subensembles buckets;
        if (!records.empty()) buckets = sort_subensembles(records);

        if (config.later_basis) {
            const Basis4 local =
                express_in_frame(*config.later_basis, product_basis(angles));
            const JointDistribution joint = joint_distribution(alpha, local);
            step.joint = joint;
            const auto marginal = entangled_marginal(joint);
            step.marginal = marginal;
            for (int a = 1; a <= 4; ++a) {
                const std::string marginal_name = "marginal[A=" + std::to_string(a) + "]";
                const std::string corr_name = "corr[A=" + std::to_string(a) + "]";
                const double exact_marginal = marginal[static_cast<size_t>(a - 1)];
                if (!records.empty()) {
                    const auto& bucket = buckets.by_outcome[static_cast<size_t>(a - 1)];
                    const double n = static_cast<double>(records.size());
                    const double p = static_cast<double>(bucket.size()) / n;
                    const double se = std::sqrt(p * (1.0 - p) / n);
                    step.rows.push_back(make_row(marginal_name, exact_marginal, p, se));
                } else {
                    step.rows.push_back(make_row(marginal_name, exact_marginal,
                                                 std::nullopt, std::nullopt));
                }
                std::optional<double> exact_corr;
                std::string note;
                try {
                    exact_corr =
                        outcome_correlation(retrospective_conditional(joint, a)).correlation;
                } catch (const ZeroMarginal&) {
                    note = "zero_marginal";
                }
                if (!records.empty() && note.empty()) {
                    estimate_into_rows(buckets.by_outcome[static_cast<size_t>(a - 1)],
                                       corr_name, exact_corr, step.rows);
                } else {
                    step.rows.push_back(make_row(corr_name, exact_corr, std::nullopt,
                                                 std::nullopt, note));
                }
            }
        }

        const CorrelationReport unconditioned = outcome_correlation(alpha.alpha);
        if (!records.empty()) {
            const EstimateReport est = estimate_correlation(records);
            step.rows.push_back(make_row("corr[all]", unconditioned.correlation,
                                         est.correlation, est.std_error));
        } else {
            step.rows.push_back(make_row("corr[all]", unconditioned.correlation,
                                         std::nullopt, std::nullopt));
        }
    }

    record_sink.insert(record_sink.end(), records.begin(), records.end());
    return step;
}

ChshResult run_chsh(const ScenarioConfig& config, const ChshSettings& settings,
                    std::int64_t trials, std::uint64_t seed, int threads,
                    int first_settings_id) {
    ChshResult result;
    result.settings = settings;

    const std::array<ProductAngles, 4> corners = {
        ProductAngles{settings.a, settings.b}, ProductAngles{settings.a, settings.b_prime},
        ProductAngles{settings.a_prime, settings.b},
        ProductAngles{settings.a_prime, settings.b_prime}};

    // One MC run per corner; every conditioned estimate reuses the same runs.
    std::array<Subensembles, 4> corner_buckets;
    std::array<std::vector<TrialRecord>, 4> corner_records;
    if (trials > 0) {
        for (int k = 0; k < 4; ++k) {
            if (config.mode == Mode::kForward)
                corner_records[static_cast<size_t>(k)] =
                    run_forward(config.ensemble, corners[static_cast<size_t>(k)], trials,
                                seed, first_settings_id + k, threads);
            else
                corner_records[static_cast<size_t>(k)] =
                    run_reverse(config.ensemble, corners[static_cast<size_t>(k)],
                                config.later_basis, trials, seed, first_settings_id + k,
                                threads);
            corner_buckets[static_cast<size_t>(k)] =
                sort_subensembles(corner_records[static_cast<size_t>(k)]);
        }
    }

    auto combine = [](const std::array<double, 4>& e) {
        return e[0] - e[1] + e[2] + e[3];
    };

    if (config.mode == Mode::kForward || !config.later_basis) {
        ChshOutcomeResult outcome;
        outcome.conditioned_on = "all";
        outcome.exact = chsh(settings, [&](double theta, double phi) {
            return whole_ensemble_correlation(config.ensemble, ProductAngles{theta, phi})
                .correlation;
        });
        if (trials > 0) {
            std::array<double, 4> estimates{};
            double variance = 0.0;
            for (int k = 0; k < 4; ++k) {
                const EstimateReport est =
                    estimate_correlation(corner_records[static_cast<size_t>(k)]);
                estimates[static_cast<size_t>(k)] = est.correlation;
                variance += est.std_error * est.std_error;
            }
            const double se = std::sqrt(variance);
            const double s_est = combine(estimates);
            QuantityRow row = make_row("chsh", outcome.exact->s_value, s_est, se);
            outcome.estimate_s = s_est;
            outcome.std_error = se;
            outcome.z = row.z;
            outcome.deviant = row.deviant;
        }
        result.outcomes.push_back(std::move(outcome));
        return result;
    }

    for (int a = 1; a <= 4; ++a) {
        ChshOutcomeResult outcome;
        outcome.conditioned_on = "A=" + std::to_string(a);
        try {
            outcome.exact = chsh(settings, [&](double theta, double phi) {
                return retrospective_correlation(ProductAngles{theta, phi},
                                                 config.ensemble, *config.later_basis, a)
                    .correlation;
            });
        } catch (const ZeroMarginal&) {
            outcome.note = "zero_marginal";
            result.outcomes.push_back(std::move(outcome));
            continue;
        }
        if (trials > 0) {
            std::array<double, 4> estimates{};
            double variance = 0.0;
            bool complete = true;
            for (int k = 0; k < 4 && complete; ++k) {
                const auto& bucket =
                    corner_buckets[static_cast<size_t>(k)].by_outcome[static_cast<size_t>(a - 1)];
                try {
                    const EstimateReport est = estimate_correlation(bucket);
                    estimates[static_cast<size_t>(k)] = est.correlation;
                    variance += est.std_error * est.std_error;
                } catch (const EmptySubensemble&) {
                    outcome.note = "empty_subensemble";
                    complete = false;
                }
            }
            if (complete) {
                const double se = std::sqrt(variance);
                const double s_est = combine(estimates);
                QuantityRow row = make_row("chsh", outcome.exact->s_value, s_est, se);
                outcome.estimate_s = s_est;
                outcome.std_error = se;
                outcome.z = row.z;
                outcome.deviant = row.deviant;
            }
        }
        result.outcomes.push_back(std::move(outcome));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

ordered_json angle_spec_json(const AngleSpec& spec) {
    if (const auto* sweep = std::get_if<AngleSweep>(&spec))
        return ordered_json{
            {"start", sweep->start}, {"stop", sweep->stop}, {"steps", sweep->steps}};
    return ordered_json(std::get<double>(spec));
}

ordered_json state_json(const PureState4& state) {
    ordered_json rows = ordered_json::array();
    for (const auto& amp : state.amps)
        rows.push_back(ordered_json::array({amp.real(), amp.imag()}));
    return rows;
}

ordered_json resolved_config_json(const ScenarioConfig& config, std::int64_t trials,
                                  std::uint64_t seed) {
    ordered_json j;
    j["name"] = config.name;
    j["mode"] = config.mode == Mode::kForward ? "forward" : "reverse";
    ordered_json ensemble;
    ensemble["label"] = config.ensemble_label;
    ordered_json components = ordered_json::array();
    for (const auto& component : config.ensemble.components)
        components.push_back(ordered_json{{"weight", component.weight},
                                          {"state", state_json(component.state)}});
    ensemble["components"] = std::move(components);
    j["ensemble"] = std::move(ensemble);
    j["angles"] = ordered_json{{"theta", angle_spec_json(config.theta)},
                               {"phi", angle_spec_json(config.phi)}};
    if (config.later_basis) {
        ordered_json basis;
        basis["label"] = config.later_basis_label;
        ordered_json rows = ordered_json::array();
        for (const auto& row : config.later_basis->rows) rows.push_back(state_json(row));
        basis["rows"] = std::move(rows);
        j["later_basis"] = std::move(basis);
    } else {
        j["later_basis"] = "none";
    }
    j["trials"] = trials;
    j["seed"] = seed;
    if (config.chsh_settings)
        j["chsh_settings"] = ordered_json{{"a", config.chsh_settings->a},
                                          {"a_prime", config.chsh_settings->a_prime},
                                          {"b", config.chsh_settings->b},
                                          {"b_prime", config.chsh_settings->b_prime}};
    ordered_json outputs = ordered_json::array();
    for (OutputKind kind : config.outputs) {
        switch (kind) {
            case OutputKind::kSummaryTable: outputs.push_back("summary_table"); break;
            case OutputKind::kJointCsv: outputs.push_back("joint_csv"); break;
            case OutputKind::kRecordsCsv: outputs.push_back("records_csv"); break;
            case OutputKind::kReportJson: outputs.push_back("report_json"); break;
        }
    }
    j["outputs"] = std::move(outputs);
    return j;
}

ordered_json row_json(const QuantityRow& row) {
    ordered_json j;
    j["quantity"] = row.quantity;
    if (row.exact) j["exact"] = *row.exact;
    if (row.estimate) j["estimate"] = *row.estimate;
    if (row.std_error) j["std_error"] = *row.std_error;
    if (row.z) j["z"] = *row.z;
    if (!row.note.empty()) j["note"] = row.note;
    return j;
}

void write_summary(std::ostream& out, const ScenarioConfig& config,
                   const std::vector<StepResult>& steps,
                   const std::optional<ChshResult>& chsh_result, std::int64_t trials,
                   std::uint64_t seed) {
    char line[256];
    out << "scenario: " << config.name << "\n";
    out << "mode: " << (config.mode == Mode::kForward ? "forward" : "reverse")
        << "   ensemble: " << config.ensemble_label
        << "   later_basis: " << config.later_basis_label << "\n";
    out << "trials: " << trials << "   seed: " << seed << "   steps: " << steps.size()
        << "\n\n";
    std::snprintf(line, sizeof line, "%4s  %10s  %10s  %-14s  %18s  %18s  %12s  %8s\n",
                  "step", "theta", "phi", "quantity", "exact", "estimate", "std_error",
                  "z");
    out << line;
    auto number_or_dash = [](std::optional<double> v, int width, char* buf, size_t bufsz) {
        if (v)
            std::snprintf(buf, bufsz, "%*.12g", width, *v);
        else
            std::snprintf(buf, bufsz, "%*s", width, "-");
    };
    for (const auto& step : steps) {
        for (const auto& row : step.rows) {
            char exact[32], estimate[32], se[32], z[16];
            number_or_dash(row.exact, 18, exact, sizeof exact);
            number_or_dash(row.estimate, 18, estimate, sizeof estimate);
            if (row.std_error)
                std::snprintf(se, sizeof se, "%12.4g", *row.std_error);
            else
                std::snprintf(se, sizeof se, "%12s", "-");
            if (row.z)
                std::snprintf(z, sizeof z, "%8.2f", *row.z);
            else
                std::snprintf(z, sizeof z, "%8s", "-");
            std::snprintf(line, sizeof line,
                          "%4d  %10.6f  %10.6f  %-14s  %s  %s  %s  %s%s\n",
                          step.settings_id, canonical_angle(step.angles.theta),
                          canonical_angle(step.angles.phi), row.quantity.c_str(), exact,
                          estimate, se, z, row.note.empty() ? "" : ("  " + row.note).c_str());
            out << line;
        }
    }
    if (chsh_result) {
        out << "\nchsh: a=" << fmt_g(chsh_result->settings.a)
            << " a'=" << fmt_g(chsh_result->settings.a_prime)
            << " b=" << fmt_g(chsh_result->settings.b)
            << " b'=" << fmt_g(chsh_result->settings.b_prime) << "\n";
        for (const auto& outcome : chsh_result->outcomes) {
            out << "  S[" << outcome.conditioned_on << "]";
            if (outcome.exact) out << "  exact=" << fmt_g(outcome.exact->s_value);
            if (outcome.estimate_s)
                out << "  estimate=" << fmt_g(*outcome.estimate_s)
                    << "  std_error=" << fmt_g(*outcome.std_error) << "  z="
                    << fmt_g(*outcome.z);
            if (!outcome.note.empty()) out << "  " << outcome.note;
            out << "\n";
        }
    }
}

void write_joint_csv(const std::string& path, const std::vector<StepResult>& steps) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "step,theta,phi,outcome_A,marginal,cond_11,cond_12,cond_21,cond_22\n";
    for (const auto& step : steps) {
        if (!step.joint || !step.marginal) continue;
        for (int a = 1; a <= 4; ++a) {
            out << step.settings_id << ',' << fmt_g(step.angles.theta) << ','
                << fmt_g(step.angles.phi) << ',' << a << ','
                << fmt_g((*step.marginal)[static_cast<size_t>(a - 1)]);
            try {
                const auto conditional = retrospective_conditional(*step.joint, a);
                for (double p : conditional) out << ',' << fmt_g(p);
            } catch (const ZeroMarginal&) {
                out << ",,,,";  // conditioning on an impossible outcome
            }
            out << '\n';
        }
    }
}

void write_records_csv(const std::string& path, const std::vector<TrialRecord>& records,
                       bool diagnostics) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "trial_id,settings_id,first_i,first_j,later_A";
    if (diagnostics) out << ",component_index";
    out << '\n';
    for (const auto& record : records) {
        out << record.trial_id << ',' << record.settings_id << ',' << record.first_i
            << ',' << record.first_j << ',';
        if (record.later_outcome) out << *record.later_outcome;
        if (diagnostics) out << ',' << record.component_index;
        out << '\n';
    }
}

void write_report_json(const std::string& path, const ScenarioConfig& config,
                       const std::vector<StepResult>& steps,
                       const std::optional<ChshResult>& chsh_result, std::int64_t trials,
                       std::uint64_t seed, bool self_check, int deviations) {
    ordered_json report;
    report["config"] = resolved_config_json(config, trials, seed);
    ordered_json step_list = ordered_json::array();
    for (const auto& step : steps) {
        ordered_json j;
        j["settings_id"] = step.settings_id;
        j["theta"] = step.angles.theta;
        j["phi"] = step.angles.phi;
        if (step.alpha) {
            ordered_json alpha = ordered_json::array();
            for (double a : step.alpha->alpha) alpha.push_back(a);
            j["alpha"] = std::move(alpha);
        }
        if (step.joint) {
            ordered_json joint = ordered_json::array();
            for (const auto& row : step.joint->p) {
                ordered_json r = ordered_json::array();
                for (double p : row) r.push_back(p);
                joint.push_back(std::move(r));
            }
            j["joint"] = std::move(joint);
        }
        if (step.marginal) {
            ordered_json marginal = ordered_json::array();
            for (double m : *step.marginal) marginal.push_back(m);
            j["marginal"] = std::move(marginal);
        }
        ordered_json quantities = ordered_json::array();
        for (const auto& row : step.rows) quantities.push_back(row_json(row));
        j["quantities"] = std::move(quantities);
        step_list.push_back(std::move(j));
    }
    report["steps"] = std::move(step_list);
    if (chsh_result) {
        ordered_json j;
        j["settings"] = ordered_json{{"a", chsh_result->settings.a},
                                     {"a_prime", chsh_result->settings.a_prime},
                                     {"b", chsh_result->settings.b},
                                     {"b_prime", chsh_result->settings.b_prime}};
        ordered_json outcomes = ordered_json::array();
        for (const auto& outcome : chsh_result->outcomes) {
            ordered_json o;
            o["conditioned_on"] = outcome.conditioned_on;
            if (outcome.exact) {
                ordered_json correlations = ordered_json::array();
                for (double e : outcome.exact->correlations) correlations.push_back(e);
                o["exact_correlations"] = std::move(correlations);
                o["exact_s"] = outcome.exact->s_value;
            }
            if (outcome.estimate_s) o["estimate_s"] = *outcome.estimate_s;
            if (outcome.std_error) o["std_error"] = *outcome.std_error;
            if (outcome.z) o["z"] = *outcome.z;
            if (!outcome.note.empty()) o["note"] = outcome.note;
            outcomes.push_back(std::move(o));
        }
        j["results"] = std::move(outcomes);
        report["chsh"] = std::move(j);
    }
    report["self_check"] =
        ordered_json{{"enabled", self_check}, {"deviations", deviations}};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << report.dump(2) << '\n';
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options,
                       std::ostream& summary) {
    const std::int64_t trials = options.trials.value_or(config.trials);
    const std::uint64_t seed = options.seed.value_or(config.seed);
    if (trials < 0) throw ValidationError({"trials: expected an integer >= 0"});

    const std::vector<ProductAngles> angle_steps = resolve_angle_steps(config);
    std::vector<TrialRecord> all_records;
    std::vector<StepResult> steps;
    steps.reserve(angle_steps.size());
    for (size_t s = 0; s < angle_steps.size(); ++s)
        steps.push_back(run_step(config, static_cast<int>(s), angle_steps[s], trials,
                                 seed, options.threads, options.diagnostics,
                                 all_records));

    std::optional<ChshResult> chsh_result;
    if (config.chsh_settings)
        chsh_result = run_chsh(config, *config.chsh_settings, trials, seed,
                               options.threads, static_cast<int>(angle_steps.size()));

    int deviations = 0;
    for (const auto& step : steps)
        for (const auto& row : step.rows)
            if (row.deviant) ++deviations;
    if (chsh_result)
        for (const auto& outcome : chsh_result->outcomes)
            if (outcome.deviant) ++deviations;

    RunResult result;
    std::filesystem::create_directories(options.out_dir);
    const std::string stem =
        (std::filesystem::path(options.out_dir) / sanitized_name(config.name)).string();

    if (wants(config, OutputKind::kSummaryTable))
        write_summary(summary, config, steps, chsh_result, trials, seed);
    if (wants(config, OutputKind::kJointCsv)) {
        const std::string path = stem + "_joint.csv";
        write_joint_csv(path, steps);
        result.files_written.push_back(path);
    }
    if (wants(config, OutputKind::kRecordsCsv)) {
        const std::string path = stem + "_records.csv";
        write_records_csv(path, all_records, options.diagnostics);
        result.files_written.push_back(path);
    }
    if (wants(config, OutputKind::kReportJson)) {
        const std::string path = stem + "_report.json";
        write_report_json(path, config, steps, chsh_result, trials, seed,
                          options.self_check, deviations);
        result.files_written.push_back(path);
    }

    result.exit_code = (options.self_check && deviations > 0) ? 2 : 0;
    return result;
}

}  // namespace dce
