// Scenario-driven runner: ingest a declarative JSON config, execute the
// exact and/or Monte Carlo pipelines, emit human-readable tables and
// machine-readable reports.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dce/analytics.hpp"
#include "dce/ensembles.hpp"
#include "dce/qmath.hpp"

namespace dce {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Carries every violation found, each prefixed with its config field path.
struct ValidationError : std::runtime_error {
    explicit ValidationError(std::vector<std::string> violations_in);
    std::vector<std::string> violations;
};

enum class Mode { kForward, kReverse };

struct AngleSweep {
    double start = 0.0;
    double stop = 0.0;
    int steps = 0;  // >= 2; endpoints inclusive
};

// A fixed angle (radians) or a sweep over one.
using AngleSpec = std::variant<double, AngleSweep>;

enum class OutputKind { kSummaryTable, kJointCsv, kRecordsCsv, kReportJson };

// A fully resolved scenario: presets expanded, angles in radians, explicit
// bases validated.
struct ScenarioConfig {
    std::string name = "scenario";
    Mode mode = Mode::kForward;
    EnsembleSpec ensemble;
    std::string ensemble_label;  // "uniform_bell", "maximally_mixed", "explicit"
    AngleSpec theta = 0.0;
    AngleSpec phi = 0.0;
    std::optional<Basis4> later_basis;  // empty = no later measurement
    std::string later_basis_label = "none";  // "bell", "none", "explicit"
    std::int64_t trials = 0;  // 0 = exact only
    std::uint64_t seed = 0;
    std::optional<ChshSettings> chsh_settings;
    std::vector<OutputKind> outputs;
};

// Parse and validate a scenario file. Reports all violations at once with
// field paths. Throws IoError, ParseError or ValidationError.
ScenarioConfig load_config(const std::string& path);

struct RunOptions {
    std::optional<std::int64_t> trials;  // override config
    std::optional<std::uint64_t> seed;   // override config
    bool self_check = false;   // nonzero exit on any 5-sigma MC deviation
    bool diagnostics = false;  // expose component_index in records and reports
    std::string out_dir = ".";
    int threads = 1;
};

struct RunResult {
    int exit_code = 0;
    std::vector<std::string> files_written;
};

// Execute the scenario: analytics always, Monte Carlo when trials > 0.
// The summary table goes to `summary`; other outputs are files in
// options.out_dir. Re-running with an identical config and seed produces
// byte-identical files regardless of options.threads.
RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options,
                       std::ostream& summary);

// The sweep expanded to per-step angles ((theta, phi) per settings_id).
std::vector<ProductAngles> resolve_angle_steps(const ScenarioConfig& config);

}  // namespace dce
