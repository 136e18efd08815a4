#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stfl/datagen.hpp"
#include "stfl/device.hpp"
#include "stfl/server.hpp"
#include "stfl/theory.hpp"

namespace stfl {

/// Raised for any invalid experiment configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// How the model a device starts its local step from is produced.
///  - network: the server broadcasts the aggregated global model.
///  - contraction: a fixed cohort trains every epoch and each device is
///    "broadcast" its own previous local model, so the global error equals the
///    local one and only the local dynamics remain.
enum class Dynamics { network, contraction };

/// How a device estimates a missed global model.
///  - ewma: exponentially weighted history of received models.
///  - calibrated: the broadcast plus an orthogonal error of squared norm
///    delta * (local squared error), i.e. the analysis hypothesis with equality.
enum class Compensator { ewma, calibrated };

struct AlphaChoice {
    bool optimal = false;
    double value = 0.5;
};

struct ExperimentConfig {
    PopulationSpec population = default_population_spec();
    std::size_t num_selected = 100;
    std::size_t epochs = 200;
    std::size_t replicates = 50;
    std::uint64_t seed = 1;
    AlphaChoice alpha;
    double q = 0.2;
    double omega = 0.25;
    BetaSchedule beta_schedule = BetaSchedule::harmonic();
    bool compensation_enabled = true;
    std::string output_path;

    Dynamics dynamics = Dynamics::network;
    Compensator compensator = Compensator::ewma;
    /// Assumed delta: used for q*delta in the theory report and as the
    /// calibrated compensator's error ratio.
    double delta = 1.0;
    bool normalize_compensator = false;
    /// Optional per-class alpha override, indexed by mixture component.
    std::vector<double> class_alpha;

    /// Throws ConfigError.
    void validate() const;
    double effective_omega() const noexcept { return compensation_enabled ? omega : 0.0; }
};

struct EpochStats {
    std::size_t epoch = 0;
    double avg_error = 0.0;
    double std_error = 0.0;
    double global_error = 0.0;
};

struct ErrorTrace {
    std::vector<EpochStats> rows;
    std::vector<double> avg_errors() const;
    /// Row for a 1-based epoch number.
    const EpochStats& at_epoch(std::size_t epoch) const;
};

struct ErrorSample {
    std::size_t class_label = 0;
    Vector error; // theta_{m,t} - Theta_*
};

struct RunOptions {
    std::size_t workers = 1;
    /// Keep every per-device error vector (contraction mode bound checks).
    bool collect_samples = false;
};

struct RunResult {
    ErrorTrace trace;
    std::vector<DeltaRecord> delta_history;
    DeltaEstimate delta;
    std::optional<std::size_t> hypothesis_onset;
    /// Fraction of the whole population drawn into mixture component 0.
    double class0_fraction = 0.0;
    /// samples[t] holds the errors after epoch t+1 across replicates.
    std::vector<std::vector<ErrorSample>> samples;
};

/// Replicated simulation of the epoch loop. Output is a pure function of the
/// config; the worker count only changes wall-clock time.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Per-class theory inputs derived from the population (analytic second
/// moments, q_delta = q * delta) and the alphas the config implies.
std::vector<DeviceClassTheory> theory_classes(const ExperimentConfig& config);
std::vector<double> theory_alphas(const ExperimentConfig& config, std::span<const DeviceClassTheory> classes);
TheoryReport theory_report(const ExperimentConfig& config);

struct EpochWindow {
    std::size_t first = 5;
    std::size_t last = 50;
};

struct TimeConstantFit {
    double tau = 0.0;
    double slope = 0.0;
    std::size_t first = 0;
    std::size_t last = 0;
};

/// Least-squares slope s of ln(avg_error) over the window; tau = -1/s. The
/// window ends early once successive log-errors differ by less than 1e-4.
TimeConstantFit measure_time_constant(const ErrorTrace& trace, EpochWindow window = {});

struct SweepRow {
    double q_delta = 0.0;
    double tau_analytic = 0.0;
    double tau_measured = 0.0; // NaN when not simulated
    bool capable = false;
};

/// For each q*delta (q = q_delta / base.delta): closed-form tau and, when the
/// capability condition holds, a fresh simulation with a fitted tau.
std::vector<SweepRow> sweep_time_constant(const ExperimentConfig& base, std::span<const double> q_delta_grid,
                                          const RunOptions& options = {}, EpochWindow window = {});

struct PresetRun {
    std::string label;
    ExperimentConfig config;
};

/// Four (q, alpha, omega) combinations reconstructed from the Fig. 2 discussion.
std::vector<PresetRun> preset_fig2();

struct SweepPreset {
    ExperimentConfig base;
    std::vector<double> grid;
};

SweepPreset preset_fig3();

// Config file and CSV formats.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);

void write_trace_csv(std::ostream& out, const ErrorTrace& trace);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
void write_dataset_csv(std::ostream& out, const Dataset& dataset);
std::string theory_report_json(const TheoryReport& report);
std::string theory_report_text(const TheoryReport& report);

/// 17 significant digits, round-trip exact for doubles.
std::string format_double(double v);

} // namespace stfl
