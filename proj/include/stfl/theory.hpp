#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stfl/device.hpp"
#include "stfl/numerics.hpp"

namespace stfl {

/// Spectral summary of one device class's Jacobian plus its q*delta product.
struct DeviceClassTheory {
    std::size_t class_id = 0;
    Matrix jacobian;
    EigenResult eigen;
    double lambda_max = 0.0;
    double lambda_min = 0.0;
    double condition_number = 0.0; // +inf when lambda_min <= 0
    double q_delta = 0.0;

    /// lambda_min <= 1e-12 * lambda_max (the analysis assumes lambda > 0).
    bool singular() const noexcept;
};

/// 2 / (lambda_max + lambda_min) for a symmetric matrix and its spectrum.
double optimal_step(const Matrix& jacobian, const EigenResult& eig);

DeviceClassTheory make_class_theory(const Matrix& jacobian, double q_delta, std::size_t class_id = 0);

enum class Verdict { capable, not_capable, indeterminate };
std::string to_string(Verdict v);

struct CapabilityResult {
    Verdict verdict = Verdict::indeterminate;
    /// sqrt(1 + q delta) * sigma_m(alpha_m) per class.
    std::vector<double> values;
    double max_value = 0.0;
    std::size_t worst_class = 0;
    std::string diagnostic;
};

/// max_m sqrt(1 + q_m delta_m) sigma_m < 1 with sigma_m = ||I - alpha_m J_m||_2.
CapabilityResult capability_check(std::span<const DeviceClassTheory> classes, std::span<const double> alphas);

struct OptimalAlpha {
    double alpha = 0.0;
    bool valid = false;
    /// lambda_max == lambda_min: treated as valid with sigma* = 0.
    bool degenerate = false;
    /// Upper limit on the condition number, (s + 1)/(s - 1) with s = sqrt(1 + q delta).
    double condition_bound = 0.0;
};

/// alpha* = 2 / (lambda_max + lambda_min). Requires lambda_min > 0.
OptimalAlpha optimal_alpha(const DeviceClassTheory& cls);

/// Open interval of alpha for which sqrt(1 + q delta) |1 - alpha lambda_max| < 1
/// on the lambda_max side: ((s - 1)/(lambda_max s), (s + 1)/(lambda_max s)).
std::pair<double, double> alpha_constraint_interval(const DeviceClassTheory& cls);

/// ||I - alpha* J||_2; equals (lambda_max - lambda_min)/(lambda_max + lambda_min).
double sigma_star(const DeviceClassTheory& cls);

struct TimeConstants {
    std::vector<double> per_class;
    double overall = 0.0;
    /// First class whose sqrt(1 + q delta) sigma* >= 1 (overall is then +inf).
    std::optional<std::size_t> offending_class;
};

/// tau_m = -1 / (2 ln(sqrt(1 + q_m delta_m) sigma*_m)), tau = max_m tau_m.
TimeConstants predicted_time_constant(std::span<const DeviceClassTheory> classes);

/// Mean of x x^T over the samples.
Matrix empirical_covariance(std::span<const Vector> samples);

struct EpochMargin {
    std::size_t epoch = 0; // index of the later epoch in the pair (t, t+1)
    double trace_before = 0.0;
    double trace_after = 0.0;
    double bound = 0.0; // (1 + q delta) sigma^2 tr(P_t) (1 + slack)
    bool ok = true;
};

struct BoundCheck {
    std::vector<EpochMargin> margins;
    std::size_t violations = 0;
    double fraction_ok = 1.0;
    std::optional<std::size_t> first_violation;
    double slack = 0.0;
    double contraction = 0.0; // (1 + q delta) sigma^2
};

/// Witnesses tr(P_{t+1}) <= (1 + q delta) sigma^2 tr(P_t) on empirical
/// covariances of the error samples Delta theta, with relative slack
/// 4 / sqrt(replicates). samples_by_epoch[t] holds the samples of epoch t.
BoundCheck covariance_bound_check(std::span<const std::vector<Vector>> samples_by_epoch,
                                  const DeviceClassTheory& cls, double alpha, std::size_t replicates);

/// First epoch from which E|Theta - Theta_hat|^2 <= delta * eps holds for the
/// rest of the history; nullopt if it never settles.
std::optional<std::size_t> hypothesis_onset(std::span<const DeltaRecord> history, double delta);

/// Smallest eigenvalue of local_cov - global_cov. Non-negative when the
/// global error is "less random" than the local one.
double less_random_margin(const Matrix& local_cov, const Matrix& global_cov);

struct ClassReport {
    std::size_t class_id = 0;
    double lambda_max = 0.0;
    double lambda_min = 0.0;
    double condition_number = 0.0;
    double q_delta = 0.0;
    double alpha = 0.0;
    double sigma_at_alpha = 0.0;
    double capability_value = 0.0; // sqrt(1 + q delta) * sigma_at_alpha
    double alpha_star = 0.0;
    bool alpha_star_valid = false;
    double sigma_star = 0.0;
    double tau = 0.0;
};

struct TheoryReport {
    std::vector<ClassReport> classes;
    /// Eq.-4 verdict at the configured alphas.
    Verdict verdict = Verdict::indeterminate;
    double max_capability_value = 0.0;
    /// Verdict at the optimal alphas; tau is finite exactly when this holds.
    bool capable_at_optimal = false;
    double tau = 0.0;
    std::string diagnostic;
};

TheoryReport build_theory_report(std::span<const DeviceClassTheory> classes, std::span<const double> alphas);

} // namespace stfl
