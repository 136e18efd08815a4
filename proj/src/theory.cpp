#include "stfl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace stfl {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive_definite(const DeviceClassTheory& cls, const char* what) {
    if (cls.singular()) {
        throw std::invalid_argument(std::string(what) + ": class " + std::to_string(cls.class_id) +
                                    " has a singular Jacobian (lambda_min = " +
                                    std::to_string(cls.lambda_min) + ")");
    }
}
} // namespace

bool DeviceClassTheory::singular() const noexcept {
    return !(lambda_min > 1e-12 * std::abs(lambda_max)) || lambda_max <= 0.0;
}

DeviceClassTheory make_class_theory(const Matrix& jacobian, double q_delta, std::size_t class_id) {
    if (!(q_delta >= 0.0) || !std::isfinite(q_delta)) {
        throw std::invalid_argument("q_delta must be finite and >= 0");
    }
    DeviceClassTheory cls;
    cls.class_id = class_id;
    cls.jacobian = jacobian;
    cls.eigen = sym_eigen(jacobian);
    cls.lambda_max = cls.eigen.eigenvalues.front();
    cls.lambda_min = cls.eigen.eigenvalues.back();
    cls.condition_number = cls.lambda_min > 0.0 ? cls.lambda_max / cls.lambda_min : kInf;
    cls.q_delta = q_delta;
    return cls;
}

std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::capable:
        return "capable";
    case Verdict::not_capable:
        return "not capable";
    case Verdict::indeterminate:
        return "indeterminate";
    }
    return "?";
}

CapabilityResult capability_check(std::span<const DeviceClassTheory> classes, std::span<const double> alphas) {
    if (classes.empty() || classes.size() != alphas.size()) {
        throw std::invalid_argument("capability_check: need one alpha per class");
    }
    CapabilityResult out;
    out.values.reserve(classes.size());
    for (std::size_t k = 0; k < classes.size(); ++k) {
        const auto& cls = classes[k];
        const double v = std::sqrt(1.0 + cls.q_delta) * spectral_norm_shifted(cls.jacobian, alphas[k]);
        out.values.push_back(v);
        if (k == 0 || v > out.max_value) {
            out.max_value = v;
            out.worst_class = k;
        }
        if (cls.singular() && out.diagnostic.empty()) {
            out.diagnostic = "class " + std::to_string(cls.class_id) +
                             " has a singular Jacobian; the capability condition assumes positive eigenvalues";
        }
    }
    if (!out.diagnostic.empty()) {
        out.verdict = Verdict::indeterminate;
    } else {
        out.verdict = out.max_value < 1.0 ? Verdict::capable : Verdict::not_capable;
    }
    return out;
}

double optimal_step(const Matrix& jacobian, const EigenResult& eig) {
    // lambda_max + lambda_min as the trace minus the interior eigenvalues, so
    // that in two dimensions the sum is the exactly representable trace.
    const auto& ev = eig.eigenvalues;
    if (ev.empty()) {
        throw std::invalid_argument("optimal_step: empty spectrum");
    }
    double extremes = ev.size() == 1 ? 2.0 * ev.front() : trace(jacobian);
    for (std::size_t i = 1; i + 1 < ev.size(); ++i) {
        extremes -= ev[i];
    }
    return 2.0 / extremes;
}

OptimalAlpha optimal_alpha(const DeviceClassTheory& cls) {
    require_positive_definite(cls, "optimal_alpha");
    OptimalAlpha out;
    out.alpha = optimal_step(cls.jacobian, cls.eigen);
    const double s = std::sqrt(1.0 + cls.q_delta);
    out.condition_bound = cls.q_delta > 0.0 ? (s + 1.0) / (s - 1.0) : kInf;
    out.degenerate = cls.lambda_max == cls.lambda_min;
    out.valid = (cls.condition_number > 1.0 || out.degenerate) && cls.condition_number < out.condition_bound;
    return out;
}

std::pair<double, double> alpha_constraint_interval(const DeviceClassTheory& cls) {
    require_positive_definite(cls, "alpha_constraint_interval");
    const double s = std::sqrt(1.0 + cls.q_delta);
    return {(s - 1.0) / (cls.lambda_max * s), (s + 1.0) / (cls.lambda_max * s)};
}

double sigma_star(const DeviceClassTheory& cls) {
    return spectral_norm_shifted(cls.jacobian, optimal_alpha(cls).alpha);
}

TimeConstants predicted_time_constant(std::span<const DeviceClassTheory> classes) {
    if (classes.empty()) {
        throw std::invalid_argument("predicted_time_constant: no classes");
    }
    TimeConstants out;
    out.per_class.reserve(classes.size());
    for (std::size_t k = 0; k < classes.size(); ++k) {
        const double arg = std::sqrt(1.0 + classes[k].q_delta) * sigma_star(classes[k]);
        double tau = kInf;
        if (arg < 1.0) {
            tau = -1.0 / (2.0 * std::log(arg));
        } else if (!out.offending_class) {
            out.offending_class = k;
        }
        out.per_class.push_back(tau);
        out.overall = k == 0 ? tau : std::max(out.overall, tau);
    }
    return out;
}

Matrix empirical_covariance(std::span<const Vector> samples) {
    if (samples.empty()) {
        throw std::invalid_argument("empirical_covariance: no samples");
    }
    const std::size_t d = samples.front().size();
    Matrix p(d, d);
    for (const auto& s : samples) {
        if (s.size() != d) {
            throw std::invalid_argument("empirical_covariance: samples differ in dimension");
        }
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
                p(r, c) += s[r] * s[c];
            }
        }
    }
    return (1.0 / static_cast<double>(samples.size())) * p;
}

BoundCheck covariance_bound_check(std::span<const std::vector<Vector>> samples_by_epoch,
                                  const DeviceClassTheory& cls, double alpha, std::size_t replicates) {
    if (replicates < 30) {
        throw std::invalid_argument("covariance_bound_check: need at least 30 replicates, got " +
                                    std::to_string(replicates));
    }
    if (samples_by_epoch.size() < 2) {
        throw std::invalid_argument("covariance_bound_check: need at least two epochs");
    }
    const double sigma = spectral_norm_shifted(cls.jacobian, alpha);
    BoundCheck out;
    out.slack = 4.0 / std::sqrt(static_cast<double>(replicates));
    out.contraction = (1.0 + cls.q_delta) * sigma * sigma;

    std::vector<double> traces;
    traces.reserve(samples_by_epoch.size());
    for (const auto& samples : samples_by_epoch) {
        traces.push_back(trace(empirical_covariance(samples)));
    }
    for (std::size_t t = 0; t + 1 < traces.size(); ++t) {
        EpochMargin m;
        m.epoch = t + 1;
        m.trace_before = traces[t];
        m.trace_after = traces[t + 1];
        m.bound = out.contraction * traces[t] * (1.0 + out.slack);
        m.ok = m.trace_after <= m.bound;
        if (!m.ok) {
            ++out.violations;
            if (!out.first_violation) {
                out.first_violation = m.epoch;
            }
        }
        out.margins.push_back(m);
    }
    out.fraction_ok = 1.0 - static_cast<double>(out.violations) / static_cast<double>(out.margins.size());
    return out;
}

std::optional<std::size_t> hypothesis_onset(std::span<const DeltaRecord> history, double delta) {
    std::optional<std::size_t> onset;
    for (const auto& rec : history) {
        const bool holds = rec.compensation_sq_error <= delta * rec.local_sq_error;
        if (!holds) {
            onset.reset();
        } else if (!onset) {
            onset = rec.epoch;
        }
    }
    return onset;
}

double less_random_margin(const Matrix& local_cov, const Matrix& global_cov) {
    return sym_eigen(local_cov - global_cov).eigenvalues.back();
}

TheoryReport build_theory_report(std::span<const DeviceClassTheory> classes, std::span<const double> alphas) {
    TheoryReport report;
    const CapabilityResult cap = capability_check(classes, alphas);
    report.verdict = cap.verdict;
    report.max_capability_value = cap.max_value;
    report.diagnostic = cap.diagnostic;

    for (std::size_t k = 0; k < classes.size(); ++k) {
        const auto& cls = classes[k];
        ClassReport r;
        r.class_id = cls.class_id;
        r.lambda_max = cls.lambda_max;
        r.lambda_min = cls.lambda_min;
        r.condition_number = cls.condition_number;
        r.q_delta = cls.q_delta;
        r.alpha = alphas[k];
        r.sigma_at_alpha = spectral_norm_shifted(cls.jacobian, alphas[k]);
        r.capability_value = cap.values[k];
        if (!cls.singular()) {
            const OptimalAlpha opt = optimal_alpha(cls);
            r.alpha_star = opt.alpha;
            r.alpha_star_valid = opt.valid;
            r.sigma_star = sigma_star(cls);
        } else {
            r.alpha_star = std::numeric_limits<double>::quiet_NaN();
            r.sigma_star = std::numeric_limits<double>::quiet_NaN();
        }
        report.classes.push_back(r);
    }

    if (cap.verdict == Verdict::indeterminate) {
        report.capable_at_optimal = false;
        report.tau = kInf;
        return report;
    }
    const TimeConstants tc = predicted_time_constant(classes);
    for (std::size_t k = 0; k < classes.size(); ++k) {
        report.classes[k].tau = tc.per_class[k];
    }
    report.tau = tc.overall;
    report.capable_at_optimal = !tc.offending_class.has_value();
    return report;
}

} // namespace stfl
