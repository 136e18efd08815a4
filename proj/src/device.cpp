#include "stfl/device.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace stfl {

DeviceState DeviceState::make(std::size_t device_id, std::size_t dimension, double alpha,
                              double outage_prob, double omega) {
    DeviceState s;
    s.device_id = device_id;
    s.local_model.assign(dimension, 0.0);
    s.compensator.assign(dimension, 0.0);
    s.alpha = alpha;
    s.outage_prob = outage_prob;
    s.omega = omega;
    s.validate();
    return s;
}

void DeviceState::validate() const {
    if (!(outage_prob >= 0.0 && outage_prob <= 1.0)) {
        throw std::invalid_argument("outage probability must lie in [0, 1]");
    }
    if (!(omega >= 0.0 && omega < 1.0)) {
        throw std::invalid_argument("omega must lie in [0, 1)");
    }
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw std::invalid_argument("alpha must be finite and non-negative");
    }
    if (local_model.size() != compensator.size()) {
        throw std::invalid_argument("local model and compensator dimensions differ");
    }
}

ModelVector DeviceState::compensated_model() const {
    if (!normalize_compensator || compensator_steps == 0 || omega == 0.0) {
        return compensator;
    }
    const double mass = 1.0 - std::pow(omega, static_cast<double>(compensator_steps));
    ModelVector out = compensator;
    for (auto& v : out) {
        v /= mass;
    }
    return out;
}

bool draw_outage(const DeviceState& state, std::uint64_t epoch, std::uint64_t rng_key) {
    KeyedRng rng = KeyedRng::derive(rng_key, StreamTag::outage, {state.device_id, epoch});
    return !(rng.uniform() < state.outage_prob);
}

void advance_compensator(DeviceState& state, bool received, const ModelVector* received_global,
                         const ModelVector& prev_local) {
    if (received != (received_global != nullptr)) {
        throw std::invalid_argument(received ? "update_compensator: gamma = 1 but no global model given"
                                             : "update_compensator: global model given on outage");
    }
    const ModelVector& u = received ? *received_global : prev_local;
    if (u.size() != state.compensator.size()) {
        throw std::invalid_argument("update_compensator: dimension mismatch");
    }
    const double w = state.omega;
    for (std::size_t i = 0; i < u.size(); ++i) {
        state.compensator[i] = w * state.compensator[i] + (1.0 - w) * u[i];
    }
    ++state.compensator_steps;
}

ModelVector update_compensator(DeviceState& state, bool received, const ModelVector* received_global,
                               const ModelVector& prev_local) {
    advance_compensator(state, received, received_global, prev_local);
    return state.compensated_model();
}

ModelVector local_update(DeviceState& state, bool received, const ModelVector* received_global) {
    if (state.objective == nullptr) {
        throw std::logic_error("local_update: device has no bound objective");
    }
    if (received && received_global == nullptr) {
        throw std::invalid_argument("local_update: gamma = 1 but no global model given");
    }
    ModelVector start = received ? *received_global : state.compensated_model();
    if (start.size() != state.objective->dimension()) {
        throw std::invalid_argument("local_update: dimension mismatch");
    }
    const ModelVector g = state.objective->gradient(start);
    axpy(-state.alpha, g, start);
    state.local_model = std::move(start);
    state.last_received = received;
    return state.local_model;
}

ModelVector calibrated_compensator(const ModelVector& global, const ModelVector& target,
                                   double local_error_sq, double delta, KeyedRng& rng) {
    if (!(delta >= 0.0) || !(local_error_sq >= 0.0)) {
        throw std::invalid_argument("calibrated_compensator: delta and error must be >= 0");
    }
    const std::size_t d = global.size();
    const Vector dir = subtract(global, target);
    const double dir_norm = std::sqrt(norm_sq(dir));
    std::normal_distribution<double> normal(0.0, 1.0);

    Vector e(d);
    double e_norm = 0.0;
    for (int attempt = 0; attempt < 16 && e_norm == 0.0; ++attempt) {
        for (auto& v : e) {
            v = normal(rng);
        }
        if (d > 1 && dir_norm > 0.0) {
            const double proj = dot(e, dir) / (dir_norm * dir_norm);
            axpy(-proj, dir, e);
        }
        e_norm = std::sqrt(norm_sq(e));
    }
    ModelVector out = global;
    if (e_norm > 0.0) {
        axpy(std::sqrt(delta * local_error_sq) / e_norm, e, out);
    }
    return out;
}

DeltaEstimate estimate_delta(std::span<const DeltaRecord> history) {
    if (history.empty()) {
        throw std::invalid_argument("estimate_delta: empty history");
    }
    DeltaEstimate est;
    for (const auto& rec : history) {
        if (rec.local_sq_error <= 0.0) {
            if (rec.compensation_sq_error > 0.0) {
                est.unbounded = true;
                est.worst_epoch = rec.epoch;
            }
            continue;
        }
        const double ratio = rec.compensation_sq_error / rec.local_sq_error;
        if (!est.worst_epoch || ratio > est.value) {
            if (!est.unbounded) {
                est.worst_epoch = rec.epoch;
            }
            est.value = std::max(est.value, ratio);
        }
    }
    if (est.unbounded) {
        est.value = std::numeric_limits<double>::infinity();
    }
    return est;
}

DeltaEstimate estimate_delta(std::span<const DeltaObservation> history, const ModelVector& target) {
    std::vector<DeltaRecord> records;
    records.reserve(history.size());
    for (std::size_t t = 0; t < history.size(); ++t) {
        const auto& h = history[t];
        records.push_back({t, distance_sq(h.global, h.compensator), distance_sq(h.local, target)});
    }
    return estimate_delta(records);
}

} // namespace stfl
