#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "stfl/datagen.hpp"
#include "stfl/loss.hpp"
#include "stfl/rng.hpp"

namespace stfl {

/// Mobile-device state. Owned by a single worker during an epoch.
struct DeviceState {
    std::size_t device_id = 0;
    ModelVector local_model;
    /// Raw EWMA accumulator (1 - w) sum w^(t-i) u_i; starts at zero.
    ModelVector compensator;
    double alpha = 0.5;
    double outage_prob = 0.0;
    double omega = 0.25;
    bool last_received = true;
    /// Divide the accumulator by (1 - w^t) so its weights sum to one.
    bool normalize_compensator = false;
    std::size_t compensator_steps = 0;
    const LocalObjective* objective = nullptr;

    static DeviceState make(std::size_t device_id, std::size_t dimension, double alpha,
                            double outage_prob, double omega);

    /// The estimate used in place of a missed global model.
    ModelVector compensated_model() const;
    void validate() const;
};

/// Returns gamma: true when the broadcast arrives, false on outage
/// (probability outage_prob). Keyed by (rng_key, device_id, epoch).
bool draw_outage(const DeviceState& state, std::uint64_t epoch, std::uint64_t rng_key);

/// Advances the compensator by one epoch,
///   acc <- w * acc + (1 - w) * u,  u = received ? global : prev_local,
/// which unrolls to the weighted sum over all past epochs. `received_global`
/// must be non-null exactly when `received` is true. Returns compensated_model().
ModelVector update_compensator(DeviceState& state, bool received, const ModelVector* received_global,
                               const ModelVector& prev_local);

/// Same recursion as update_compensator without materialising the result.
void advance_compensator(DeviceState& state, bool received, const ModelVector* received_global,
                         const ModelVector& prev_local);

/// One local gradient step from the received global model (or, on outage,
/// from the compensated estimate). Replaces and returns state.local_model.
ModelVector local_update(DeviceState& state, bool received, const ModelVector* received_global);

/// Synthetic estimate of a missed global model: global + e with e orthogonal
/// to (global - target) and |e|^2 = delta * local_error_sq, random sign.
/// In one dimension there is no orthogonal complement and e lies on the axis.
ModelVector calibrated_compensator(const ModelVector& global, const ModelVector& target,
                                   double local_error_sq, double delta, KeyedRng& rng);

/// One epoch of compensation bookkeeping, already averaged (across
/// replicates and devices) where that is available.
struct DeltaRecord {
    std::size_t epoch = 0;
    double compensation_sq_error = 0.0; // E|Theta_t - Theta_hat_{m,t}|^2
    double local_sq_error = 0.0;        // E|theta_{m,t} - Theta_*|^2
};

struct DeltaEstimate {
    double value = 0.0;
    bool unbounded = false;
    std::optional<std::size_t> worst_epoch;
};

/// Tightest delta with E|Theta - Theta_hat|^2 <= delta * eps over the history.
DeltaEstimate estimate_delta(std::span<const DeltaRecord> history);

struct DeltaObservation {
    ModelVector global;
    ModelVector compensator;
    ModelVector local;
};

/// Single-run form: ratios of instantaneous squared errors.
DeltaEstimate estimate_delta(std::span<const DeltaObservation> history, const ModelVector& target);

} // namespace stfl
