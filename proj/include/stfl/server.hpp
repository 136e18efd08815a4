#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stfl/datagen.hpp"

namespace stfl {

/// Temporal learning-rate schedule. `harmonic` is 1/(t+1) (so beta_0 = 1);
/// `constant` holds a fixed value in (0, 1).
class BetaSchedule {
public:
    enum class Kind { harmonic, constant };

    static BetaSchedule harmonic() { return BetaSchedule(Kind::harmonic, 0.0); }
    static BetaSchedule constant(double value);
    /// Accepts "harmonic" or "constant:<value>".
    static BetaSchedule parse(const std::string& text);

    double at(std::size_t epoch) const;
    Kind kind() const noexcept { return kind_; }
    double value() const noexcept { return value_; }
    std::string name() const;

    friend bool operator==(const BetaSchedule&, const BetaSchedule&) = default;

private:
    BetaSchedule(Kind kind, double value) : kind_(kind), value_(value) {}
    Kind kind_;
    double value_;
};

struct GlobalState {
    ModelVector global_model;
    std::size_t epoch = 0;
    BetaSchedule beta = BetaSchedule::harmonic();
    std::size_t num_selected = 100;
    std::size_t population_size = 10000;
};

struct Upload {
    std::size_t device_id = 0;
    ModelVector local_model;
    std::size_t dataset_size = 1;
};

/// N distinct ids drawn uniformly without replacement, sorted ascending.
/// Deterministic in (rng_key, epoch).
std::vector<std::size_t> schedule(const GlobalState& state, std::size_t epoch, std::uint64_t rng_key);

/// Dataset-size weighted mean of the uploaded local models, accumulated in
/// ascending device_id order.
ModelVector spatial_aggregate(std::span<const Upload> uploads);

/// Theta_{t+1} = (1 - beta_t) Theta_t + beta_t * spatial_estimate; advances the epoch.
ModelVector temporal_update(GlobalState& state, const ModelVector& spatial_estimate);

} // namespace stfl
