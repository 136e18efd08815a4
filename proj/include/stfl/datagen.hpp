#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stfl/lazy_slots.hpp"
#include "stfl/numerics.hpp"

namespace stfl {

using ModelVector = Vector;

struct DataPoint {
    Vector x;
    double y = 0.0;
};

struct Dataset {
    std::size_t device_id = 0;
    std::vector<DataPoint> points;
    std::size_t class_label = 0;
    /// Uncentred second moment (1/n) sum x x^T; this is the exact Jacobian of
    /// the averaged quadratic-loss gradient.
    Matrix second_moment;

    std::size_t size() const noexcept { return points.size(); }
    std::size_t dimension() const noexcept { return points.empty() ? 0 : points.front().x.size(); }
};

struct MixtureComponent {
    Vector mean;
    Matrix covariance;
    double probability = 0.0;
};

struct PopulationSpec {
    std::size_t population_size = 10000;
    std::size_t dataset_size = 100;
    std::size_t dimension = 2;
    std::vector<MixtureComponent> mixture;
    ModelVector target_model;
    double label_noise_std = 0.0;

    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const;
};

/// Two equally likely 2-D Gaussians (means [1,1] and [2.2,1.8]), target
/// (1/sqrt 2)[1, -1], 10000 devices with 100 points each.
PopulationSpec default_population_spec();

/// Same population with every component mean set to zero, so that each
/// class Jacobian equals its covariance.
PopulationSpec zero_mean_population(PopulationSpec spec);

/// Deterministic in (spec, device_id, seed): the class label and every
/// point come from a stream keyed by (seed, device_id).
Dataset generate_dataset(const PopulationSpec& spec, std::size_t device_id, std::uint64_t seed);

/// The mixture component generate_dataset would assign to this device,
/// without drawing its points.
std::size_t draw_class_label(const PopulationSpec& spec, std::size_t device_id, std::uint64_t seed);

/// (1/|S|) sum x x^T.
Matrix empirical_jacobian(const Dataset& dataset);

/// Sigma + mu mu^T, the population counterpart of empirical_jacobian.
Matrix analytic_second_moment(const MixtureComponent& component);

/// Lazily generated, shared datasets for one (spec, seed) pair.
class DatasetCache {
public:
    DatasetCache(PopulationSpec spec, std::uint64_t seed);

    const Dataset& get(std::size_t device_id);
    const PopulationSpec& spec() const noexcept { return spec_; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    PopulationSpec spec_;
    std::uint64_t seed_;
    LazySlots<Dataset> slots_;
};

} // namespace stfl
