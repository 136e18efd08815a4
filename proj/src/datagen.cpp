#include "stfl/datagen.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "stfl/rng.hpp"

namespace stfl {

void PopulationSpec::validate() const {
    if (population_size == 0 || dataset_size == 0 || dimension == 0) {
        throw std::invalid_argument("population_size, dataset_size and dimension must be >= 1");
    }
    if (mixture.empty()) {
        throw std::invalid_argument("mixture must have at least one component");
    }
    if (target_model.size() != dimension) {
        throw std::invalid_argument("target_model length must equal dimension");
    }
    if (!(label_noise_std >= 0.0) || !std::isfinite(label_noise_std)) {
        throw std::invalid_argument("label_noise_std must be finite and >= 0");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < mixture.size(); ++k) {
        const auto& c = mixture[k];
        const std::string where = "mixture[" + std::to_string(k) + "]";
        if (c.mean.size() != dimension) {
            throw std::invalid_argument(where + ": mean length must equal dimension");
        }
        if (c.covariance.rows() != dimension || c.covariance.cols() != dimension) {
            throw std::invalid_argument(where + ": covariance must be dimension x dimension");
        }
        if (!(c.probability >= 0.0 && c.probability <= 1.0)) {
            throw std::invalid_argument(where + ": probability must lie in [0, 1]");
        }
        try {
            (void)cholesky(c.covariance);
        } catch (const MatrixError& e) {
            throw std::invalid_argument(where + ": covariance must be symmetric positive definite (" +
                                        e.what() + ")");
        }
        total += c.probability;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("mixture probabilities must sum to 1");
    }
}

PopulationSpec default_population_spec() {
    PopulationSpec spec;
    spec.population_size = 10000;
    spec.dataset_size = 100;
    spec.dimension = 2;
    spec.mixture = {
        {{1.0, 1.0}, Matrix::from_rows({{1.0, 1.25}, {1.25, 3.0}}), 0.5},
        {{2.2, 1.8}, Matrix::from_rows({{2.0, 1.75}, {1.75, 2.0}}), 0.5},
    };
    const double h = 1.0 / std::sqrt(2.0);
    spec.target_model = {h, -h};
    spec.label_noise_std = 0.0;
    return spec;
}

PopulationSpec zero_mean_population(PopulationSpec spec) {
    for (auto& c : spec.mixture) {
        c.mean.assign(c.mean.size(), 0.0);
    }
    return spec;
}

namespace {

std::size_t pick_component(const PopulationSpec& spec, double u) {
    double cumulative = 0.0;
    for (std::size_t k = 0; k < spec.mixture.size(); ++k) {
        cumulative += spec.mixture[k].probability;
        if (u < cumulative) {
            return k;
        }
    }
    return spec.mixture.size() - 1;
}

} // namespace

std::size_t draw_class_label(const PopulationSpec& spec, std::size_t device_id, std::uint64_t seed) {
    KeyedRng rng = KeyedRng::derive(seed, StreamTag::dataset, {device_id});
    return pick_component(spec, rng.uniform());
}

Dataset generate_dataset(const PopulationSpec& spec, std::size_t device_id, std::uint64_t seed) {
    spec.validate();
    if (device_id >= spec.population_size) {
        throw std::out_of_range("device_id " + std::to_string(device_id) +
                                " is outside the population of " +
                                std::to_string(spec.population_size));
    }
    KeyedRng rng = KeyedRng::derive(seed, StreamTag::dataset, {device_id});

    Dataset ds;
    ds.device_id = device_id;

    ds.class_label = pick_component(spec, rng.uniform());

    const auto& comp = spec.mixture[ds.class_label];
    const Matrix chol = cholesky(comp.covariance);
    const std::size_t d = spec.dimension;
    std::normal_distribution<double> normal(0.0, 1.0);

    ds.points.resize(spec.dataset_size);
    Vector z(d);
    for (auto& p : ds.points) {
        for (auto& zi : z) {
            zi = normal(rng);
        }
        p.x = comp.mean;
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t c = 0; c <= r; ++c) {
                p.x[r] += chol(r, c) * z[c];
            }
        }
        // The noise draw happens even at zero std so x stays independent of it.
        const double noise = normal(rng);
        p.y = dot(spec.target_model, p.x) + spec.label_noise_std * noise;
    }
    ds.second_moment = empirical_jacobian(ds);
    return ds;
}

Matrix empirical_jacobian(const Dataset& dataset) {
    if (dataset.points.empty()) {
        throw std::invalid_argument("empirical_jacobian: dataset is empty");
    }
    const std::size_t d = dataset.dimension();
    Matrix j(d, d);
    for (const auto& p : dataset.points) {
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
                j(r, c) += p.x[r] * p.x[c];
            }
        }
    }
    return (1.0 / static_cast<double>(dataset.points.size())) * j;
}

Matrix analytic_second_moment(const MixtureComponent& component) {
    return component.covariance + outer(component.mean, component.mean);
}

DatasetCache::DatasetCache(PopulationSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), seed_(seed), slots_(spec_.population_size) {
    spec_.validate();
}

const Dataset& DatasetCache::get(std::size_t device_id) {
    return slots_.get(device_id, [&] { return generate_dataset(spec_, device_id, seed_); });
}

} // namespace stfl
