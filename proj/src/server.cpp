#include "stfl/server.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include "stfl/rng.hpp"

namespace stfl {

BetaSchedule BetaSchedule::constant(double value) {
    if (!(value > 0.0 && value < 1.0)) {
        throw std::invalid_argument("constant beta must lie in (0, 1)");
    }
    return BetaSchedule(Kind::constant, value);
}

BetaSchedule BetaSchedule::parse(const std::string& text) {
    if (text == "harmonic") {
        return harmonic();
    }
    const std::string prefix = "constant:";
    if (text.rfind(prefix, 0) == 0) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(text.substr(prefix.size()), &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("malformed beta schedule '" + text + "'");
        }
        if (used != text.size() - prefix.size()) {
            throw std::invalid_argument("malformed beta schedule '" + text + "'");
        }
        return constant(v);
    }
    throw std::invalid_argument("unknown beta schedule '" + text + "' (expected harmonic or constant:<c>)");
}

double BetaSchedule::at(std::size_t epoch) const {
    const double b = kind_ == Kind::harmonic ? 1.0 / (static_cast<double>(epoch) + 1.0) : value_;
    if (!(b > 0.0 && b <= 1.0)) {
        throw std::domain_error("beta schedule produced a value outside (0, 1]");
    }
    return b;
}

std::string BetaSchedule::name() const {
    if (kind_ == Kind::harmonic) {
        return "harmonic";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "constant:%.17g", value_);
    return buf;
}

std::vector<std::size_t> schedule(const GlobalState& state, std::size_t epoch, std::uint64_t rng_key) {
    const std::size_t n = state.num_selected;
    const std::size_t pop = state.population_size;
    if (n == 0 || n > pop) {
        throw std::invalid_argument("schedule: need 1 <= N <= population_size (N = " + std::to_string(n) +
                                    ", population = " + std::to_string(pop) + ")");
    }
    KeyedRng rng = KeyedRng::derive(rng_key, StreamTag::schedule, {epoch});

    // Floyd's sampling: one draw per selected id, uniform over n-subsets.
    std::unordered_set<std::size_t> chosen;
    chosen.reserve(n * 2);
    std::vector<std::size_t> ids;
    ids.reserve(n);
    for (std::size_t j = pop - n; j < pop; ++j) {
        std::uniform_int_distribution<std::size_t> pick(0, j);
        const std::size_t t = pick(rng);
        const std::size_t id = chosen.insert(t).second ? t : j;
        if (id == j) {
            chosen.insert(j);
        }
        ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

ModelVector spatial_aggregate(std::span<const Upload> uploads) {
    if (uploads.empty()) {
        throw std::invalid_argument("spatial_aggregate: no uploads");
    }
    std::vector<const Upload*> order;
    order.reserve(uploads.size());
    for (const auto& u : uploads) {
        if (u.dataset_size == 0) {
            throw std::invalid_argument("spatial_aggregate: upload with empty dataset");
        }
        if (u.local_model.size() != uploads.front().local_model.size()) {
            throw std::invalid_argument("spatial_aggregate: uploads differ in dimension");
        }
        order.push_back(&u);
    }
    std::sort(order.begin(), order.end(), [](const Upload* a, const Upload* b) {
        return a->device_id < b->device_id;
    });

    double total = 0.0;
    for (const Upload* u : order) {
        total += static_cast<double>(u->dataset_size);
    }
    ModelVector out(order.front()->local_model.size(), 0.0);
    for (const Upload* u : order) {
        axpy(static_cast<double>(u->dataset_size) / total, u->local_model, out);
    }
    return out;
}

ModelVector temporal_update(GlobalState& state, const ModelVector& spatial_estimate) {
    if (spatial_estimate.size() != state.global_model.size()) {
        throw std::invalid_argument("temporal_update: dimension mismatch");
    }
    const double beta = state.beta.at(state.epoch);
    ModelVector next(spatial_estimate.size());
    for (std::size_t i = 0; i < next.size(); ++i) {
        next[i] = (1.0 - beta) * state.global_model[i] + beta * spatial_estimate[i];
    }
    state.global_model = next;
    ++state.epoch;
    return next;
}

} // namespace stfl
