#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "stfl/device.hpp"
#include "stfl/loss.hpp"
#include "support.hpp"

using namespace stfl;

namespace {

/// (1 - w) * sum_{i=1..t} w^(t-i) u_i evaluated term by term.
Vector weighted_history(const std::vector<Vector>& inputs, double w) {
    const std::size_t t = inputs.size();
    Vector out(inputs.front().size(), 0.0);
    for (std::size_t i = 1; i <= t; ++i) {
        axpy((1.0 - w) * std::pow(w, static_cast<double>(t - i)), inputs[i - 1], out);
    }
    return out;
}

} // namespace

TEST_SUITE("device") {

TEST_CASE("make validates parameters") {
    CHECK_NOTHROW(DeviceState::make(0, 2, 0.5, 0.2, 0.25));
    CHECK_THROWS(DeviceState::make(0, 2, 0.5, 1.2, 0.25));
    CHECK_THROWS(DeviceState::make(0, 2, 0.5, 0.2, 1.0));
    CHECK_THROWS(DeviceState::make(0, 2, -0.5, 0.2, 0.25));
    const DeviceState s = DeviceState::make(4, 3, 0.5, 0.2, 0.25);
    CHECK(s.local_model == Vector(3, 0.0));
    CHECK(s.compensator == Vector(3, 0.0));
}

TEST_CASE("compensator recursion equals the explicit weighted sum") {
    auto g = support::gen(41);
    std::uniform_real_distribution<double> uw(0.0, 0.99);
    std::bernoulli_distribution coin(0.5);
    for (int history = 0; history < 1000; ++history) {
        DeviceState s = DeviceState::make(0, 3, 0.5, 0.5, uw(g));
        std::vector<Vector> inputs;
        Vector prev_local = support::random_vector(g, 3);
        for (int t = 0; t < 20; ++t) {
            const Vector global = support::random_vector(g, 3);
            const bool received = coin(g);
            inputs.push_back(received ? global : prev_local);
            const Vector got = update_compensator(s, received, received ? &global : nullptr, prev_local);
            const Vector want = weighted_history(inputs, s.omega);
            for (std::size_t k = 0; k < 3; ++k) {
                CHECK(std::abs(got[k] - want[k]) <= 1e-12);
            }
            prev_local = support::random_vector(g, 3);
        }
    }
}

TEST_CASE("normalised compensator reproduces a constant input") {
    DeviceState s = DeviceState::make(0, 2, 0.5, 0.0, 0.6);
    s.normalize_compensator = true;
    const Vector u{1.5, -2.0};
    for (int t = 0; t < 10; ++t) {
        const Vector c = update_compensator(s, true, &u, s.local_model);
        CHECK(std::abs(c[0] - u[0]) < 1e-12);
        CHECK(std::abs(c[1] - u[1]) < 1e-12);
    }
    s.normalize_compensator = false;
    CHECK(s.compensated_model()[0] == doctest::Approx(u[0] * (1 - std::pow(0.6, 10))));
}

TEST_CASE("compensator update checks that a global model comes with reception") {
    DeviceState s = DeviceState::make(0, 2, 0.5, 0.2, 0.25);
    const Vector g{1.0, 1.0};
    CHECK_THROWS(update_compensator(s, true, nullptr, s.local_model));
    CHECK_THROWS(update_compensator(s, false, &g, s.local_model));
    const Vector short_model{1.0};
    CHECK_THROWS(update_compensator(s, true, &short_model, s.local_model));
}

TEST_CASE("local update starts from the broadcast or from the compensated model") {
    Dataset d;
    d.points = {{{1.0, 0.0}, 1.0}, {{0.0, 2.0}, 0.0}};
    const auto obj = QuadraticLoss{}.bind(d);
    DeviceState s = DeviceState::make(0, 2, 0.5, 0.3, 0.25);
    s.objective = obj.get();

    const Vector global{2.0, 1.0};
    const Vector out = local_update(s, true, &global);
    const Vector grad = obj->gradient(global);
    CHECK(out == Vector{global[0] - 0.5 * grad[0], global[1] - 0.5 * grad[1]});
    CHECK(s.last_received);

    s.compensator = {0.4, -0.2};
    const Vector comp = s.compensator;
    const Vector gc = obj->gradient(comp);
    const Vector out2 = local_update(s, false, nullptr);
    CHECK(out2 == Vector{comp[0] - 0.5 * gc[0], comp[1] - 0.5 * gc[1]});
    CHECK_FALSE(s.last_received);

    DeviceState unbound = DeviceState::make(1, 2, 0.5, 0.3, 0.25);
    CHECK_THROWS_AS(local_update(unbound, true, &global), std::logic_error);
}

TEST_CASE("quadratic local error evolves by the linear map I - alpha J") {
    auto g = support::gen(42);
    const PopulationSpec spec = default_population_spec();
    for (std::size_t id = 0; id < 20; ++id) {
        const Dataset d = generate_dataset(spec, id, 4);
        const auto obj = QuadraticLoss{}.bind(d);
        DeviceState s = DeviceState::make(id, 2, 0.1, 0.0, 0.25);
        s.objective = obj.get();
        const Matrix q = Matrix::identity(2) - s.alpha * d.second_moment;
        for (int t = 0; t < 10; ++t) {
            const Vector global = support::random_vector(g, 2);
            const Vector delta = subtract(global, spec.target_model);
            const Vector want = matvec(q, delta);
            const Vector got = subtract(local_update(s, true, &global), spec.target_model);
            for (std::size_t k = 0; k < 2; ++k) {
                CHECK(std::abs(got[k] - want[k]) <= 1e-10 * std::max(1.0, std::abs(want[k])));
            }
        }
    }
}

TEST_CASE("outage draws are keyed and have the configured frequency") {
    const DeviceState s = DeviceState::make(7, 2, 0.5, 0.3, 0.25);
    CHECK(draw_outage(s, 5, 99) == draw_outage(s, 5, 99));
    const int n = 40000;
    int lost = 0;
    for (int e = 0; e < n; ++e) {
        lost += draw_outage(s, static_cast<std::uint64_t>(e), 99) ? 0 : 1;
    }
    CHECK(std::abs(lost - 0.3 * n) < 5.0 * std::sqrt(n * 0.3 * 0.7));

    const DeviceState never = DeviceState::make(7, 2, 0.5, 0.0, 0.25);
    const DeviceState always = DeviceState::make(7, 2, 0.5, 1.0, 0.25);
    for (int e = 0; e < 1000; ++e) {
        CHECK(draw_outage(never, static_cast<std::uint64_t>(e), 1));
        CHECK_FALSE(draw_outage(always, static_cast<std::uint64_t>(e), 1));
    }
}

TEST_CASE("calibrated compensator error is orthogonal with the requested size") {
    auto g = support::gen(43);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + trial % 4;
        const Vector global = support::random_vector(g, n);
        const Vector target = support::random_vector(g, n);
        const double err = norm_sq(subtract(global, target));
        const double delta = 0.25 + trial % 3;
        KeyedRng rng(static_cast<std::uint64_t>(trial));
        const Vector est = calibrated_compensator(global, target, err, delta, rng);
        const Vector e = subtract(est, global);
        CHECK(std::abs(norm_sq(e) - delta * err) <= 1e-12 * delta * err);
        CHECK(std::abs(dot(e, subtract(global, target))) <= 1e-10 * err);
    }
    KeyedRng rng(1);
    const Vector one = calibrated_compensator({2.0}, {1.0}, 1.0, 4.0, rng);
    CHECK(std::abs(std::abs(one[0] - 2.0) - 2.0) < 1e-12);
    CHECK(calibrated_compensator({1.0, 1.0}, {0.0, 0.0}, 0.0, 1.0, rng) == Vector{1.0, 1.0});
    CHECK_THROWS(calibrated_compensator({1.0}, {0.0}, 1.0, -1.0, rng));
}

TEST_CASE("delta estimate takes the worst ratio and flags unbounded histories") {
    const std::vector<DeltaRecord> h{{1, 0.2, 1.0}, {2, 0.9, 1.5}, {3, 0.1, 0.5}};
    const DeltaEstimate e = estimate_delta(h);
    CHECK(e.value == doctest::Approx(0.6));
    CHECK(e.worst_epoch == 2);
    CHECK_FALSE(e.unbounded);

    const std::vector<DeltaRecord> bad{{1, 0.2, 1.0}, {2, 0.5, 0.0}};
    const DeltaEstimate u = estimate_delta(bad);
    CHECK(u.unbounded);
    CHECK(std::isinf(u.value));
    CHECK(u.worst_epoch == 2);
    CHECK_THROWS(estimate_delta(std::vector<DeltaRecord>{}));

    const std::vector<DeltaObservation> obs{{{1.0, 0.0}, {0.0, 0.0}, {2.0, 0.0}}};
    CHECK(estimate_delta(obs, {0.0, 0.0}).value == doctest::Approx(0.25));
}

}
