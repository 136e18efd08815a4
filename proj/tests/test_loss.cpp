#include <doctest.h>

#include <cmath>

#include "stfl/datagen.hpp"
#include "stfl/loss.hpp"
#include "support.hpp"

using namespace stfl;

namespace {

/// Quadratic loss that keeps the generic point-by-point binding.
class PointwiseQuadratic final : public LossModel {
public:
    double loss(const DataPoint& p, const ModelVector& m) const override { return quadratic_loss(p, m); }
    ModelVector gradient_at_point(const DataPoint& p, const ModelVector& m) const override {
        return quadratic_gradient(p, m);
    }
    Matrix jacobian(const Dataset& d, const ModelVector& m) const override { return QuadraticLoss{}.jacobian(d, m); }
};

Dataset noisy_dataset(std::size_t id) {
    PopulationSpec s = default_population_spec();
    s.label_noise_std = 0.3;
    return generate_dataset(s, id, 21);
}

} // namespace

TEST_SUITE("loss") {

TEST_CASE("quadratic loss values") {
    CHECK(quadratic_loss({{1.0, 0.0}, 1.0}, {1.0, 0.0}) == 0.0);
    CHECK(quadratic_loss({{1.0, 2.0}, 0.0}, {1.0, 1.0}) == 4.5);
    CHECK(quadratic_gradient({{1.0, 2.0}, 0.0}, {1.0, 1.0}) == Vector{3.0, 6.0});
    CHECK_THROWS(quadratic_loss({{1.0, 2.0}, 0.0}, {1.0}));
}

TEST_CASE("pointwise gradient matches central finite differences") {
    auto g = support::gen(31);
    for (int trial = 0; trial < 200; ++trial) {
        const DataPoint p{support::random_vector(g, 3), support::random_vector(g, 1)[0]};
        const Vector m = support::random_vector(g, 3);
        const Vector grad = quadratic_gradient(p, m);
        for (std::size_t k = 0; k < 3; ++k) {
            const double h = 1e-5;
            Vector up = m, dn = m;
            up[k] += h;
            dn[k] -= h;
            const double fd = (quadratic_loss(p, up) - quadratic_loss(p, dn)) / (2 * h);
            CHECK(std::abs(fd - grad[k]) <= 1e-6 * std::max(1.0, std::abs(grad[k])));
        }
    }
}

TEST_CASE("bound objective agrees with the averaged pointwise gradient") {
    auto g = support::gen(32);
    const QuadraticLoss loss;
    const PointwiseQuadratic pointwise;
    for (std::size_t id = 0; id < 20; ++id) {
        const Dataset d = noisy_dataset(id);
        const auto fast = loss.bind(d);
        const auto slow = pointwise.bind(d);
        const Vector m = support::random_vector(g, 2);
        const Vector ref = averaged_gradient(d, m, loss);
        const Vector a = fast->gradient(m);
        const Vector b = slow->gradient(m);
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(std::abs(a[k] - ref[k]) <= 1e-12 * std::max(1.0, std::abs(ref[k])));
            CHECK(b[k] == ref[k]);
        }
        CHECK(fast->jacobian(m) == d.second_moment);
        CHECK(fast->dimension() == 2);
    }
}

TEST_CASE("averaged gradient Jacobian matches finite differences") {
    const Dataset d = noisy_dataset(3);
    const QuadraticLoss loss;
    const Vector m{0.3, -0.7};
    const Matrix j = loss.jacobian(d, m);
    for (std::size_t k = 0; k < 2; ++k) {
        const double h = 1e-5;
        Vector up = m, dn = m;
        up[k] += h;
        dn[k] -= h;
        const Vector gu = averaged_gradient(d, up, loss);
        const Vector gd = averaged_gradient(d, dn, loss);
        for (std::size_t r = 0; r < 2; ++r) {
            CHECK(std::abs((gu[r] - gd[r]) / (2 * h) - j(r, k)) <= 1e-6 * std::max(1.0, std::abs(j(r, k))));
        }
    }
}

TEST_CASE("gradient vanishes at the target on noise-free data") {
    const PopulationSpec s = default_population_spec();
    const Dataset d = generate_dataset(s, 0, 1);
    const Vector g = QuadraticLoss{}.bind(d)->gradient(s.target_model);
    CHECK(norm_sq(g) < 1e-24);
}

TEST_CASE("empty datasets and mismatched models are rejected") {
    const QuadraticLoss loss;
    CHECK_THROWS(averaged_gradient(Dataset{}, {0.0, 0.0}, loss));
    const Dataset d = noisy_dataset(0);
    CHECK_THROWS(loss.bind(d)->gradient({0.0}));
}

}
