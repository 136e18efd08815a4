#include <doctest.h>

#include <cmath>
#include <thread>
#include <vector>

#include "stfl/datagen.hpp"
#include "support.hpp"

using namespace stfl;

namespace {

PopulationSpec small_spec(std::size_t n = 50) {
    PopulationSpec s = default_population_spec();
    s.population_size = 200;
    s.dataset_size = n;
    return s;
}

} // namespace

TEST_SUITE("datagen") {

TEST_CASE("default population matches the published mixture") {
    const PopulationSpec s = default_population_spec();
    CHECK(s.population_size == 10000);
    CHECK(s.dataset_size == 100);
    REQUIRE(s.mixture.size() == 2);
    CHECK(s.mixture[0].mean == Vector{1.0, 1.0});
    CHECK(s.mixture[1].mean == Vector{2.2, 1.8});
    CHECK(s.mixture[0].covariance == Matrix::from_rows({{1.0, 1.25}, {1.25, 3.0}}));
    CHECK(s.mixture[1].covariance == Matrix::from_rows({{2.0, 1.75}, {1.75, 2.0}}));
    CHECK(norm_sq(s.target_model) == doctest::Approx(1.0));
    CHECK_NOTHROW(s.validate());
    CHECK(zero_mean_population(s).mixture[1].mean == Vector{0.0, 0.0});
}

TEST_CASE("validation rejects malformed populations") {
    PopulationSpec s = small_spec();
    s.mixture[0].probability = 0.6;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = small_spec();
    s.mixture[1].covariance = Matrix::from_rows({{1.0, 2.0}, {2.0, 1.0}});
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = small_spec();
    s.target_model = {1.0};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = small_spec();
    s.dataset_size = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = small_spec();
    s.label_noise_std = -1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("datasets are a pure function of spec, id and seed") {
    const PopulationSpec s = small_spec();
    const Dataset a = generate_dataset(s, 17, 5);
    const Dataset b = generate_dataset(s, 17, 5);
    REQUIRE(a.size() == 50);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.points[i].x == b.points[i].x);
        CHECK(a.points[i].y == b.points[i].y);
    }
    CHECK(generate_dataset(s, 17, 6).points[0].x != a.points[0].x);
    CHECK(generate_dataset(s, 18, 5).points[0].x != a.points[0].x);
    CHECK_THROWS_AS(generate_dataset(s, 200, 5), std::out_of_range);
}

TEST_CASE("labels follow the target model exactly without noise") {
    const PopulationSpec s = small_spec();
    const Dataset d = generate_dataset(s, 3, 1);
    for (const auto& p : d.points) {
        CHECK(p.y == dot(s.target_model, p.x));
    }
}

TEST_CASE("features do not depend on the label noise level") {
    PopulationSpec s = small_spec();
    const Dataset clean = generate_dataset(s, 4, 2);
    s.label_noise_std = 0.5;
    const Dataset noisy = generate_dataset(s, 4, 2);
    double resid = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        CHECK(clean.points[i].x == noisy.points[i].x);
        resid += std::pow(noisy.points[i].y - clean.points[i].y, 2);
    }
    CHECK(resid > 0.0);
}

TEST_CASE("sample moments approach the component moments") {
    PopulationSpec s = small_spec(40000);
    for (std::size_t id = 0; id < 6; ++id) {
        const Dataset d = generate_dataset(s, id, 3);
        const auto& comp = s.mixture[d.class_label];
        Vector mean(2, 0.0);
        for (const auto& p : d.points) {
            axpy(1.0 / d.size(), p.x, mean);
        }
        for (std::size_t k = 0; k < 2; ++k) {
            const double se = std::sqrt(comp.covariance(k, k) / d.size());
            CHECK(std::abs(mean[k] - comp.mean[k]) < 5.0 * se);
        }
        const Matrix m2 = analytic_second_moment(comp);
        CHECK(frobenius_norm(d.second_moment - m2) < 0.1 * frobenius_norm(m2));
    }
}

TEST_CASE("empirical Jacobian and analytic second moment by hand") {
    Dataset d;
    d.points = {{{1.0, 0.0}, 0.0}, {{1.0, 2.0}, 0.0}};
    CHECK(empirical_jacobian(d) == Matrix::from_rows({{1.0, 1.0}, {1.0, 2.0}}));
    const MixtureComponent c{{1.0, 2.0}, Matrix::identity(2), 1.0};
    CHECK(analytic_second_moment(c) == Matrix::from_rows({{2.0, 2.0}, {2.0, 5.0}}));
    CHECK_THROWS(empirical_jacobian(Dataset{}));
}

TEST_CASE("class labels split in the mixture proportions") {
    const PopulationSpec s = default_population_spec();
    std::size_t class0 = 0;
    for (std::size_t m = 0; m < s.population_size; ++m) {
        class0 += draw_class_label(s, m, 1) == 0 ? 1 : 0;
    }
    const double n = static_cast<double>(s.population_size);
    CHECK(std::abs(class0 - 0.5 * n) < 5.0 * std::sqrt(n * 0.25));
    for (std::size_t m = 0; m < 50; ++m) {
        CHECK(draw_class_label(s, m, 1) == generate_dataset(s, m, 1).class_label);
    }
}

TEST_CASE("dataset cache builds each dataset once and shares it across threads") {
    DatasetCache cache(small_spec(), 9);
    std::vector<const Dataset*> seen(8, nullptr);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < seen.size(); ++w) {
        pool.emplace_back([&, w] { seen[w] = &cache.get(5); });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (const auto* p : seen) {
        CHECK(p == seen.front());
    }
    CHECK(seen.front()->points[0].x == generate_dataset(cache.spec(), 5, 9).points[0].x);
    CHECK_THROWS_AS(cache.get(1000), std::out_of_range);
}

}
