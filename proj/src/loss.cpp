#include "stfl/loss.hpp"

#include <stdexcept>

namespace stfl {

namespace {

void require_same_dimension(const DataPoint& point, const ModelVector& model) {
    if (point.x.size() != model.size()) {
        throw std::invalid_argument("dimension mismatch: point has " + std::to_string(point.x.size()) +
                                    " features, model has " + std::to_string(model.size()));
    }
}

class PointwiseObjective final : public LocalObjective {
public:
    PointwiseObjective(const LossModel& loss, const Dataset& dataset) : loss_(loss), dataset_(dataset) {}

    ModelVector gradient(const ModelVector& model) const override {
        return averaged_gradient(dataset_, model, loss_);
    }
    Matrix jacobian(const ModelVector& model) const override { return loss_.jacobian(dataset_, model); }
    std::size_t dimension() const override { return dataset_.dimension(); }

private:
    const LossModel& loss_;
    const Dataset& dataset_;
};

class QuadraticObjective final : public LocalObjective {
public:
    explicit QuadraticObjective(const Dataset& dataset)
        : jacobian_(empirical_jacobian(dataset)), offset_(dataset.dimension(), 0.0) {
        for (const auto& p : dataset.points) {
            axpy(p.y, p.x, offset_);
        }
        const double inv = 1.0 / static_cast<double>(dataset.size());
        for (auto& v : offset_) {
            v *= inv;
        }
    }

    ModelVector gradient(const ModelVector& model) const override {
        if (model.size() != offset_.size()) {
            throw std::invalid_argument("dimension mismatch between model and dataset");
        }
        ModelVector g = matvec(jacobian_, model);
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] -= offset_[i];
        }
        return g;
    }
    Matrix jacobian(const ModelVector&) const override { return jacobian_; }
    std::size_t dimension() const override { return offset_.size(); }

private:
    Matrix jacobian_;
    Vector offset_;
};

} // namespace

std::unique_ptr<LocalObjective> LossModel::bind(const Dataset& dataset) const {
    return std::make_unique<PointwiseObjective>(*this, dataset);
}

double quadratic_loss(const DataPoint& point, const ModelVector& model) {
    require_same_dimension(point, model);
    const double r = point.y - dot(model, point.x);
    return 0.5 * r * r;
}

ModelVector quadratic_gradient(const DataPoint& point, const ModelVector& model) {
    require_same_dimension(point, model);
    const double r = dot(model, point.x) - point.y;
    ModelVector g(point.x.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = r * point.x[i];
    }
    return g;
}

double QuadraticLoss::loss(const DataPoint& point, const ModelVector& model) const {
    return quadratic_loss(point, model);
}

ModelVector QuadraticLoss::gradient_at_point(const DataPoint& point, const ModelVector& model) const {
    return quadratic_gradient(point, model);
}

Matrix QuadraticLoss::jacobian(const Dataset& dataset, const ModelVector& model) const {
    if (dataset.dimension() != model.size()) {
        throw std::invalid_argument("dimension mismatch between model and dataset");
    }
    return empirical_jacobian(dataset);
}

std::unique_ptr<LocalObjective> QuadraticLoss::bind(const Dataset& dataset) const {
    if (dataset.points.empty()) {
        throw std::invalid_argument("cannot bind a loss to an empty dataset");
    }
    return std::make_unique<QuadraticObjective>(dataset);
}

ModelVector averaged_gradient(const Dataset& dataset, const ModelVector& model, const LossModel& loss) {
    if (dataset.points.empty()) {
        throw std::invalid_argument("averaged_gradient: dataset is empty");
    }
    ModelVector sum(model.size(), 0.0);
    for (const auto& p : dataset.points) {
        axpy(1.0, loss.gradient_at_point(p, model), sum);
    }
    const double inv = 1.0 / static_cast<double>(dataset.size());
    for (auto& v : sum) {
        v *= inv;
    }
    return sum;
}

} // namespace stfl
