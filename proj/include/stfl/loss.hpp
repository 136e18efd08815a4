#pragma once

#include <memory>

#include "stfl/datagen.hpp"
#include "stfl/numerics.hpp"

namespace stfl {

/// A device's averaged objective g_m bound to its dataset. The simulation
/// loop only talks to this interface.
class LocalObjective {
public:
    virtual ~LocalObjective() = default;
    virtual ModelVector gradient(const ModelVector& model) const = 0;
    virtual Matrix jacobian(const ModelVector& model) const = 0;
    virtual std::size_t dimension() const = 0;
};

class LossModel {
public:
    virtual ~LossModel() = default;

    virtual double loss(const DataPoint& point, const ModelVector& model) const = 0;
    virtual ModelVector gradient_at_point(const DataPoint& point, const ModelVector& model) const = 0;
    virtual Matrix jacobian(const Dataset& dataset, const ModelVector& model) const = 0;

    /// Binds the loss to a dataset. The default evaluates averaged_gradient
    /// point by point; losses with sufficient statistics may precompute them.
    /// The dataset must outlive the returned objective.
    virtual std::unique_ptr<LocalObjective> bind(const Dataset& dataset) const;
};

double quadratic_loss(const DataPoint& point, const ModelVector& model);
ModelVector quadratic_gradient(const DataPoint& point, const ModelVector& model);

/// l(S, theta) = (y - theta^T x)^2 / 2.
class QuadraticLoss final : public LossModel {
public:
    double loss(const DataPoint& point, const ModelVector& model) const override;
    ModelVector gradient_at_point(const DataPoint& point, const ModelVector& model) const override;
    Matrix jacobian(const Dataset& dataset, const ModelVector& model) const override;

    /// Precomputes J = (1/n) sum x x^T and b = (1/n) sum y x so the gradient
    /// is J theta - b.
    std::unique_ptr<LocalObjective> bind(const Dataset& dataset) const override;
};

/// Mean of per-point gradients, summed in index order.
ModelVector averaged_gradient(const Dataset& dataset, const ModelVector& model, const LossModel& loss);

} // namespace stfl
