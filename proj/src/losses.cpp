#include "coteach/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coteach/errors.hpp"

namespace coteach {

LossKind loss_for(Task task) noexcept
{
    return task == Task::classification ? LossKind::logistic : LossKind::squared;
}

Task parse_task(std::string_view name)
{
    if (name == "classification" || name == "clf") return Task::classification;
    if (name == "regression" || name == "reg") return Task::regression;
    throw ParameterError("unknown task '" + std::string(name) +
                         "' (expected classification|regression)");
}

std::string_view to_string(Task task) noexcept
{
    return task == Task::classification ? "classification" : "regression";
}

std::string_view to_string(LossKind kind) noexcept
{
    return kind == LossKind::logistic ? "logistic" : "squared";
}

ConjugateDomain ConjugateDomain::of(LossKind kind, double boundary_eps) noexcept
{
    ConjugateDomain dom;
    dom.boundary_eps = boundary_eps;
    if (kind == LossKind::logistic) {
        dom.lower = 0.0;
        dom.upper = 1.0;
    }
    return dom;
}

double ConjugateDomain::project_interior(double a) const noexcept
{
    if (!bounded()) return a;
    return std::clamp(a, lower + boundary_eps, upper - boundary_eps);
}

double sigmoid(double t) noexcept
{
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double loss_at(LossKind kind, double u, double y) noexcept
{
    if (kind == LossKind::squared) {
        const double r = u - y;
        return 0.5 * r * r;
    }
    const double m = y * u;
    // log(1 + exp(-m)) without overflow on either tail
    if (m > 0) return std::log1p(std::exp(-m));
    return -m + std::log1p(std::exp(m));
}

double loss(LossKind kind, const Eigen::Ref<const Eigen::VectorXd>& theta,
            const Eigen::Ref<const Eigen::VectorXd>& x, double y)
{
    if (theta.size() != x.size()) {
        throw ParameterError("loss: theta has dimension " + std::to_string(theta.size()) +
                             " but x has " + std::to_string(x.size()));
    }
    return loss_at(kind, theta.dot(x), y);
}

namespace {

double clamp_logistic(double a, double lo, double hi)
{
    if (!(a >= -kBoundaryEps && a <= 1.0 + kBoundaryEps)) {
        throw DomainError("logistic conjugate argument " + std::to_string(a) +
                          " outside [0, 1]");
    }
    return std::clamp(a, lo, hi);
}

double xlogx(double a) noexcept { return a > 0.0 ? a * std::log(a) : 0.0; }

}  // namespace

double conjugate(LossKind kind, double a, double y)
{
    if (kind == LossKind::squared) return 0.5 * a * a - a * y;
    a = clamp_logistic(a, 0.0, 1.0);
    return xlogx(a) + xlogx(1.0 - a);
}

double conjugate_grad(LossKind kind, double a, double y)
{
    if (kind == LossKind::squared) return a - y;
    a = clamp_logistic(a, kBoundaryEps, 1.0 - kBoundaryEps);
    return std::log(a) - std::log1p(-a);
}

double smoothness_bound(LossKind kind, const Eigen::Ref<const Eigen::MatrixXd>& x)
{
    const double total = x.squaredNorm();
    return kind == LossKind::logistic ? 0.25 * total : total;
}

}  // namespace coteach
