#pragma once

#include <Eigen/Core>
#include <limits>
#include <string_view>

namespace coteach {

enum class Task { classification, regression };
enum class LossKind { logistic, squared };

LossKind loss_for(Task task) noexcept;
Task parse_task(std::string_view name);
std::string_view to_string(Task task) noexcept;
std::string_view to_string(LossKind kind) noexcept;

// Box shrink applied to logistic dual variables inside iterative solvers.
inline constexpr double kBoundaryEps = 1e-6;

/// Domain of the conjugate argument `a` (the dual variable).
/// Logistic duals live in [0, 1]; squared-loss duals are unconstrained.
struct ConjugateDomain {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    double boundary_eps = kBoundaryEps;

    static ConjugateDomain of(LossKind kind, double boundary_eps = kBoundaryEps) noexcept;

    bool bounded() const noexcept { return lower > -std::numeric_limits<double>::infinity(); }
    // Projection onto [lower + eps, upper - eps]; identity when unbounded.
    double project_interior(double a) const noexcept;
};

/// Per-example loss: logistic log(1 + exp(-y<theta,x>)), squared 0.5(<theta,x> - y)^2.
double loss(LossKind kind, const Eigen::Ref<const Eigen::VectorXd>& theta,
            const Eigen::Ref<const Eigen::VectorXd>& x, double y);

/// Loss as a function of the linear prediction u = <theta,x>.
double loss_at(LossKind kind, double u, double y) noexcept;

/// Conjugate value l*(-a). Logistic: a log a + (1-a) log(1-a) with 0 log 0 = 0;
/// squared: a^2/2 - a y. Logistic arguments within boundary_eps outside [0,1]
/// are clamped, anything further throws DomainError.
double conjugate(LossKind kind, double a, double y);

/// d/da of conjugate(kind, a, y). Logistic arguments are clamped to
/// [eps, 1 - eps] first so the result is always finite.
double conjugate_grad(LossKind kind, double a, double y);

/// Smoothness constant of the summed loss over the rows of `x`:
/// sum ||x_j||^2 / 4 (logistic) or sum ||x_j||^2 (squared).
double smoothness_bound(LossKind kind, const Eigen::Ref<const Eigen::MatrixXd>& x);

double sigmoid(double t) noexcept;

}  // namespace coteach
