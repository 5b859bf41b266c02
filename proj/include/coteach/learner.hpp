#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include "coteach/dataset.hpp"
#include "coteach/losses.hpp"

namespace coteach {

struct ModelParams {
    Eigen::VectorXd theta;
    std::size_t iterations = 0;
    double grad_norm = 0.0;  // final gradient norm of the primal objective
};

struct FitOptions {
    double tol = 1e-8;
    std::size_t max_iter = 200;
};

/// argmin_theta sum_j loss(theta, x_j, y_j) + (lambda/2)||theta||^2.
/// Squared loss uses the normal equations directly; logistic uses damped
/// Newton and falls back to a gradient step when the Hessian condition number
/// exceeds 1e12. An empty subset returns theta = 0.
ModelParams fit_primal(LossKind kind, const Eigen::Ref<const Eigen::MatrixXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y, double lambda,
                       const FitOptions& opts = {});

ModelParams fit_primal(const Dataset& data, double lambda, const FitOptions& opts = {});

/// Gradient of the summed primal objective; used for convergence diagnostics.
Eigen::VectorXd primal_gradient(LossKind kind, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& y, double lambda,
                                const Eigen::Ref<const Eigen::VectorXd>& theta);

struct Risk {
    double euclid = 0.0;   // ||theta_hat - theta_star||
    double half_sq = 0.0;  // 0.5 ||theta_hat - theta_star||^2
};

Risk teaching_risk(const Eigen::Ref<const Eigen::VectorXd>& theta_hat,
                   const Eigen::Ref<const Eigen::VectorXd>& theta_star);

/// Fraction of rows where sign<theta_hat,x> == sign<theta_star,x>, sign(0) = +1.
double consistency_clf(const Eigen::Ref<const Eigen::VectorXd>& theta_hat,
                       const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                       const Eigen::Ref<const Eigen::MatrixXd>& x);

/// 1 - SS_res / SS_tot with `reference` as the ground series.
double rsquare(const Eigen::Ref<const Eigen::VectorXd>& reference,
               const Eigen::Ref<const Eigen::VectorXd>& candidate);

double rsquare_reg(const Eigen::Ref<const Eigen::VectorXd>& theta_hat,
                   const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                   const Eigen::Ref<const Eigen::MatrixXd>& x);

double super_teaching_ratio(double risk_subset, double risk_full);

struct Metrics {
    double risk_euclid = 0.0;
    double risk_half_sq = 0.0;
    double rho = 0.0;
    double teaching_ratio = 0.0;
    double runtime_seconds = 0.0;
};

/// Risk and rho of `theta_hat` on the whole dataset. `risk_full` is the
/// Euclidean risk of the full-data model, used for the teaching ratio.
Metrics evaluate(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& theta_hat,
                 const Eigen::Ref<const Eigen::VectorXd>& theta_star, double risk_full);

void to_json(nlohmann::json& j, const Metrics& m);
void from_json(const nlohmann::json& j, Metrics& m);

}  // namespace coteach
