#include "coteach/learner.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "coteach/errors.hpp"

namespace coteach {

namespace {

constexpr double kMaxHessianCondition = 1e12;

double primal_value(LossKind kind, const Eigen::Ref<const Eigen::MatrixXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& y, double lambda,
                    const Eigen::VectorXd& theta)
{
    const Eigen::VectorXd u = x * theta;
    double total = 0.0;
    for (Eigen::Index j = 0; j < u.size(); ++j) total += loss_at(kind, u(j), y(j));
    return total + 0.5 * lambda * theta.squaredNorm();
}

}  // namespace

Eigen::VectorXd primal_gradient(LossKind kind, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& y, double lambda,
                                const Eigen::Ref<const Eigen::VectorXd>& theta)
{
    const Eigen::VectorXd u = x * theta;
    Eigen::VectorXd r(u.size());
    for (Eigen::Index j = 0; j < u.size(); ++j) {
        r(j) = kind == LossKind::squared ? u(j) - y(j) : -y(j) * sigmoid(-y(j) * u(j));
    }
    return x.transpose() * r + lambda * theta;
}

ModelParams fit_primal(LossKind kind, const Eigen::Ref<const Eigen::MatrixXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y, double lambda,
                       const FitOptions& opts)
{
    if (!(lambda > 0)) throw ParameterError("fit_primal: lambda must be > 0");
    if (x.rows() != y.size()) throw ParameterError("fit_primal: feature/label count mismatch");
    const auto d = x.cols();
    ModelParams out;
    out.theta = Eigen::VectorXd::Zero(d);
    if (x.rows() == 0) return out;

    if (kind == LossKind::squared) {
        Eigen::MatrixXd a = x.transpose() * x;
        a.diagonal().array() += lambda;
        out.theta = a.ldlt().solve(x.transpose() * y);
        out.grad_norm = primal_gradient(kind, x, y, lambda, out.theta).norm();
        out.iterations = 1;
        if (!out.theta.allFinite()) throw NumericError("fit_primal: non-finite ridge solution");
        return out;
    }

    Eigen::VectorXd& theta = out.theta;
    Eigen::VectorXd grad = primal_gradient(kind, x, y, lambda, theta);
    double value = primal_value(kind, x, y, lambda, theta);
    Eigen::MatrixXd hess(d, d);
    Eigen::VectorXd weights(x.rows());
    Eigen::LDLT<Eigen::MatrixXd> ldlt;

    for (std::size_t it = 0; it < opts.max_iter; ++it) {
        out.grad_norm = grad.norm();
        out.iterations = it;
        if (out.grad_norm <= opts.tol) return out;

        const Eigen::VectorXd u = x * theta;
        for (Eigen::Index j = 0; j < u.size(); ++j) {
            const double s = sigmoid(y(j) * u(j));
            weights(j) = s * (1.0 - s);
        }
        hess.noalias() = x.transpose() * weights.asDiagonal() * x;
        hess.diagonal().array() += lambda;
        ldlt.compute(hess);
        const auto diag = ldlt.vectorD();
        const bool well_conditioned = ldlt.info() == Eigen::Success && diag.minCoeff() > 0 &&
                                      diag.maxCoeff() / diag.minCoeff() <= kMaxHessianCondition;
        Eigen::VectorXd step = well_conditioned ? Eigen::VectorXd(-ldlt.solve(grad))
                                                : Eigen::VectorXd(-grad / (0.25 * x.squaredNorm() + lambda));

        const double slope = grad.dot(step);
        if (well_conditioned && -slope <= 1e-10 * std::max(1.0, std::abs(value))) {
            // decrement below what the objective can resolve; full Newton step
            theta += step;
            value = primal_value(kind, x, y, lambda, theta);
            grad = primal_gradient(kind, x, y, lambda, theta);
            if (!theta.allFinite()) throw NumericError("fit_primal: non-finite Newton iterate");
            continue;
        }

        // Armijo backtracking on the primal objective.
        double t = 1.0;
        Eigen::VectorXd candidate;
        double cand_value = value;
        for (int ls = 0; ls < 60; ++ls) {
            candidate = theta + t * step;
            cand_value = primal_value(kind, x, y, lambda, candidate);
            if (cand_value <= value + 1e-4 * t * slope) break;
            t *= 0.5;
        }
        if (!(cand_value <= value)) break;
        theta = candidate;
        value = cand_value;
        grad = primal_gradient(kind, x, y, lambda, theta);
        if (!theta.allFinite()) throw NumericError("fit_primal: non-finite Newton iterate");
    }
    out.grad_norm = grad.norm();
    if (out.grad_norm <= opts.tol) return out;
    throw ConvergenceError("fit_primal: no convergence after " + std::to_string(opts.max_iter) +
                               " iterations, gradient norm " + std::to_string(out.grad_norm),
                           out.grad_norm);
}

ModelParams fit_primal(const Dataset& data, double lambda, const FitOptions& opts)
{
    return fit_primal(loss_for(data.task), data.x, data.y, lambda, opts);
}

Risk teaching_risk(const Eigen::Ref<const Eigen::VectorXd>& theta_hat,
                   const Eigen::Ref<const Eigen::VectorXd>& theta_star)
{
    if (theta_hat.size() != theta_star.size()) throw ParameterError("teaching_risk: dimension mismatch");
    Risk r;
    const double sq = (theta_hat - theta_star).squaredNorm();
    r.euclid = std::sqrt(sq);
    r.half_sq = 0.5 * sq;
    return r;
}

double consistency_clf(const Eigen::Ref<const Eigen::VectorXd>& theta_hat,
                       const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                       const Eigen::Ref<const Eigen::MatrixXd>& x)
{
    if (x.rows() == 0) throw ParameterError("consistency_clf: empty dataset");
    const Eigen::VectorXd a = x * theta_hat;
    const Eigen::VectorXd b = x * theta_star;
    Eigen::Index agree = 0;
    for (Eigen::Index j = 0; j < a.size(); ++j) agree += (a(j) >= 0) == (b(j) >= 0);
    return static_cast<double>(agree) / static_cast<double>(a.size());
}

double rsquare(const Eigen::Ref<const Eigen::VectorXd>& reference,
               const Eigen::Ref<const Eigen::VectorXd>& candidate)
{
    if (reference.size() != candidate.size()) throw ParameterError("rsquare: length mismatch");
    if (reference.size() < 2) throw ParameterError("rsquare: needs at least two examples");
    const double ss_tot = (reference.array() - reference.mean()).square().sum();
    if (!(ss_tot > 0)) throw UndefinedMetricError("rsquare: reference predictions have zero variance");
    const double ss_res = (reference - candidate).squaredNorm();
    return 1.0 - ss_res / ss_tot;
}

double rsquare_reg(const Eigen::Ref<const Eigen::VectorXd>& theta_hat,
                   const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                   const Eigen::Ref<const Eigen::MatrixXd>& x)
{
    return rsquare(x * theta_star, x * theta_hat);
}

double super_teaching_ratio(double risk_subset, double risk_full)
{
    if (!(risk_full > 0)) throw UndefinedMetricError("super_teaching_ratio: full-data risk is zero");
    return risk_subset / risk_full;
}

Metrics evaluate(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& theta_hat,
                 const Eigen::Ref<const Eigen::VectorXd>& theta_star, double risk_full)
{
    Metrics m;
    const Risk r = teaching_risk(theta_hat, theta_star);
    m.risk_euclid = r.euclid;
    m.risk_half_sq = r.half_sq;
    m.rho = data.task == Task::classification ? consistency_clf(theta_hat, theta_star, data.x)
                                              : rsquare_reg(theta_hat, theta_star, data.x);
    m.teaching_ratio = super_teaching_ratio(r.euclid, risk_full);
    return m;
}

void to_json(nlohmann::json& j, const Metrics& m)
{
    j = nlohmann::json{{"risk_euclid", m.risk_euclid},
                       {"risk_half_sq", m.risk_half_sq},
                       {"rho", m.rho},
                       {"teaching_ratio", m.teaching_ratio},
                       {"runtime_seconds", m.runtime_seconds}};
}

void from_json(const nlohmann::json& j, Metrics& m)
{
    j.at("risk_euclid").get_to(m.risk_euclid);
    j.at("risk_half_sq").get_to(m.risk_half_sq);
    j.at("rho").get_to(m.rho);
    j.at("teaching_ratio").get_to(m.teaching_ratio);
    j.at("runtime_seconds").get_to(m.runtime_seconds);
}

}  // namespace coteach
