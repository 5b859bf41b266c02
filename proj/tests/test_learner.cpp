#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "coteach/errors.hpp"
#include "coteach/learner.hpp"

using namespace coteach;

namespace {

Eigen::MatrixXd gaussian(int n, int d, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = nd(rng);
    return x;
}

// Plain fixed-step gradient descent on the primal; slow but obviously right.
Eigen::VectorXd gd_oracle(LossKind kind, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda)
{
    const double lip = (kind == LossKind::logistic ? 0.25 : 1.0) * x.squaredNorm() + lambda;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(x.cols());
    for (int it = 0; it < 200000; ++it) {
        Eigen::VectorXd g = lambda * theta;
        for (int i = 0; i < x.rows(); ++i) {
            const double u = x.row(i).dot(theta);
            const double r = kind == LossKind::logistic ? -y(i) / (1.0 + std::exp(y(i) * u)) : u - y(i);
            g += r * x.row(i).transpose();
        }
        theta -= g / lip;
        if (g.norm() < 1e-12) break;
    }
    return theta;
}

}  // namespace

TEST_CASE("ridge fit agrees with gradient descent")
{
    const auto x = gaussian(30, 4, 1);
    Eigen::VectorXd y = x * Eigen::Vector4d(1, -1, 0.5, 2) + 0.1 * gaussian(30, 1, 2).col(0);
    for (double lambda : {0.1, 1.0, 10.0}) {
        const auto fit = fit_primal(LossKind::squared, x, y, lambda);
        const auto oracle = gd_oracle(LossKind::squared, x, y, lambda);
        CHECK((fit.theta - oracle).norm() <= 1e-8 * std::max(1.0, oracle.norm()));
        CHECK(primal_gradient(LossKind::squared, x, y, lambda, fit.theta).norm() <= 1e-8);
    }
}

TEST_CASE("logistic fit agrees with gradient descent")
{
    const auto x = gaussian(40, 3, 3);
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) y(i) = (x(i, 0) + 0.3 * x(i, 2) > 0) ? 1.0 : -1.0;
    for (double lambda : {0.5, 5.0}) {
        const auto fit = fit_primal(LossKind::logistic, x, y, lambda);
        const auto oracle = gd_oracle(LossKind::logistic, x, y, lambda);
        CHECK((fit.theta - oracle).norm() <= 1e-7 * std::max(1.0, oracle.norm()));
        CHECK(fit.grad_norm <= 1e-8);
    }
}

TEST_CASE("fit on an empty subset is zero")
{
    Eigen::MatrixXd x(0, 3);
    Eigen::VectorXd y(0);
    const auto fit = fit_primal(LossKind::logistic, x, y, 1.0);
    CHECK(fit.theta.size() == 3);
    CHECK(fit.theta.isZero());
}

TEST_CASE("fit on separable tiny subsets converges")
{
    Eigen::MatrixXd x(2, 2);
    x << 3, 0, -3, 0.1;
    Eigen::VectorXd y(2);
    y << 1, -1;
    const auto fit = fit_primal(LossKind::logistic, x, y, 0.01);
    CHECK(primal_gradient(LossKind::logistic, x, y, 0.01, fit.theta).norm() <= 1e-8);
    CHECK_THROWS_AS(fit_primal(LossKind::logistic, x, y, 0.0), ParameterError);
}

TEST_CASE("teaching risk")
{
    Eigen::VectorXd a(2), b(2);
    a << 3, 0;
    b << 0, 4;
    const auto r = teaching_risk(a, b);
    CHECK(r.euclid == doctest::Approx(5.0));
    CHECK(r.half_sq == doctest::Approx(12.5));
    CHECK_THROWS_AS(teaching_risk(a, Eigen::VectorXd::Zero(3)), ParameterError);
}

TEST_CASE("consistency by hand")
{
    Eigen::MatrixXd x(4, 2);
    x << 1, 0, 0, 1, -1, 0, 0, 0;
    Eigen::VectorXd t1(2), t2(2);
    t1 << 1, 1;
    t2 << 1, -1;
    // predictions: t1 -> +,+,-,+(zero); t2 -> +,-,-,+(zero)
    CHECK(consistency_clf(t1, t2, x) == doctest::Approx(0.75));
    CHECK(consistency_clf(t1, t1, x) == 1.0);
    CHECK_THROWS_AS(consistency_clf(t1, t2, Eigen::MatrixXd(0, 2)), ParameterError);
}

TEST_CASE("consistency ignores positive rescaling")
{
    const auto x = gaussian(100, 5, 4);
    const auto th = gaussian(1, 5, 5).row(0).transpose().eval();
    const auto ts = gaussian(1, 5, 6).row(0).transpose().eval();
    const double base = consistency_clf(th, ts, x);
    for (double s : {1e-3, 0.5, 7.0, 1e4}) {
        CHECK(consistency_clf(Eigen::VectorXd(s * th), ts, x) == base);
        CHECK(consistency_clf(th, Eigen::VectorXd(s * ts), x) == base);
    }
}

TEST_CASE("rsquare")
{
    Eigen::VectorXd ref(4), cand(4);
    ref << 1, 2, 3, 4;
    CHECK(rsquare(ref, ref) == 1.0);
    cand << 1, 2, 3, 5;
    // SS_res = 1, SS_tot = 5
    CHECK(rsquare(ref, cand) == doctest::Approx(0.8));
    CHECK_THROWS_AS(rsquare(Eigen::VectorXd::Ones(4), cand), UndefinedMetricError);

    const auto x = gaussian(20, 3, 7);
    const auto th = gaussian(1, 3, 8).row(0).transpose().eval();
    CHECK(rsquare_reg(th, th, x) == doctest::Approx(1.0));
}

TEST_CASE("teaching ratio")
{
    CHECK(super_teaching_ratio(0.5, 2.0) == doctest::Approx(0.25));
    CHECK_THROWS_AS(super_teaching_ratio(0.5, 0.0), UndefinedMetricError);
}

TEST_CASE("metrics serialize both ways")
{
    Metrics m;
    m.risk_euclid = 0.125;
    m.risk_half_sq = 0.0078125;
    m.rho = 0.93;
    m.teaching_ratio = 0.4;
    m.runtime_seconds = 1.5;
    nlohmann::json j = m;
    const auto back = j.get<Metrics>();
    CHECK(back.risk_euclid == m.risk_euclid);
    CHECK(back.rho == m.rho);
    CHECK(back.teaching_ratio == m.teaching_ratio);
    CHECK(back.runtime_seconds == m.runtime_seconds);
}

TEST_CASE("evaluate scores against the whole dataset")
{
    Dataset data;
    data.task = Task::classification;
    data.x = gaussian(50, 3, 9);
    data.y = Eigen::VectorXd::Ones(50);
    const auto ts = gaussian(1, 3, 10).row(0).transpose().eval();
    const Eigen::VectorXd th = -ts;
    const auto m = evaluate(data, th, ts, 2.0);
    CHECK(m.risk_euclid == doctest::Approx(2 * ts.norm()));
    CHECK(m.teaching_ratio == doctest::Approx(ts.norm()));
    CHECK(m.rho <= 0.02);  // opposite model disagrees everywhere except exact zeros
}
