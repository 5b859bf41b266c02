#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "coteach/checks.hpp"

using namespace coteach;

TEST_CASE("planted regression support is the exact dual optimum")
{
    PlantedSpec spec;
    spec.seed = 3;
    const double lambda = 1.5;
    const auto inst = make_planted(spec, lambda);
    REQUIRE(inst.support.size() == 5);
    CHECK(std::is_sorted(inst.support.begin(), inst.support.end()));
    CHECK(inst.data.size() == 100);
    CHECK(inst.data.dim() == 30);

    for (std::size_t j = 0; j < 100; ++j) {
        const bool in = std::binary_search(inst.support.begin(), inst.support.end(), j);
        const double a = std::abs(inst.alpha_star(j));
        if (in) CHECK((a >= 1.0 && a <= 2.0));
        else CHECK(a == 0.0);
    }
    // theta* = (1/lambda) X^T alpha*
    CHECK((inst.data.x.transpose() * inst.alpha_star / lambda - inst.theta_star).norm() <= 1e-12);
    // ridge dual optimality: alpha_j = y_j - <theta*, x_j>
    CHECK((inst.data.y - inst.data.x * inst.theta_star - inst.alpha_star).norm() <= 1e-12);
    // and theta* is the ridge fit on the full data
    CHECK((fit_primal(inst.data, lambda).theta - inst.theta_star).norm() <= 1e-9 * inst.theta_star.norm());
}

TEST_CASE("planted spec validation")
{
    PlantedSpec spec;
    spec.task = Task::classification;
    CHECK_THROWS_AS(make_planted(spec, 1.0), ParameterError);
    spec.alpha_high = 0.9;
    spec.alpha_low = 0.5;
    CHECK_NOTHROW(make_planted(spec, 1.0));
    spec.support = 200;
    CHECK_THROWS_AS(make_planted(spec, 1.0), ParameterError);
}

TEST_CASE("small aggregation-bound suite")
{
    Theorem1SuiteOptions o;
    o.instances = 8;
    o.max_n = 60;
    const auto rep = theorem1_suite(o);
    CHECK(rep.cases.size() == 8);
    CHECK(rep.passed() == 8);
    CHECK(rep.pass());
    CHECK(rep.min_slack() >= 0.0);
}

TEST_CASE("small duality suite")
{
    DualitySuiteOptions o;
    o.instances_per_loss = 2;
    o.max_n = 60;
    const auto rep = duality_suite(o);
    CHECK(rep.cases.size() == 4);
    CHECK(rep.pass());
    for (const auto& c : rep.cases) CHECK(c.detail.at("relative_error").get<double>() <= 1e-4);
}

TEST_CASE("small gradient suite")
{
    GradientSuiteOptions o;
    o.points_per_loss = 3;
    const auto rep = gradient_suite(o);
    CHECK(rep.cases.size() == 6);
    CHECK(rep.pass());
}

TEST_CASE("small oracle suite")
{
    OracleSuiteOptions o;
    o.trials = 4;
    o.required = 3;
    const auto rep = oracle_recovery_suite(o);
    CHECK(rep.cases.size() == 4);
    CHECK(rep.pass());
    for (const auto& c : rep.cases) CHECK(c.detail.at("monotone").get<bool>());
}

TEST_CASE("report json")
{
    SuiteReport rep;
    rep.property = "gradient";
    rep.required = 2;
    rep.cases.push_back({"a", true, 0.5, nlohmann::json::object()});
    rep.cases.push_back({"b", false, -0.25, nlohmann::json::object()});
    CHECK(rep.passed() == 1);
    CHECK_FALSE(rep.pass());
    CHECK(rep.min_slack() == -0.25);
    const auto j = rep.to_json();
    CHECK(j.at("property") == "gradient");
    CHECK(j.at("passed") == 1);
    CHECK(j.at("total") == 2);
    CHECK(j.at("required") == 2);
    CHECK(j.at("pass") == false);
    CHECK(j.at("cases").size() == 2);
}

TEST_CASE("property names")
{
    CHECK(parse_property("theorem1") == Property::theorem1);
    CHECK(parse_property("oracle_recovery") == Property::oracle_recovery);
    CHECK(to_string(Property::duality) == "duality");
    CHECK_THROWS_AS(parse_property("convexity"), ParameterError);
}
