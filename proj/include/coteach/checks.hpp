#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "coteach/engine.hpp"

namespace coteach {

// Self-generating property suites. Each case carries a slack: how far the
// measured quantity sits inside its bound (negative means violated).

struct CaseResult {
    std::string id;
    bool pass = false;
    double slack = 0.0;
    nlohmann::json detail = nlohmann::json::object();
};

struct SuiteReport {
    std::string property;
    std::vector<CaseResult> cases;
    std::size_t required = 0;  // passing cases needed for the suite to pass
    double seconds = 0.0;

    std::size_t passed() const noexcept;
    bool pass() const noexcept { return passed() >= required; }
    double min_slack() const noexcept;
    nlohmann::json to_json() const;
};

enum class Property { theorem1, duality, gradient, oracle_recovery };

Property parse_property(std::string_view name);
std::string_view to_string(Property p) noexcept;

struct Theorem1SuiteOptions {
    std::size_t instances = 100;
    std::size_t max_n = 200;
    std::size_t max_d = 10;
    double lambda = 1.0;
    std::uint64_t seed = 1;
};

/// Random instances alternating K in {2,5} and both losses. Even cases use
/// subsets picked by the collaborative engine, odd cases random masks.
SuiteReport theorem1_suite(const Theorem1SuiteOptions& opts = {});

struct DualitySuiteOptions {
    std::size_t instances_per_loss = 5;
    std::size_t max_n = 200;
    std::size_t max_d = 10;
    double lambda = 1.0;
    double tolerance = 1e-4;  // relative error of theta(alpha) against the primal fit
    std::uint64_t seed = 2;
};

/// lambda_theta = lambda_alpha = 0 and K = 1: the dual solve must land on the
/// ridge / logistic primal solution.
SuiteReport duality_suite(const DualitySuiteOptions& opts = {});

struct GradientSuiteOptions {
    std::size_t points_per_loss = 10;
    double h = 1e-6;
    double tolerance = 1e-5;  // ||g - g_fd|| / ||g||
    std::uint64_t seed = 3;
};

SuiteReport gradient_suite(const GradientSuiteOptions& opts = {});

/// Planted support: x_j ~ N(0, I_d), theta* = (1/lambda) sum_{j in A} alpha*_j z_j.
/// Regression labels are y = alpha* + X theta*, which makes alpha* the exact
/// dual solution of the learner. Classification labels are random signs.
struct PlantedSpec {
    Task task = Task::regression;
    std::size_t n = 100;
    std::size_t d = 30;
    std::size_t support = 5;
    std::size_t k = 1;
    double alpha_low = 1.0;  // |alpha*| range; classification needs alpha_high <= 1
    double alpha_high = 2.0;
    std::uint64_t seed = 0;
};

struct PlantedInstance {
    Dataset data;
    Eigen::VectorXd theta_star;
    std::vector<std::size_t> support;  // ascending
    Eigen::VectorXd alpha_star;        // length n, zero off the support
};

PlantedInstance make_planted(const PlantedSpec& spec, double lambda);

struct OracleSuiteOptions {
    PlantedSpec planted;
    std::size_t trials = 20;
    std::size_t required = 18;
    TeachingConfig config = oracle_defaults();
    std::uint64_t seed = 4;

    static TeachingConfig oracle_defaults();
};

/// Top-|support| entries of |alpha| must equal the planted support.
SuiteReport oracle_recovery_suite(const OracleSuiteOptions& opts = {});

SuiteReport run_suite(Property p);

}  // namespace coteach
