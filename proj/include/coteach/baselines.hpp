#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string_view>
#include <vector>

#include "coteach/dataset.hpp"
#include "coteach/engine.hpp"

namespace coteach {

enum class BaselineKind { oblivious, random, bruteforce };

BaselineKind parse_baseline(std::string_view name);
std::string_view to_string(BaselineKind kind) noexcept;

/// One solo engine run per teacher on its own shard with regularization
/// lambda/K. Nothing crosses shards.
std::vector<TeachingRun> oblivious_runs(const std::vector<TeacherShard>& shards,
                                        const Eigen::Ref<const Eigen::VectorXd>& theta_star, Task task,
                                        const TeachingConfig& config);

/// Each teacher keeps its local top `per_teacher_budget` by |alpha|.
SelectionResult oblivious_select(const std::vector<TeachingRun>& runs, const std::vector<TeacherShard>& shards,
                                 std::size_t per_teacher_budget);

/// oblivious_runs followed by oblivious_select. global_ranking lists the
/// selected indices first.
SelectionResult oblivious_teach(const std::vector<TeacherShard>& shards,
                                const Eigen::Ref<const Eigen::VectorXd>& theta_star, Task task,
                                const TeachingConfig& config, std::size_t per_teacher_budget);

/// Uniform sample of `budget` global indices without replacement.
SelectionResult random_select(const std::vector<TeacherShard>& shards, std::size_t budget,
                              std::uint64_t seed);

struct BruteForceResult {
    std::vector<std::size_t> best;  // ascending indices into the dataset
    double best_risk = 0.0;         // Euclidean
    std::size_t evaluated = 0;
};

inline constexpr std::size_t kBruteForceLimit = 1'000'000;

/// Number of budget-subsets of n, saturating at limit + 1.
std::size_t subset_count(std::size_t n, std::size_t budget, std::size_t limit = kBruteForceLimit);

/// Fits every subset of exactly `budget` examples and keeps the one closest
/// to theta*. Ties go to the lexicographically smallest index set. Refuses
/// with RefusalError when C(N, budget) exceeds the limit.
BruteForceResult brute_force_select(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                                    double lambda, std::size_t budget);

/// Aggregation bound for oblivious teaching:
///   R*(theta_S) <= (tau/(lambda K) + 1/K^2) sum_i R*(theta_{S_i})
/// with half-squared risks, theta_{S_i} fitted with lambda/K and theta_S with
/// lambda, tau the largest per-teacher additive smoothness bound.
struct Theorem1Report {
    double lhs = 0.0;
    double rhs_factor = 0.0;
    double rhs = 0.0;
    bool holds = false;
    double slack = 0.0;
    double tau = 0.0;
    double max_fit_grad_norm = 0.0;  // worst primal gradient norm over all fits
};

Theorem1Report check_theorem1(const std::vector<TeacherShard>& shards,
                              const Eigen::Ref<const Eigen::VectorXd>& theta_star, Task task,
                              double lambda, const std::vector<std::vector<std::uint8_t>>& subsets);

}  // namespace coteach
