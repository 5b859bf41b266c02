#include "coteach/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "coteach/learner.hpp"

namespace coteach {

BaselineKind parse_baseline(std::string_view name)
{
    if (name == "oblivious") return BaselineKind::oblivious;
    if (name == "random") return BaselineKind::random;
    if (name == "bruteforce") return BaselineKind::bruteforce;
    throw ParameterError("unknown baseline '" + std::string(name) + "' (expected oblivious|random|bruteforce)");
}

std::string_view to_string(BaselineKind kind) noexcept
{
    switch (kind) {
    case BaselineKind::oblivious: return "oblivious";
    case BaselineKind::random: return "random";
    case BaselineKind::bruteforce: return "bruteforce";
    }
    return "?";
}

namespace {

// Selected indices first (ascending), then the rest (ascending).
void fill_ranking(SelectionResult& sel, const std::vector<TeacherShard>& shards)
{
    std::vector<std::size_t> picked, rest;
    for (std::size_t i = 0; i < shards.size(); ++i)
        for (std::size_t j = 0; j < shards[i].size(); ++j)
            (sel.masks[i][j] ? picked : rest).push_back(shards[i].global_offsets[j]);
    std::sort(picked.begin(), picked.end());
    std::sort(rest.begin(), rest.end());
    sel.global_ranking = std::move(picked);
    sel.global_ranking.insert(sel.global_ranking.end(), rest.begin(), rest.end());
}

}  // namespace

std::vector<TeachingRun> oblivious_runs(const std::vector<TeacherShard>& shards,
                                        const Eigen::Ref<const Eigen::VectorXd>& theta_star, Task task,
                                        const TeachingConfig& config)
{
    if (shards.empty()) throw ParameterError("oblivious_runs: no shards");
    const std::size_t k = shards.size();
    TeachingConfig local = config;
    local.lambda = config.lambda / static_cast<double>(k);
    local.beta.clear();
    local.threads = 1;

    std::vector<TeachingRun> runs;
    runs.reserve(k);
    for (const auto& s : shards) {
        // the teacher sees nothing but its own shard
        std::vector<TeacherShard> solo{s};
        solo.front().teacher_id = 0;
        runs.push_back(run_teaching(solo, theta_star, task, local, {.track_risk = false}));
    }
    return runs;
}

SelectionResult oblivious_select(const std::vector<TeachingRun>& runs, const std::vector<TeacherShard>& shards,
                                 std::size_t per_teacher_budget)
{
    const std::size_t k = shards.size();
    if (runs.size() != k) throw ParameterError("oblivious_select: need one run per teacher");
    std::size_t n = 0;
    for (const auto& s : shards) n += s.size();
    if (per_teacher_budget == 0 || per_teacher_budget * k > n) {
        throw ParameterError("oblivious_select: per-teacher budget " + std::to_string(per_teacher_budget) +
                             " times K exceeds N");
    }

    SelectionResult sel;
    sel.masks.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        std::vector<TeacherShard> solo{shards[i]};
        solo.front().teacher_id = 0;
        const std::size_t take = std::min(per_teacher_budget, shards[i].size());
        sel.masks[i] = select_subset(runs[i].state, solo, take).masks.front();
        sel.budget += take;
    }
    fill_ranking(sel, shards);
    return sel;
}

SelectionResult oblivious_teach(const std::vector<TeacherShard>& shards,
                                const Eigen::Ref<const Eigen::VectorXd>& theta_star, Task task,
                                const TeachingConfig& config, std::size_t per_teacher_budget)
{
    std::size_t n = 0;
    for (const auto& s : shards) n += s.size();
    if (per_teacher_budget == 0 || per_teacher_budget * shards.size() > n) {
        throw ParameterError("oblivious_teach: per-teacher budget " + std::to_string(per_teacher_budget) +
                             " times K exceeds N");
    }
    return oblivious_select(oblivious_runs(shards, theta_star, task, config), shards, per_teacher_budget);
}

SelectionResult random_select(const std::vector<TeacherShard>& shards, std::size_t budget, std::uint64_t seed)
{
    std::vector<std::pair<std::size_t, std::size_t>> slots;
    for (std::size_t i = 0; i < shards.size(); ++i)
        for (std::size_t j = 0; j < shards[i].size(); ++j) slots.emplace_back(i, j);
    if (budget > slots.size()) throw ParameterError("random_select: budget exceeds N");

    std::mt19937_64 rng(seed);
    std::shuffle(slots.begin(), slots.end(), rng);
    SelectionResult sel;
    sel.budget = budget;
    sel.masks.resize(shards.size());
    for (std::size_t i = 0; i < shards.size(); ++i) sel.masks[i].assign(shards[i].size(), 0);
    for (std::size_t r = 0; r < budget; ++r) sel.masks[slots[r].first][slots[r].second] = 1;
    fill_ranking(sel, shards);
    return sel;
}

std::size_t subset_count(std::size_t n, std::size_t budget, std::size_t limit)
{
    if (budget > n) return 0;
    budget = std::min(budget, n - budget);
    // C(n, r) built as a running product; each prefix is itself a binomial.
    unsigned __int128 c = 1;
    for (std::size_t r = 1; r <= budget; ++r) {
        c = c * (n - budget + r) / r;
        if (c > limit) return limit + 1;
    }
    return static_cast<std::size_t>(c);
}

BruteForceResult brute_force_select(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                                    double lambda, std::size_t budget)
{
    const std::size_t n = data.size();
    if (budget == 0 || budget > n) throw ParameterError("brute_force_select: budget outside [1, N]");
    const std::size_t count = subset_count(n, budget);
    if (count > kBruteForceLimit) {
        const double log10_count = (std::lgamma(n + 1.0) - std::lgamma(budget + 1.0) - std::lgamma(n - budget + 1.0)) / std::log(10.0);
        constexpr std::size_t exact_limit = 1'000'000'000'000'000'000ULL;
        const std::size_t exact = subset_count(n, budget, exact_limit);
        char approx[64];
        if (exact <= exact_limit) {
            std::snprintf(approx, sizeof(approx), "%zu", exact);
        } else {
            std::snprintf(approx, sizeof(approx), "%.3ge%d", std::pow(10.0, log10_count - std::floor(log10_count)),
                          static_cast<int>(std::floor(log10_count)));
        }
        throw RefusalError("brute_force_select: C(" + std::to_string(n) + ", " + std::to_string(budget) + ") = " +
                           approx + " subsets exceeds the limit of " + std::to_string(kBruteForceLimit));
    }

    const auto kind = loss_for(data.task);
    std::vector<std::size_t> idx(budget);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(budget), data.x.cols());
    Eigen::VectorXd ys(static_cast<Eigen::Index>(budget));

    BruteForceResult best;
    best.best_risk = std::numeric_limits<double>::infinity();
    while (true) {
        for (std::size_t r = 0; r < budget; ++r) {
            xs.row(static_cast<Eigen::Index>(r)) = data.x.row(static_cast<Eigen::Index>(idx[r]));
            ys(static_cast<Eigen::Index>(r)) = data.y(static_cast<Eigen::Index>(idx[r]));
        }
        const double risk = teaching_risk(fit_primal(kind, xs, ys, lambda).theta, theta_star).euclid;
        ++best.evaluated;
        // Lexicographic enumeration order makes strict < keep the smallest set on ties.
        if (risk < best.best_risk) {
            best.best_risk = risk;
            best.best = idx;
        }
        // next combination
        std::size_t pos = budget;
        while (pos > 0 && idx[pos - 1] == n - budget + pos - 1) --pos;
        if (pos == 0) break;
        ++idx[pos - 1];
        for (std::size_t r = pos; r < budget; ++r) idx[r] = idx[r - 1] + 1;
    }
    return best;
}

Theorem1Report check_theorem1(const std::vector<TeacherShard>& shards,
                              const Eigen::Ref<const Eigen::VectorXd>& theta_star, Task task,
                              double lambda, const std::vector<std::vector<std::uint8_t>>& subsets)
{
    const std::size_t k = shards.size();
    if (k == 0 || subsets.size() != k) throw ParameterError("check_theorem1: need one subset mask per teacher");
    const auto kind = loss_for(task);
    FitOptions fit;
    fit.tol = 1e-8;
    fit.max_iter = 500;

    Theorem1Report rep;
    double sum_local = 0.0;
    std::vector<Dataset> parts;
    for (std::size_t i = 0; i < k; ++i) {
        if (subsets[i].size() != shards[i].size()) {
            throw ParameterError("check_theorem1: mask " + std::to_string(i) + " does not match its shard");
        }
        std::vector<std::size_t> local;
        for (std::size_t j = 0; j < subsets[i].size(); ++j)
            if (subsets[i][j]) local.push_back(j);
        parts.push_back(shards[i].data.subset(local));
        const auto m = fit_primal(kind, parts.back().x, parts.back().y, lambda / static_cast<double>(k), fit);
        rep.max_fit_grad_norm = std::max(rep.max_fit_grad_norm, m.grad_norm);
        sum_local += teaching_risk(m.theta, theta_star).half_sq;
        rep.tau = std::max(rep.tau, smoothness_bound(kind, parts.back().x));
    }

    Dataset all;
    all.task = task;
    Eigen::Index rows = 0;
    for (const auto& p : parts) rows += p.x.rows();
    all.x.resize(rows, theta_star.size());
    all.y.resize(rows);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        all.x.middleRows(at, p.x.rows()) = p.x;
        all.y.segment(at, p.y.size()) = p.y;
        at += p.x.rows();
    }
    const auto joint = fit_primal(kind, all.x, all.y, lambda, fit);
    rep.max_fit_grad_norm = std::max(rep.max_fit_grad_norm, joint.grad_norm);

    const double kd = static_cast<double>(k);
    rep.lhs = teaching_risk(joint.theta, theta_star).half_sq;
    rep.rhs_factor = rep.tau / (lambda * kd) + 1.0 / (kd * kd);
    rep.rhs = rep.rhs_factor * sum_local;
    rep.slack = rep.rhs - rep.lhs;
    rep.holds = rep.slack >= 0;
    return rep;
}

}  // namespace coteach
