#include "coteach/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "coteach/baselines.hpp"

namespace coteach {

namespace {

using clock_type = std::chrono::steady_clock;

double elapsed(clock_type::time_point start)
{
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

std::size_t uniform_size(std::mt19937_64& rng, std::size_t lo, std::size_t hi)
{
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Small synthetic instance with an even row count so classification stays balanced.
Dataset small_instance(Task task, std::size_t n, std::size_t d, std::uint64_t seed)
{
    SyntheticSpec spec;
    spec.task = task;
    spec.n = n + (n % 2);
    spec.d = d;
    spec.clusters = 4;
    spec.seed = seed;
    return gen_synthetic(spec);
}

std::vector<Eigen::VectorXd> split_like(const Eigen::VectorXd& flat, const std::vector<TeacherBlock>& blocks)
{
    std::vector<Eigen::VectorXd> out;
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
        const auto n = static_cast<Eigen::Index>(b.size());
        out.emplace_back(flat.segment(at, n));
        at += n;
    }
    return out;
}

Eigen::VectorXd flatten(const std::vector<Eigen::VectorXd>& parts)
{
    Eigen::Index n = 0;
    for (const auto& p : parts) n += p.size();
    Eigen::VectorXd out(n);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.segment(at, p.size()) = p;
        at += p.size();
    }
    return out;
}

}  // namespace

std::size_t SuiteReport::passed() const noexcept
{
    return static_cast<std::size_t>(std::count_if(cases.begin(), cases.end(), [](const CaseResult& c) { return c.pass; }));
}

double SuiteReport::min_slack() const noexcept
{
    double m = std::numeric_limits<double>::infinity();
    for (const auto& c : cases) m = std::min(m, c.slack);
    return m;
}

nlohmann::json SuiteReport::to_json() const
{
    nlohmann::json j;
    j["property"] = property;
    j["pass"] = pass();
    j["passed"] = passed();
    j["total"] = cases.size();
    j["required"] = required;
    j["min_slack"] = cases.empty() ? 0.0 : min_slack();
    j["seconds"] = seconds;
    auto& arr = j["cases"] = nlohmann::json::array();
    for (const auto& c : cases) arr.push_back({{"id", c.id}, {"pass", c.pass}, {"slack", c.slack}, {"detail", c.detail}});
    return j;
}

Property parse_property(std::string_view name)
{
    if (name == "theorem1") return Property::theorem1;
    if (name == "duality") return Property::duality;
    if (name == "gradient") return Property::gradient;
    if (name == "oracle_recovery") return Property::oracle_recovery;
    throw ParameterError("unknown property '" + std::string(name) +
                         "' (expected theorem1|duality|gradient|oracle_recovery)");
}

std::string_view to_string(Property p) noexcept
{
    switch (p) {
    case Property::theorem1: return "theorem1";
    case Property::duality: return "duality";
    case Property::gradient: return "gradient";
    case Property::oracle_recovery: return "oracle_recovery";
    }
    return "?";
}

SuiteReport theorem1_suite(const Theorem1SuiteOptions& opts)
{
    const auto start = clock_type::now();
    SuiteReport rep;
    rep.property = "theorem1";
    rep.required = opts.instances;
    std::mt19937_64 rng(opts.seed);

    for (std::size_t c = 0; c < opts.instances; ++c) {
        const std::size_t k = (c % 2 == 0) ? 2 : 5;
        const Task task = (c / 2) % 2 == 0 ? Task::classification : Task::regression;
        const bool engine_masks = (c / 4) % 2 == 0;
        const std::size_t n = uniform_size(rng, std::max<std::size_t>(4 * k, 20), opts.max_n) & ~std::size_t{1};
        const std::size_t d = uniform_size(rng, 2, opts.max_d);
        const std::uint64_t s = rng();

        const auto data = small_instance(task, n, d, s);
        const auto shards = shard(data, k, s + 1);
        const auto goal = make_target(data, opts.lambda, 1.0, s + 2);

        std::vector<std::vector<std::uint8_t>> masks;
        if (engine_masks) {
            auto cfg = TeachingConfig::defaults_for(task);
            cfg.lambda = opts.lambda;
            cfg.rounds = 30;
            const auto run = run_teaching(shards, goal.theta_star, task, cfg, {.track_risk = false});
            masks = select_subset(run.state, shards, std::max<std::size_t>(1, data.size() * 3 / 10)).masks;
        } else {
            std::bernoulli_distribution coin(0.5);
            for (const auto& sh : shards) {
                auto& m = masks.emplace_back(sh.size());
                for (auto& b : m) b = coin(rng) ? 1 : 0;
            }
        }

        const auto r = check_theorem1(shards, goal.theta_star, task, opts.lambda, masks);
        CaseResult cr;
        cr.id = "case-" + std::to_string(c);
        cr.pass = r.holds;
        cr.slack = r.slack;
        cr.detail = {{"task", std::string(to_string(task))},
                     {"n", data.size()},
                     {"d", d},
                     {"k", k},
                     {"masks", engine_masks ? "engine" : "random"},
                     {"lhs", r.lhs},
                     {"rhs", r.rhs},
                     {"rhs_factor", r.rhs_factor},
                     {"tau", r.tau},
                     {"max_fit_grad_norm", r.max_fit_grad_norm}};
        rep.cases.push_back(std::move(cr));
    }
    rep.seconds = elapsed(start);
    return rep;
}

SuiteReport duality_suite(const DualitySuiteOptions& opts)
{
    const auto start = clock_type::now();
    SuiteReport rep;
    rep.property = "duality";
    rep.required = 2 * opts.instances_per_loss;
    std::mt19937_64 rng(opts.seed);

    for (const Task task : {Task::classification, Task::regression}) {
        for (std::size_t c = 0; c < opts.instances_per_loss; ++c) {
            const std::size_t n = uniform_size(rng, 20, opts.max_n);
            const std::size_t d = uniform_size(rng, 2, opts.max_d);
            const auto data = small_instance(task, n, d, rng());
            const auto shards = shard(data, 1, 0);

            TeachingConfig cfg;
            cfg.lambda = opts.lambda;
            cfg.lambda_alpha = 0.0;
            cfg.lambda_theta = 0.0;
            cfg.rounds = 50;
            cfg.inner_max_iter = 2000;
            cfg.inner_tol = 1e-14;
            cfg.outer_tol = 1e-15;
            const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
            const auto run = run_teaching(shards, zero, task, cfg, {.track_risk = false});

            FitOptions fit;
            fit.tol = 1e-10;
            const auto primal = fit_primal(data, opts.lambda, fit).theta;
            const double rel = (run.state.theta_tilde - primal).norm() / std::max(primal.norm(), 1e-300);

            CaseResult cr;
            cr.id = std::string(to_string(task)) + "-" + std::to_string(c);
            cr.pass = rel <= opts.tolerance;
            cr.slack = opts.tolerance - rel;
            cr.detail = {{"n", data.size()}, {"d", d}, {"relative_error", rel}, {"rounds", run.trace.rounds_used()}};
            rep.cases.push_back(std::move(cr));
        }
    }
    rep.seconds = elapsed(start);
    return rep;
}

SuiteReport gradient_suite(const GradientSuiteOptions& opts)
{
    const auto start = clock_type::now();
    SuiteReport rep;
    rep.property = "gradient";
    rep.required = 2 * opts.points_per_loss;
    std::mt19937_64 rng(opts.seed);

    for (const Task task : {Task::classification, Task::regression}) {
        const auto data = small_instance(task, 40, 5, rng());
        const auto shards = shard(data, 2, 7);
        const auto blocks = prepare_blocks(shards);
        const auto goal = make_target(data, 1.0, 1.0, 11);
        const auto cfg = TeachingConfig::defaults_for(task);

        std::uniform_real_distribution<double> unit(0.05, 0.95);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t c = 0; c < opts.points_per_loss; ++c) {
            Eigen::VectorXd a(static_cast<Eigen::Index>(data.size()));
            for (Eigen::Index j = 0; j < a.size(); ++j) a(j) = task == Task::classification ? unit(rng) : normal(rng);

            const Eigen::VectorXd g = flatten(smooth_gradient(split_like(a, blocks), blocks, goal.theta_star, cfg));
            Eigen::VectorXd fd(a.size());
            for (Eigen::Index j = 0; j < a.size(); ++j) {
                Eigen::VectorXd up = a, down = a;
                up(j) += opts.h;
                down(j) -= opts.h;
                fd(j) = (smooth_objective(split_like(up, blocks), blocks, goal.theta_star, cfg) -
                         smooth_objective(split_like(down, blocks), blocks, goal.theta_star, cfg)) /
                        (2.0 * opts.h);
            }
            const double rel = (g - fd).norm() / std::max(g.norm(), 1e-300);

            CaseResult cr;
            cr.id = std::string(to_string(task)) + "-" + std::to_string(c);
            cr.pass = rel <= opts.tolerance;
            cr.slack = opts.tolerance - rel;
            cr.detail = {{"relative_error", rel}, {"gradient_norm", g.norm()}};
            rep.cases.push_back(std::move(cr));
        }
    }
    rep.seconds = elapsed(start);
    return rep;
}

PlantedInstance make_planted(const PlantedSpec& spec, double lambda)
{
    if (spec.support == 0 || spec.support > spec.n) throw ParameterError("make_planted: support outside [1, n]");
    if (!(spec.alpha_low > 0) || spec.alpha_high < spec.alpha_low) throw ParameterError("make_planted: bad alpha range");
    if (spec.task == Task::classification && spec.alpha_high > 1.0) {
        throw ParameterError("make_planted: classification needs alpha* <= 1");
    }
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> mag(spec.alpha_low, spec.alpha_high);
    std::bernoulli_distribution coin(0.5);

    const auto n = static_cast<Eigen::Index>(spec.n);
    const auto d = static_cast<Eigen::Index>(spec.d);
    PlantedInstance out;
    out.data.task = spec.task;
    out.data.x.resize(n, d);
    out.data.y.resize(n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < d; ++k) out.data.x(j, k) = normal(rng);
    out.data.y = Eigen::VectorXd::Zero(n);
    if (spec.task == Task::classification) {
        for (Eigen::Index j = 0; j < n; ++j) out.data.y(j) = coin(rng) ? 1.0 : -1.0;
    }

    std::vector<std::size_t> idx(spec.n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    out.support.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(spec.support));
    std::sort(out.support.begin(), out.support.end());

    out.alpha_star = Eigen::VectorXd::Zero(n);
    out.theta_star = Eigen::VectorXd::Zero(d);
    for (const auto j : out.support) {
        const auto jj = static_cast<Eigen::Index>(j);
        double a = mag(rng);
        if (spec.task == Task::regression && coin(rng)) a = -a;
        out.alpha_star(jj) = a;
        const double sign = spec.task == Task::classification ? out.data.y(jj) : 1.0;
        out.theta_star += (a * sign / lambda) * out.data.x.row(jj).transpose();
    }
    // ridge dual optimum is the residual y - x theta, so alpha* is exactly the learner's dual solution
    if (spec.task == Task::regression) out.data.y = out.alpha_star + out.data.x * out.theta_star;
    return out;
}

TeachingConfig OracleSuiteOptions::oracle_defaults()
{
    TeachingConfig cfg;
    cfg.lambda = 1.0;
    cfg.lambda_theta = 1e3;
    cfg.lambda_alpha = 0.1;
    cfg.rounds = 100;
    return cfg;
}

SuiteReport oracle_recovery_suite(const OracleSuiteOptions& opts)
{
    const auto start = clock_type::now();
    SuiteReport rep;
    rep.property = "oracle_recovery";
    rep.required = opts.required;
    std::mt19937_64 rng(opts.seed);

    for (std::size_t t = 0; t < opts.trials; ++t) {
        PlantedSpec spec = opts.planted;
        spec.seed = rng();
        const auto inst = make_planted(spec, opts.config.lambda);
        const auto shards = shard(inst.data, spec.k, spec.seed + 1);
        const auto run = run_teaching(shards, inst.theta_star, spec.task, opts.config, {.track_risk = false});
        const auto sel = select_subset(run.state, shards, spec.support);
        const auto picked = sel.selected_indices(shards);

        // margin between the weakest planted |alpha| and the strongest outsider
        Eigen::VectorXd mags(static_cast<Eigen::Index>(spec.n));
        for (std::size_t i = 0; i < shards.size(); ++i)
            for (std::size_t j = 0; j < shards[i].size(); ++j)
                mags(static_cast<Eigen::Index>(shards[i].global_offsets[j])) =
                    std::abs(run.state.alpha[i](static_cast<Eigen::Index>(j)));
        double in_min = std::numeric_limits<double>::infinity();
        double out_max = 0.0;
        for (Eigen::Index j = 0; j < mags.size(); ++j) {
            const bool planted = std::binary_search(inst.support.begin(), inst.support.end(), static_cast<std::size_t>(j));
            if (planted) in_min = std::min(in_min, mags(j));
            else out_max = std::max(out_max, mags(j));
        }

        CaseResult cr;
        cr.id = "trial-" + std::to_string(t);
        cr.pass = picked == inst.support;
        cr.slack = in_min - out_max;
        cr.detail = {{"support", inst.support},
                     {"selected", picked},
                     {"monotone", run.trace.monotone(1e-9)},
                     {"final_objective", run.trace.rounds.empty() ? run.trace.initial_objective
                                                                  : run.trace.rounds.back().objective}};
        rep.cases.push_back(std::move(cr));
    }
    rep.seconds = elapsed(start);
    return rep;
}

SuiteReport run_suite(Property p)
{
    switch (p) {
    case Property::theorem1: return theorem1_suite();
    case Property::duality: return duality_suite();
    case Property::gradient: return gradient_suite();
    case Property::oracle_recovery: return oracle_recovery_suite();
    }
    throw ParameterError("unknown property");
}

}  // namespace coteach
