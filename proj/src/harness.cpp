#include "coteach/harness.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>

namespace coteach {

namespace fs = std::filesystem;

namespace {

void put_double(std::ostream& out, double v)
{
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, ptr - buf);
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParameterError("cannot write " + path.string());
    return out;
}

// Runs fn, turning library errors into StageError with the matching exit code.
template <class F>
auto stage(const char* name, std::ostream& log, F&& fn) -> decltype(fn())
{
    log << "stage " << name << '\n';
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const ParameterError& e) {
        throw StageError(name, e.what(), 1);
    } catch (const NumericError& e) {
        throw StageError(name, e.what(), 2);
    } catch (const fs::filesystem_error& e) {
        throw StageError(name, e.what(), 1);
    }
}

void ensure_out_dir(const ExperimentConfig& cfg)
{
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) throw ParameterError("cannot create output directory " + cfg.out.string() + ": " + ec.message());
}

double runtime_value(const ExperimentConfig& cfg, double seconds)
{
    return cfg.timing ? seconds : 0.0;
}

ResultRow make_row(const ExperimentConfig& cfg, const std::string& method, const Prepared& p, std::size_t budget,
                   const Metrics& m, std::size_t rounds, double seconds, std::size_t reals)
{
    ResultRow r;
    r.method = method;
    r.n = p.data.size();
    r.k = p.shards.size();
    r.budget_fraction = static_cast<double>(budget) / static_cast<double>(p.data.size());
    r.risk_euclid = m.risk_euclid;
    r.rho = m.rho;
    r.teaching_ratio = m.teaching_ratio;
    r.rounds_used = rounds;
    r.runtime_seconds = runtime_value(cfg, seconds);
    r.reals_communicated = reals;
    return r;
}

Metrics score_selection(const Prepared& p, const ExperimentConfig& cfg, const SelectionResult& sel)
{
    const auto subset = selected_data(sel, p.shards);
    const auto theta = fit_primal(subset, cfg.teaching.lambda).theta;
    return evaluate(p.data, theta, p.goal.theta_star, p.risk_full);
}

nlohmann::json row_json(const ResultRow& r)
{
    return {{"method", r.method},
            {"n", r.n},
            {"k", r.k},
            {"budget_fraction", r.budget_fraction},
            {"risk_euclid", r.risk_euclid},
            {"rho", r.rho},
            {"teaching_ratio", r.teaching_ratio},
            {"rounds_used", r.rounds_used},
            {"runtime_seconds", r.runtime_seconds},
            {"reals_communicated", r.reals_communicated}};
}

void write_json(const nlohmann::json& j, const fs::path& path)
{
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

void write_rows_json(const std::vector<ResultRow>& rows, const fs::path& path)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) arr.push_back(row_json(r));
    write_json(arr, path);
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults_for(Task task)
{
    ExperimentConfig cfg;
    cfg.task = task;
    cfg.synth.task = task;
    cfg.teaching = TeachingConfig::defaults_for(task);
    return cfg;
}

void ExperimentConfig::validate() const
{
    if (k == 0) throw ParameterError("k must be >= 1");
    if (!(budget_fraction > 0 && budget_fraction <= 1)) throw ParameterError("budget_fraction must be in (0, 1]");
    if (!(noise_ratio >= 0)) throw ParameterError("noise_ratio must be >= 0");
    if (fractions.empty()) throw ParameterError("fractions must not be empty");
    if (out.empty()) throw ParameterError("out must name a directory");
    teaching.validate(k);
}

void write_results_csv(const std::vector<ResultRow>& rows, const fs::path& path)
{
    auto out = open_out(path);
    out << "method,N,K,budget_fraction,risk_euclid,rho,teaching_ratio,rounds_used,runtime_seconds,reals_communicated\n";
    for (const auto& r : rows) {
        out << r.method << ',' << r.n << ',' << r.k << ',';
        put_double(out, r.budget_fraction);
        out << ',';
        put_double(out, r.risk_euclid);
        out << ',';
        put_double(out, r.rho);
        out << ',';
        put_double(out, r.teaching_ratio);
        out << ',' << r.rounds_used << ',';
        put_double(out, r.runtime_seconds);
        out << ',' << r.reals_communicated << '\n';
    }
}

Dataset load_or_generate(const ExperimentConfig& cfg)
{
    if (!cfg.data.empty()) {
        CsvOptions opts;
        opts.label_column = cfg.label_column;
        opts.remap_01 = cfg.remap01;
        return load_csv(cfg.data, cfg.task, opts);
    }
    SyntheticSpec spec = cfg.synth;
    spec.task = cfg.task;
    spec.seed = cfg.seed;
    return gen_synthetic(spec);
}

TeachingGoal load_or_make_target(const ExperimentConfig& cfg, const Dataset& data)
{
    if (!cfg.target.empty()) {
        TeachingGoal goal;
        goal.theta_star = read_vector_csv(cfg.target);
        if (static_cast<std::size_t>(goal.theta_star.size()) != data.dim()) {
            throw ParameterError("target " + cfg.target.string() + " has dimension " +
                                 std::to_string(goal.theta_star.size()) + ", data has " + std::to_string(data.dim()));
        }
        goal.theta_gt = fit_primal(data, cfg.teaching.lambda).theta;
        goal.noise_ratio = (goal.theta_star - goal.theta_gt).norm() / goal.theta_gt.norm();
        return goal;
    }
    return make_target(data, cfg.teaching.lambda, cfg.noise_ratio, cfg.seed + 1);
}

Prepared prepare(const ExperimentConfig& cfg, std::ostream& log)
{
    stage("config", log, [&] { cfg.validate(); });
    Prepared p;
    p.data = stage("data", log, [&] { return load_or_generate(cfg); });
    log << "data n=" << p.data.size() << " d=" << p.data.dim() << '\n';
    p.goal = stage("target", log, [&] { return load_or_make_target(cfg, p.data); });
    p.shards = stage("shard", log, [&] { return shard(p.data, cfg.k, cfg.seed + 2); });
    p.risk_full = stage("full-fit", log, [&] {
        return teaching_risk(fit_primal(p.data, cfg.teaching.lambda).theta, p.goal.theta_star).euclid;
    });
    log << "risk_full=" << p.risk_full << '\n';
    return p;
}

std::size_t resolve_budget(const ExperimentConfig& cfg, std::size_t n)
{
    if (cfg.budget > 0) {
        if (cfg.budget > n) throw ParameterError("budget " + std::to_string(cfg.budget) + " exceeds N=" + std::to_string(n));
        return cfg.budget;
    }
    return budget_for_fraction(cfg.budget_fraction, n);
}

void cmd_generate(const ExperimentConfig& cfg, std::ostream& log)
{
    stage("config", log, [&] { cfg.validate(); });
    const auto data = stage("data", log, [&] { return load_or_generate(cfg); });
    stage("write", log, [&] {
        ensure_out_dir(cfg);
        write_csv(data, cfg.out / "data.csv");
        write_metadata({{"task", std::string(to_string(cfg.task))},
                        {"n", std::to_string(data.size())},
                        {"d", std::to_string(data.dim())},
                        {"seed", std::to_string(cfg.seed)}},
                       cfg.out / "data.meta");
        write_shard_manifest(shard(data, cfg.k, cfg.seed + 2), cfg.out / "shards.csv");
    });
    log << "wrote " << data.size() << " rows to " << (cfg.out / "data.csv").string() << '\n';
}

void cmd_make_target(const ExperimentConfig& cfg, std::ostream& log)
{
    stage("config", log, [&] { cfg.validate(); });
    const auto data = stage("data", log, [&] { return load_or_generate(cfg); });
    const auto goal = stage("target", log, [&] { return make_target(data, cfg.teaching.lambda, cfg.noise_ratio, cfg.seed + 1); });
    stage("write", log, [&] {
        ensure_out_dir(cfg);
        write_vector_csv(goal.theta_star, "theta_star", cfg.out / "target.csv");
        write_vector_csv(goal.theta_gt, "theta_gt", cfg.out / "theta_gt.csv");
        write_metadata({{"noise_ratio", std::to_string(goal.noise_ratio)},
                        {"lambda", std::to_string(cfg.teaching.lambda)},
                        {"seed", std::to_string(cfg.seed + 1)}},
                       cfg.out / "target.meta");
    });
}

std::vector<ResultRow> cmd_teach(const ExperimentConfig& cfg, std::ostream& log)
{
    const auto p = prepare(cfg, log);
    std::optional<DualState> resume;
    if (!cfg.resume.empty()) resume = stage("resume", log, [&] { return read_state(cfg.resume); });

    RunOptions opts;
    opts.resume = resume ? &*resume : nullptr;
    const auto run = stage("teach", log, [&] { return run_teaching(p.shards, p.goal.theta_star, cfg.task, cfg.teaching, opts); });
    log << "rounds=" << run.trace.rounds_used() << " objective=" << run.trace.initial_objective << " -> "
        << (run.trace.rounds.empty() ? run.trace.initial_objective : run.trace.rounds.back().objective) << '\n';

    const std::size_t budget = stage("select", log, [&] { return resolve_budget(cfg, p.data.size()); });
    const auto sel = stage("select", log, [&] { return select_subset(run.state, p.shards, budget); });
    const auto metrics = stage("fit", log, [&] { return score_selection(p, cfg, sel); });

    const std::size_t reals = run.trace.totals.reals_up + run.trace.totals.reals_down;
    std::vector<ResultRow> rows{make_row(cfg, "collaborative", p, budget, metrics, run.trace.rounds_used(),
                                         run.runtime_seconds, reals)};
    stage("write", log, [&] {
        ensure_out_dir(cfg);
        write_results_csv(rows, cfg.out / "results.csv");
        write_trace_csv(run.trace, cfg.out / "trace.csv");
        write_selection_csv(sel, &run.state, p.shards, cfg.out / "selection.csv");
        write_state(run.state, cfg.out / "state.txt");
        auto j = row_json(rows.front());
        j["budget"] = budget;
        j["risk_full"] = p.risk_full;
        j["monotone"] = run.trace.monotone(1e-9);
        write_json(j, cfg.out / "metrics.json");
    });
    log << "runtime_seconds=" << run.runtime_seconds << '\n';
    return rows;
}

std::vector<ResultRow> cmd_baseline(const ExperimentConfig& cfg, std::ostream& log)
{
    const auto p = prepare(cfg, log);
    const std::size_t budget = stage("select", log, [&] { return resolve_budget(cfg, p.data.size()); });
    const std::string method(to_string(cfg.baseline));
    std::vector<ResultRow> rows;
    nlohmann::json extra = nlohmann::json::object();

    switch (cfg.baseline) {
    case BaselineKind::oblivious: {
        const std::size_t per = std::max<std::size_t>(1, budget / p.shards.size());
        std::vector<TeachingRun> runs;
        const auto sel = stage("teach", log, [&] {
            runs = oblivious_runs(p.shards, p.goal.theta_star, cfg.task, cfg.teaching);
            return oblivious_select(runs, p.shards, per);
        });
        double seconds = 0.0;
        std::size_t rounds = 0;
        for (const auto& r : runs) {
            seconds += r.runtime_seconds;
            rounds = std::max(rounds, r.trace.rounds_used());
        }
        const auto m = stage("fit", log, [&] { return score_selection(p, cfg, sel); });
        rows.push_back(make_row(cfg, method, p, sel.selected_count(), m, rounds, seconds, 0));
        stage("write", log, [&] {
            ensure_out_dir(cfg);
            write_selection_csv(sel, nullptr, p.shards, cfg.out / "selection.csv");
        });
        extra["per_teacher_budget"] = per;
        break;
    }
    case BaselineKind::random: {
        const auto sel = stage("select", log, [&] { return random_select(p.shards, budget, cfg.seed + 3); });
        const auto m = stage("fit", log, [&] { return score_selection(p, cfg, sel); });
        rows.push_back(make_row(cfg, method, p, budget, m, 0, 0.0, 0));
        stage("write", log, [&] {
            ensure_out_dir(cfg);
            write_selection_csv(sel, nullptr, p.shards, cfg.out / "selection.csv");
        });
        break;
    }
    case BaselineKind::bruteforce: {
        const auto start = std::chrono::steady_clock::now();
        const auto best = stage("bruteforce", log, [&] {
            return brute_force_select(p.data, p.goal.theta_star, cfg.teaching.lambda, budget);
        });
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log << "evaluated " << best.evaluated << " subsets\n";
        const auto theta = stage("fit", log, [&] { return fit_primal(p.data.subset(best.best), cfg.teaching.lambda).theta; });
        const auto m = stage("metrics", log, [&] { return evaluate(p.data, theta, p.goal.theta_star, p.risk_full); });
        rows.push_back(make_row(cfg, method, p, budget, m, 0, seconds, 0));
        extra["evaluated"] = best.evaluated;
        extra["selected"] = best.best;
        break;
    }
    }

    stage("write", log, [&] {
        ensure_out_dir(cfg);
        write_results_csv(rows, cfg.out / "results.csv");
        auto j = row_json(rows.front());
        j.update(extra);
        j["budget"] = budget;
        j["risk_full"] = p.risk_full;
        write_json(j, cfg.out / "metrics.json");
    });
    return rows;
}

std::vector<ResultRow> cmd_sweep(const ExperimentConfig& cfg, std::ostream& log)
{
    const auto p = prepare(cfg, log);
    const auto sweep = stage("teach", log, [&] {
        return sweep_budgets(p.shards, p.data, p.goal.theta_star, cfg.teaching, cfg.fractions);
    });
    const auto& run = sweep.run;
    const std::size_t reals = run.trace.totals.reals_up + run.trace.totals.reals_down;

    std::vector<ResultRow> rows;
    for (const auto& r : sweep.rows) {
        rows.push_back(make_row(cfg, "collaborative", p, r.budget, r.metrics, run.trace.rounds_used(),
                                run.runtime_seconds, reals));
    }

    bool monotone = run.trace.monotone(1e-9);
    std::vector<TeachingRun> runs;
    if (cfg.with_oblivious) {
        runs = stage("oblivious", log, [&] {
            return oblivious_runs(p.shards, p.goal.theta_star, cfg.task, cfg.teaching);
        });
        double seconds = 0.0;
        std::size_t rounds = 0;
        for (const auto& r : runs) {
            seconds += r.runtime_seconds;
            rounds = std::max(rounds, r.trace.rounds_used());
            monotone = monotone && r.trace.monotone(1e-9);
        }
        for (const auto& r : sweep.rows) {
            const std::size_t per = std::max<std::size_t>(1, r.budget / p.shards.size());
            const auto sel = stage("oblivious", log, [&] { return oblivious_select(runs, p.shards, per); });
            const auto m = stage("fit", log, [&] { return score_selection(p, cfg, sel); });
            rows.push_back(make_row(cfg, "oblivious", p, sel.selected_count(), m, rounds, seconds, 0));
        }
    }
    if (cfg.with_random) {
        for (const auto& r : sweep.rows) {
            const auto sel = stage("random", log, [&] { return random_select(p.shards, r.budget, cfg.seed + 3); });
            const auto m = stage("fit", log, [&] { return score_selection(p, cfg, sel); });
            rows.push_back(make_row(cfg, "random", p, r.budget, m, 0, 0.0, 0));
        }
    }

    stage("write", log, [&] {
        ensure_out_dir(cfg);
        write_results_csv(rows, cfg.out / "results.csv");
        write_trace_csv(run.trace, cfg.out / "trace.csv");
        for (std::size_t i = 0; i < runs.size(); ++i)
            write_trace_csv(runs[i].trace, cfg.out / ("trace_oblivious_" + std::to_string(i) + ".csv"));
        write_rows_json(rows, cfg.out / "metrics.json");
    });
    log << "monotone=" << (monotone ? "true" : "false") << '\n';
    log << "best fraction=" << sweep.rows[sweep.best].fraction << " risk=" << sweep.rows[sweep.best].metrics.risk_euclid
        << " runtime_seconds=" << run.runtime_seconds << '\n';
    return rows;
}

SuiteReport cmd_check(const ExperimentConfig& cfg, std::ostream& log)
{
    auto rep = stage("check", log, [&] { return run_suite(cfg.property); });
    if (!cfg.timing) rep.seconds = 0.0;
    stage("write", log, [&] {
        ensure_out_dir(cfg);
        write_json(rep.to_json(), cfg.out / ("check_" + std::string(to_string(cfg.property)) + ".json"));
    });
    log << rep.property << ": " << rep.passed() << "/" << rep.cases.size() << (rep.pass() ? " pass" : " FAIL") << '\n';
    return rep;
}

}  // namespace coteach
