// End-to-end acceptance run. One PASS/FAIL line per criterion; the detail
// lines above them are for reading, not parsing.

#include <malloc.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "coteach/harness.hpp"

using namespace coteach;
namespace fs = std::filesystem;

namespace {

// --- pinned tolerances and instance parameters -----------------------------

constexpr double kMonotoneSlack = 1e-9;

constexpr double kTheorem1Seconds = 60.0;
constexpr double kDualityTol = 1e-4;
constexpr double kDualitySeconds = 10.0;
constexpr double kGradientTol = 1e-5;
constexpr std::size_t kOracleRequired = 18;
constexpr double kOracleSeconds = 60.0;

// sweep instances (criteria 6, 7, 9, 10, 12)
constexpr std::uint64_t kSweepSeed0 = 9001;
constexpr std::size_t kSweepSeeds = 10;
constexpr std::size_t kSweepN = 5000;
constexpr std::size_t kSweepD = 10;
constexpr std::size_t kSweepK = 5;
constexpr std::size_t kSweepClusters = 2;
constexpr double kSweepLambda = 100.0;
constexpr double kSweepFraction = 0.05;
constexpr std::size_t kSweepRequired = 8;
constexpr double kSweepSeconds = 600.0;
constexpr double kRhoMin = 0.9;
constexpr std::size_t kParallelThreads = 4;

// exhaustive comparison (criterion 8)
constexpr std::size_t kTinyTrials = 50;
constexpr std::size_t kTinyN = 10;
constexpr std::size_t kTinyD = 3;
constexpr std::size_t kTinyBudget = 3;
constexpr std::size_t kTinyK = 2;
constexpr double kTinyLambda = 10.0;
constexpr double kTinyLambdaAlpha = 2.0;
constexpr double kTinyCenterScale = 3.0;
constexpr double kTinyClusterStd = 1.0;
constexpr double kTinyRatio = 1.5;
constexpr double kTinyRatioShare = 0.90;
constexpr double kTinyMedianShare = 0.95;

// scale run (criterion 11)
constexpr std::size_t kScaleN = 100000;
constexpr std::size_t kScaleK = 10;
constexpr std::size_t kScaleRounds = 150;
constexpr std::uint64_t kScaleSeed = 9101;
constexpr double kScaleSeconds = 600.0;

// ---------------------------------------------------------------------------

using clock_type = std::chrono::steady_clock;

double since(clock_type::time_point t0)
{
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct Verdict {
    bool pass = false;
    std::string summary;
};

std::vector<Verdict> verdicts(13);

void record(int id, bool pass, const std::string& summary)
{
    verdicts[id] = {pass, summary};
    std::printf("  [%d] %s %s\n", id, pass ? "ok" : "FAILED", summary.c_str());
    std::fflush(stdout);
}

template <class Fn>
void guarded(int id, Fn&& fn)
{
    try {
        fn();
    } catch (const std::exception& e) {
        record(id, false, std::string("threw: ") + e.what());
    }
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// criterion 4 bookkeeping: every executed run reports here
struct MonotoneLog {
    std::size_t runs = 0;
    std::size_t bad = 0;
    std::vector<std::string> where;

    void add(const std::string& name, bool ok)
    {
        ++runs;
        if (!ok) {
            ++bad;
            where.push_back(name);
        }
    }
} mono;

// objective column of a trace file, checked round to round
bool trace_file_monotone(const fs::path& p)
{
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    double prev = 0.0;
    bool first = true;
    while (std::getline(in, line)) {
        const auto a = line.find(',');
        const auto b = line.find(',', a + 1);
        const double obj = std::stod(line.substr(a + 1, b - a - 1));
        if (!first && obj > prev + kMonotoneSlack) return false;
        prev = obj;
        first = false;
    }
    return !first;
}

// --- criteria 1, 2, 3, 5 ---------------------------------------------------

void theorem1()
{
    const auto t0 = clock_type::now();
    const auto rep = theorem1_suite();
    const double secs = since(t0);
    const bool ok = rep.cases.size() == 100 && rep.passed() == 100 && rep.min_slack() >= 0.0 && secs <= kTheorem1Seconds;
    record(1, ok, fmt("%zu/%zu hold, min slack %.3g, %.1f s", rep.passed(), rep.cases.size(), rep.min_slack(), secs));
}

void duality()
{
    const auto t0 = clock_type::now();
    const auto rep = duality_suite();
    const double secs = since(t0);
    double worst = 0.0;
    bool tasks[2] = {false, false};
    for (const auto& c : rep.cases) {
        worst = std::max(worst, c.detail.at("relative_error").get<double>());
        tasks[c.id.rfind("regression", 0) == 0 ? 0 : 1] = true;
    }
    const bool ok = !rep.cases.empty() && tasks[0] && tasks[1] && worst <= kDualityTol && secs <= kDualitySeconds;
    record(2, ok, fmt("%zu cases, worst relative error %.3g, %.2f s", rep.cases.size(), worst, secs));
}

void gradient()
{
    const auto rep = gradient_suite();
    double worst = 0.0;
    for (const auto& c : rep.cases) worst = std::max(worst, c.detail.at("relative_error").get<double>());
    const bool ok = rep.cases.size() == 20 && worst <= kGradientTol;
    record(3, ok, fmt("%zu points, max relative error %.3g", rep.cases.size(), worst));
}

void oracle()
{
    const auto t0 = clock_type::now();
    const auto rep = oracle_recovery_suite();
    const double secs = since(t0);
    for (const auto& c : rep.cases) mono.add("oracle " + c.id, c.detail.at("monotone").get<bool>());
    const bool ok = rep.cases.size() == 20 && rep.passed() >= kOracleRequired && secs <= kOracleSeconds;
    record(5, ok, fmt("support recovered in %zu/%zu, %.1f s", rep.passed(), rep.cases.size(), secs));
}

// --- criteria 6, 7, 9, 10, 12 ----------------------------------------------

ExperimentConfig sweep_config(std::uint64_t seed, std::size_t threads, const fs::path& root)
{
    auto cfg = ExperimentConfig::defaults_for(Task::classification);
    cfg.synth.n = kSweepN;
    cfg.synth.d = kSweepD;
    cfg.synth.clusters = kSweepClusters;
    cfg.k = kSweepK;
    cfg.teaching.lambda = kSweepLambda;
    cfg.teaching.threads = threads;
    cfg.budget_fraction = kSweepFraction;
    cfg.fractions = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
    cfg.with_oblivious = true;
    cfg.seed = seed;
    cfg.out = root / ("seed" + std::to_string(seed) + "_t" + std::to_string(threads));
    return cfg;
}

struct CommCheck {
    std::size_t runs = 0;
    std::size_t bad = 0;
    void add(std::size_t reals, std::size_t rounds, std::size_t k, std::size_t d)
    {
        ++runs;
        if (reals != 2 * rounds * k * d) ++bad;
    }
} comm;

void sweeps(const fs::path& root)
{
    std::size_t collab_wins = 0, u_shaped = 0, rho_ok = 0, identical = 0;
    double secs = 0.0;
    const std::size_t n_frac = 7;
    const std::size_t at_budget = 2;

    for (std::size_t s = 0; s < kSweepSeeds; ++s) {
        const std::uint64_t seed = kSweepSeed0 + s;
        auto cfg = sweep_config(seed, 1, root);
        fs::remove_all(cfg.out);
        std::ostringstream log;
        const auto t0 = clock_type::now();
        const auto rows = cmd_sweep(cfg, log);
        secs += since(t0);
        if (rows.size() != 2 * n_frac) throw std::runtime_error("sweep returned " + std::to_string(rows.size()) + " rows");

        const std::string tag = "seed " + std::to_string(seed);
        mono.add(tag + " sweep log", log.str().find("monotone=true") != std::string::npos);
        mono.add(tag + " collaborative trace", trace_file_monotone(cfg.out / "trace.csv"));
        for (std::size_t i = 0; i < kSweepK; ++i) {
            mono.add(tag + " oblivious trace " + std::to_string(i),
                     trace_file_monotone(cfg.out / ("trace_oblivious_" + std::to_string(i) + ".csv")));
        }
        for (std::size_t i = 0; i < n_frac; ++i) comm.add(rows[i].reals_communicated, rows[i].rounds_used, kSweepK, kSweepD);

        const double collab = rows[at_budget].risk_euclid;
        const double obliv = rows[n_frac + at_budget].risk_euclid;
        collab_wins += collab <= obliv;

        const double lo = rows.front().risk_euclid, hi = rows[n_frac - 1].risk_euclid;
        bool u = false;
        std::size_t best = 0;
        for (std::size_t i = 0; i < n_frac; ++i) {
            if (rows[i].risk_euclid < rows[best].risk_euclid) best = i;
            if (i > 0 && i + 1 < n_frac && rows[i].risk_euclid < lo && rows[i].risk_euclid < hi && rows[i].teaching_ratio < 1.0)
                u = true;
        }
        u_shaped += u;
        rho_ok += rows[best].rho >= kRhoMin;

        auto par = sweep_config(seed, kParallelThreads, root);
        fs::remove_all(par.out);
        std::ostringstream plog;
        cmd_sweep(par, plog);
        const bool same = slurp(cfg.out / "results.csv") == slurp(par.out / "results.csv") &&
                          !slurp(cfg.out / "results.csv").empty();
        identical += same;

        std::printf("    seed %llu: collaborative %.4f oblivious %.4f | 0.01 %.4f 1.0 %.4f best %.2f (%.4f) rho %.3f | %s\n",
                    static_cast<unsigned long long>(seed), collab, obliv, lo, hi, rows[best].budget_fraction,
                    rows[best].risk_euclid, rows[best].rho, same ? "identical" : "DIFFERENT");
        std::fflush(stdout);
    }
    record(6, collab_wins >= kSweepRequired && secs <= kSweepSeconds,
           fmt("collaborative <= oblivious in %zu/%zu, %.1f s", collab_wins, kSweepSeeds, secs));
    record(7, u_shaped >= kSweepRequired, fmt("interior fraction beats 0.01 and 1.0 in %zu/%zu", u_shaped, kSweepSeeds));
    record(9, rho_ok >= kSweepRequired, fmt("rho >= %.2f at the best fraction in %zu/%zu", kRhoMin, rho_ok, kSweepSeeds));
    record(12, identical == kSweepSeeds,
           fmt("results.csv identical at threads 1 and %zu in %zu/%zu", kParallelThreads, identical, kSweepSeeds));
}

// --- criterion 8 -------------------------------------------------------------

void exhaustive()
{
    std::size_t within_ratio = 0, under_median = 0;
    for (std::size_t t = 1; t <= kTinyTrials; ++t) {
        SyntheticSpec sp;
        sp.n = kTinyN;
        sp.d = kTinyD;
        sp.clusters = 2;
        sp.center_scale = kTinyCenterScale;
        sp.cluster_std = kTinyClusterStd;
        sp.seed = t;
        const auto data = gen_synthetic(sp);
        const auto shards = shard(data, kTinyK, t);
        const auto goal = make_target(data, kTinyLambda, 1.0, t + 5000);

        auto cfg = TeachingConfig::defaults_for(Task::classification);
        cfg.lambda = kTinyLambda;
        cfg.lambda_alpha = kTinyLambdaAlpha;
        const auto run = run_teaching(shards, goal.theta_star, Task::classification, cfg);
        mono.add("exhaustive trial " + std::to_string(t), run.trace.monotone(kMonotoneSlack));
        comm.add(run.trace.totals.reals_up + run.trace.totals.reals_down, run.trace.rounds_used(), kTinyK, kTinyD);

        const auto sel = select_subset(run.state, shards, kTinyBudget);
        const double risk = teaching_risk(fit_primal(selected_data(sel, shards), kTinyLambda).theta, goal.theta_star).euclid;
        const auto bf = brute_force_select(data, goal.theta_star, kTinyLambda, kTinyBudget);

        // every 3-subset, median of the resulting risks
        std::vector<double> all;
        for (std::size_t a = 0; a < kTinyN; ++a)
            for (std::size_t b = a + 1; b < kTinyN; ++b)
                for (std::size_t c = b + 1; c < kTinyN; ++c)
                    all.push_back(teaching_risk(fit_primal(data.subset({a, b, c}), kTinyLambda).theta, goal.theta_star).euclid);
        std::sort(all.begin(), all.end());
        const std::size_t m = all.size();
        const double median = m % 2 ? all[m / 2] : 0.5 * (all[m / 2 - 1] + all[m / 2]);

        within_ratio += risk <= kTinyRatio * bf.best_risk;
        under_median += risk <= median;
    }
    const double share_ratio = double(within_ratio) / kTinyTrials;
    const double share_median = double(under_median) / kTinyTrials;
    record(8, share_ratio >= kTinyRatioShare && share_median >= kTinyMedianShare,
           fmt("within %.1fx of exhaustive optimum %zu/%zu, at or under median %zu/%zu", kTinyRatio, within_ratio,
               kTinyTrials, under_median, kTinyTrials));
}

// --- criterion 11 ------------------------------------------------------------

void scale()
{
    SyntheticSpec sp;
    sp.n = kScaleN;
    sp.d = kSweepD;
    sp.clusters = kSweepClusters;
    sp.seed = kScaleSeed;
    const auto data = gen_synthetic(sp);
    const auto shards = shard(data, kScaleK, kScaleSeed + 2);
    const auto goal = make_target(data, kSweepLambda, 1.0, kScaleSeed + 1);

    auto cfg = TeachingConfig::defaults_for(Task::classification);
    cfg.lambda = kSweepLambda;
    cfg.rounds = kScaleRounds;
    cfg.threads = 1;

    std::vector<std::size_t> in_use;
    in_use.reserve(kScaleRounds + 1);
    RunOptions opts;
    opts.on_round = [&](const DualState&, const RoundRecord&) { in_use.push_back(mallinfo2().uordblks); };

    const auto t0 = clock_type::now();
    const auto run = run_teaching(shards, goal.theta_star, Task::classification, cfg, opts);
    const double secs = since(t0);

    const bool monotone = run.trace.monotone(kMonotoneSlack);
    mono.add("scale run", monotone);
    comm.add(run.trace.totals.reals_up + run.trace.totals.reals_down, run.trace.rounds_used(), kScaleK, kSweepD);

    bool flat = in_use.size() == kScaleRounds;
    std::size_t peak = 0;
    for (std::size_t r = 2; r < in_use.size(); ++r) {
        peak = std::max(peak, in_use[r]);
        if (in_use[r] > in_use[1]) flat = false;
    }
    const long long growth = static_cast<long long>(peak) - static_cast<long long>(in_use.size() > 1 ? in_use[1] : 0);
    record(11, flat && monotone && secs <= kScaleSeconds,
           fmt("%zu rounds in %.1f s, monotone %s, heap after round 2 %zu bytes, max growth after %lld bytes",
               run.trace.rounds_used(), secs, monotone ? "yes" : "no", in_use.size() > 1 ? in_use[1] : 0, growth));
}

}  // namespace

int main(int argc, char** argv)
{
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "coteach_acceptance";
    fs::create_directories(root);

    guarded(1, theorem1);
    guarded(2, duality);
    guarded(3, gradient);
    guarded(5, oracle);
    guarded(8, exhaustive);
    guarded(6, [&] { sweeps(root); });
    guarded(11, scale);

    record(4, mono.runs > 0 && mono.bad == 0,
           fmt("%zu runs, %zu with an objective increase above %.0e%s%s", mono.runs, mono.bad, kMonotoneSlack,
               mono.bad ? ", first: " : "", mono.bad ? mono.where.front().c_str() : ""));
    record(10, comm.runs > 0 && comm.bad == 0, fmt("%zu collaborative runs, %zu off the 2*T*K*d count", comm.runs, comm.bad));

    std::printf("\n");
    int failed = 0;
    for (int id = 1; id <= 12; ++id) {
        const auto& v = verdicts[id];
        if (v.summary.empty()) {
            std::printf("[FAIL] criterion %d: not evaluated\n", id);
            ++failed;
            continue;
        }
        std::printf("[%s] criterion %d: %s\n", v.pass ? "PASS" : "FAIL", id, v.summary.c_str());
        failed += !v.pass;
    }
    return failed == 0 ? 0 : 1;
}
