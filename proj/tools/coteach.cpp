// coteach: command-line driver for collaborative teaching experiments.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "coteach/harness.hpp"

using namespace coteach;

namespace {

std::vector<double> parse_list(const std::string& key, const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto first = item.find_first_not_of(" \t[]\"");
        const auto last = item.find_last_not_of(" \t[]\"");
        if (first == std::string::npos) continue;
        item = item.substr(first, last - first + 1);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ParameterError("config key '" + key + "': '" + item + "' is not a number");
        }
    }
    return out;
}

// Raw option values; task-dependent defaults are applied after parsing.
struct RawOptions {
    std::string task = "classification";
    std::string data;
    std::string label_column = "label";
    bool remap01 = false;
    std::size_t n = 5000;
    std::size_t d = 10;
    std::size_t clusters = 4;
    double center_scale = 1.0;
    double cluster_std = 0.3;
    double regression_noise_std = 0.1;
    std::size_t k = 5;
    std::string target;
    double noise_ratio = 1.0;
    double lambda = 10.0;
    std::optional<double> lambda_alpha;
    std::optional<double> lambda_theta;
    std::string beta;
    std::size_t rounds = 100;
    std::size_t inner_max_iter = 200;
    double inner_tol = 1e-8;
    double outer_tol = 0.0;
    double w_max = 1e6;
    double ols_eps = 1e-8;
    bool normalize_conjugate = false;
    std::size_t threads = 1;
    double budget_fraction = 0.05;
    std::size_t budget = 0;
    std::string fractions = "0.01,0.02,0.05,0.1,0.2,0.5,1.0";
    bool with_oblivious = false;
    bool with_random = false;
    std::string baseline = "oblivious";
    std::string property = "theorem1";
    std::string out = "out";
    std::string resume;
    std::uint64_t seed = 0;
    bool timing = false;
};

void add_options(CLI::App& app, RawOptions& o)
{
    app.add_option("--task", o.task, "classification | regression")->capture_default_str();
    app.add_option("--data", o.data, "CSV input; synthetic data when empty");
    app.add_option("--label-column", o.label_column, "label column name in the CSV")->capture_default_str();
    app.add_flag("--remap01", o.remap01, "map {0,1} labels to {-1,+1}");
    app.add_option("--n", o.n, "synthetic: examples")->capture_default_str();
    app.add_option("--d", o.d, "synthetic: dimension")->capture_default_str();
    app.add_option("--clusters", o.clusters, "synthetic: cluster count (even for classification)")->capture_default_str();
    app.add_option("--center-scale", o.center_scale, "synthetic: cluster center std")->capture_default_str();
    app.add_option("--cluster-std", o.cluster_std, "synthetic: within-cluster std")->capture_default_str();
    app.add_option("--regression-noise-std", o.regression_noise_std, "synthetic: label noise std")->capture_default_str();
    app.add_option("--k", o.k, "teachers")->capture_default_str();
    app.add_option("--target", o.target, "theta* CSV; made from the data when empty");
    app.add_option("--noise-ratio", o.noise_ratio, "||tau|| / ||theta_gt|| for a made target")->capture_default_str();
    app.add_option("--lambda", o.lambda, "learner ridge weight")->capture_default_str();
    app.add_option("--lambda-alpha", o.lambda_alpha, "weighted l1 weight (default 0.1 clf, 1 reg)");
    app.add_option("--lambda-theta", o.lambda_theta, "target pull weight (default 1000 clf, 2000 reg)");
    app.add_option("--beta", o.beta, "per-teacher step scales, comma separated, each in [1, K]");
    app.add_option("--rounds", o.rounds, "outer rounds T")->capture_default_str();
    app.add_option("--inner-max-iter", o.inner_max_iter, "local solver iteration cap")->capture_default_str();
    app.add_option("--inner-tol", o.inner_tol, "local solver relative tolerance")->capture_default_str();
    app.add_option("--outer-tol", o.outer_tol, "stop when relative objective change is below; 0 runs all rounds")
        ->capture_default_str();
    app.add_option("--w-max", o.w_max, "cap on adaptive weights")->capture_default_str();
    app.add_option("--ols-eps", o.ols_eps, "warm-start ridge, relative to trace(G)/d")->capture_default_str();
    app.add_flag("--normalize-conjugate", o.normalize_conjugate, "scale the conjugate sum by 1/N");
    app.add_option("--threads", o.threads, "block updates run in parallel")->capture_default_str();
    app.add_option("--budget-fraction", o.budget_fraction, "|S|/N for teach and baseline")->capture_default_str();
    app.add_option("--budget", o.budget, "absolute |S|; overrides budget-fraction when > 0")->capture_default_str();
    app.add_option("--fractions", o.fractions, "sweep fractions, comma separated")->capture_default_str();
    app.add_flag("--with-oblivious", o.with_oblivious, "sweep: add oblivious rows");
    app.add_flag("--with-random", o.with_random, "sweep: add random rows");
    app.add_option("--baseline", o.baseline, "oblivious | random | bruteforce")->capture_default_str();
    app.add_option("--property", o.property, "theorem1 | duality | gradient | oracle_recovery")->capture_default_str();
    app.add_option("--out", o.out, "output directory")->capture_default_str();
    app.add_option("--resume", o.resume, "teach: continue from a saved state.txt");
    app.add_option("--seed", o.seed, "master seed")->capture_default_str();
    app.add_flag("--timing", o.timing, "record wall-clock runtimes in results (outputs stop being byte-stable)");
}

ExperimentConfig resolve(const RawOptions& o)
{
    const Task task = parse_task(o.task);
    auto cfg = ExperimentConfig::defaults_for(task);
    cfg.data = o.data;
    cfg.label_column = o.label_column;
    cfg.remap01 = o.remap01;
    cfg.synth.n = o.n;
    cfg.synth.d = o.d;
    cfg.synth.clusters = o.clusters;
    cfg.synth.center_scale = o.center_scale;
    cfg.synth.cluster_std = o.cluster_std;
    cfg.synth.regression_noise_std = o.regression_noise_std;
    cfg.k = o.k;
    cfg.target = o.target;
    cfg.noise_ratio = o.noise_ratio;

    auto& t = cfg.teaching;
    t.lambda = o.lambda;
    if (o.lambda_alpha) t.lambda_alpha = *o.lambda_alpha;
    if (o.lambda_theta) t.lambda_theta = *o.lambda_theta;
    if (!o.beta.empty()) t.beta = parse_list("beta", o.beta);
    t.rounds = o.rounds;
    t.inner_max_iter = o.inner_max_iter;
    t.inner_tol = o.inner_tol;
    t.outer_tol = o.outer_tol;
    t.w_max = o.w_max;
    t.ols_eps = o.ols_eps;
    t.normalize_conjugate = o.normalize_conjugate;
    t.threads = o.threads;
    t.seed = o.seed;

    cfg.budget_fraction = o.budget_fraction;
    cfg.budget = o.budget;
    cfg.fractions = parse_list("fractions", o.fractions);
    cfg.with_oblivious = o.with_oblivious;
    cfg.with_random = o.with_random;
    cfg.baseline = parse_baseline(o.baseline);
    cfg.property = parse_property(o.property);
    cfg.out = o.out;
    cfg.resume = o.resume;
    cfg.seed = o.seed;
    cfg.timing = o.timing;
    return cfg;
}

// Everything goes to the run log; a copy of the log is echoed to stderr.
class Tee : public std::streambuf {
public:
    Tee(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

protected:
    int overflow(int c) override
    {
        if (c == EOF) return !EOF;
        const int r1 = a_ ? a_->sputc(static_cast<char>(c)) : c;
        const int r2 = b_->sputc(static_cast<char>(c));
        return (r1 == EOF || r2 == EOF) ? EOF : c;
    }
    int sync() override
    {
        if (a_) a_->pubsync();
        return b_->pubsync();
    }

private:
    std::streambuf* a_;
    std::streambuf* b_;
};

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"coteach: collaborative privacy-preserving teaching simulator"};
    app.set_config("--config", "", "flat key=value file; command-line flags win");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    app.fallthrough();

    RawOptions raw;
    add_options(app, raw);
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset, metadata and shard manifest");
    auto* tgt = app.add_subcommand("make-target", "fit theta_gt and write a noisy target theta*");
    auto* teach = app.add_subcommand("teach", "collaborative teaching at one budget");
    auto* base = app.add_subcommand("baseline", "oblivious, random or brute-force selection at one budget");
    auto* sweep = app.add_subcommand("sweep", "one teaching run scored at every budget fraction");
    auto* check = app.add_subcommand("check", "run a property suite and write a JSON report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    ExperimentConfig cfg;
    try {
        cfg = resolve(raw);
    } catch (const ParameterError& e) {
        std::cerr << "error: stage 'config': " << e.what() << '\n';
        return 1;
    }

    std::ofstream log_file;
    std::error_code ec;
    std::filesystem::create_directories(cfg.out, ec);
    if (!ec) log_file.open(cfg.out / "run.log", std::ios::app);
    Tee tee(log_file ? log_file.rdbuf() : nullptr, std::cerr.rdbuf());
    std::ostream log(&tee);

    try {
        if (*gen) {
            cmd_generate(cfg, log);
        } else if (*tgt) {
            cmd_make_target(cfg, log);
        } else if (*teach) {
            cmd_teach(cfg, log);
        } else if (*base) {
            cmd_baseline(cfg, log);
        } else if (*sweep) {
            cmd_sweep(cfg, log);
        } else if (*check) {
            const auto rep = cmd_check(cfg, log);
            std::cout << rep.to_json().dump(2) << '\n';
            if (!rep.pass()) return 2;
        }
    } catch (const StageError& e) {
        log << "error: " << e.what() << '\n';
        return e.exit_code();
    }
    log.flush();
    return 0;
}
