#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "coteach/harness.hpp"

using namespace coteach;
namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / "coteach_test_harness" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig small(Task task, const std::string& out)
{
    auto cfg = ExperimentConfig::defaults_for(task);
    cfg.synth.n = 400;
    cfg.synth.d = 5;
    cfg.k = 4;
    cfg.teaching.rounds = 15;
    cfg.seed = 3;
    cfg.out = fresh(out);
    return cfg;
}

}  // namespace

TEST_CASE("results table layout")
{
    const auto dir = fresh("layout");
    ResultRow r;
    r.method = "collaborative";
    r.n = 10;
    r.k = 2;
    r.budget_fraction = 0.3;
    r.risk_euclid = 0.5;
    r.rho = 1;
    r.teaching_ratio = 0.25;
    r.rounds_used = 7;
    r.reals_communicated = 84;
    write_results_csv({r}, dir / "r.csv");
    CHECK(slurp(dir / "r.csv") ==
          "method,N,K,budget_fraction,risk_euclid,rho,teaching_ratio,rounds_used,runtime_seconds,reals_communicated\n"
          "collaborative,10,2,0.3,0.5,1,0.25,7,0,84\n");
}

TEST_CASE("teach output is byte stable across reruns and thread counts")
{
    std::ostringstream log;
    auto a = small(Task::classification, "det_a");
    auto b = small(Task::classification, "det_b");
    b.teaching.threads = 3;
    cmd_teach(a, log);
    cmd_teach(b, log);
    for (const char* f : {"results.csv", "metrics.json", "trace.csv", "selection.csv", "state.txt"}) {
        CAPTURE(f);
        CHECK(fs::exists(a.out / f));
        CHECK(slurp(a.out / f) == slurp(b.out / f));
    }
}

TEST_CASE("teach reports communication and budget")
{
    std::ostringstream log;
    auto cfg = small(Task::classification, "teach");
    const auto rows = cmd_teach(cfg, log);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].reals_communicated == 2 * 15 * 4 * 5);
    CHECK(rows[0].rounds_used == 15);
    CHECK(rows[0].budget_fraction == doctest::Approx(0.05));
    CHECK(rows[0].runtime_seconds == 0.0);
    const auto j = nlohmann::json::parse(slurp(cfg.out / "metrics.json"));
    CHECK(j.at("budget") == 20);
    CHECK(j.at("monotone") == true);

    cfg.budget_fraction = 1.0;
    cfg.out = fresh("teach_full");
    const auto full = cmd_teach(cfg, log);
    CHECK(full[0].teaching_ratio == 1.0);

    cfg.timing = true;
    cfg.out = fresh("teach_timed");
    CHECK(cmd_teach(cfg, log)[0].runtime_seconds > 0.0);
}

TEST_CASE("resumed teaching ends where an uninterrupted run ends")
{
    std::ostringstream log;
    auto whole = small(Task::regression, "resume_whole");
    whole.teaching.rounds = 12;
    cmd_teach(whole, log);

    auto first = small(Task::regression, "resume_first");
    first.teaching.rounds = 5;
    cmd_teach(first, log);
    auto second = small(Task::regression, "resume_second");
    second.teaching.rounds = 7;
    second.resume = first.out / "state.txt";
    cmd_teach(second, log);
    CHECK(slurp(second.out / "state.txt") == slurp(whole.out / "state.txt"));
}

TEST_CASE("baselines through the harness")
{
    std::ostringstream log;
    SUBCASE("oblivious with one teacher matches collaborative")
    {
        auto c = small(Task::classification, "obl_c");
        c.k = 1;
        auto o = c;
        o.out = fresh("obl_o");
        o.baseline = BaselineKind::oblivious;
        const auto rc = cmd_teach(c, log)[0];
        const auto ro = cmd_baseline(o, log)[0];
        CHECK(ro.method == "oblivious");
        CHECK(ro.risk_euclid == rc.risk_euclid);
        CHECK(ro.rho == rc.rho);
        CHECK(ro.teaching_ratio == rc.teaching_ratio);
        CHECK(ro.budget_fraction == rc.budget_fraction);
        CHECK(ro.rounds_used == rc.rounds_used);
    }
    SUBCASE("random at full budget is the full fit")
    {
        auto r = small(Task::regression, "rand_full");
        r.baseline = BaselineKind::random;
        r.budget = 400;
        const auto row = cmd_baseline(r, log)[0];
        CHECK(row.teaching_ratio == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("brute force on twelve examples")
    {
        auto bf = small(Task::classification, "bf");
        bf.synth.n = 12;
        bf.synth.d = 3;
        bf.synth.clusters = 2;
        bf.k = 2;
        bf.baseline = BaselineKind::bruteforce;
        bf.budget = 3;
        std::ostringstream bl;
        cmd_baseline(bf, bl);
        CHECK(bl.str().find("evaluated 220 subsets") != std::string::npos);
        const auto j = nlohmann::json::parse(slurp(bf.out / "metrics.json"));
        CHECK(j.at("evaluated") == 220);
        CHECK(j.at("selected").size() == 3);
    }
    SUBCASE("brute force refusal keeps its message")
    {
        auto bf = small(Task::classification, "bf_refuse");
        bf.synth.n = 30;
        bf.synth.clusters = 2;
        bf.k = 2;
        bf.baseline = BaselineKind::bruteforce;
        bf.budget = 10;
        try {
            cmd_baseline(bf, log);
            FAIL("expected refusal");
        } catch (const StageError& e) {
            CHECK(e.exit_code() == 1);
            CHECK(e.stage() == "bruteforce");
            CHECK(std::string(e.what()).find("C(30, 10) = 30045015") != std::string::npos);
        }
    }
}

TEST_CASE("sweep writes one row per fraction and method")
{
    std::ostringstream log;
    auto cfg = small(Task::classification, "sweep");
    cfg.fractions = {0.05, 0.2, 1.0};
    cfg.with_oblivious = true;
    cfg.with_random = true;
    const auto rows = cmd_sweep(cfg, log);
    REQUIRE(rows.size() == 9);
    CHECK(rows[0].method == "collaborative");
    CHECK(rows[3].method == "oblivious");
    CHECK(rows[6].method == "random");
    CHECK(rows[2].teaching_ratio == 1.0);
    CHECK(rows[8].teaching_ratio == doctest::Approx(1.0).epsilon(1e-12));
    for (int i = 0; i < 3; ++i) CHECK(rows[i].reals_communicated == 2 * 15 * 4 * 5);
    CHECK(fs::exists(cfg.out / "trace.csv"));
    CHECK(fs::exists(cfg.out / "trace_oblivious_3.csv"));
    CHECK_FALSE(fs::exists(cfg.out / "trace_oblivious_4.csv"));
    CHECK(log.str().find("monotone=true") != std::string::npos);
    CHECK(nlohmann::json::parse(slurp(cfg.out / "metrics.json")).size() == 9);
}

TEST_CASE("generate and make-target files")
{
    std::ostringstream log;
    auto cfg = small(Task::classification, "gen");
    cmd_generate(cfg, log);
    const auto data = load_csv(cfg.out / "data.csv", Task::classification);
    CHECK(data.size() == 400);
    CHECK(read_metadata(cfg.out / "data.meta").at("task") == "classification");
    std::ifstream shards(cfg.out / "shards.csv");
    std::size_t lines = 0;
    for (std::string l; std::getline(shards, l);) ++lines;
    CHECK(lines == 401);

    cmd_make_target(cfg, log);
    const auto ts = read_vector_csv(cfg.out / "target.csv");
    const auto tg = read_vector_csv(cfg.out / "theta_gt.csv");
    CHECK(std::abs((ts - tg).norm() / tg.norm() - 1.0) <= 1e-12);

    // teaching from the written files equals teaching from the generator
    auto from_files = small(Task::classification, "gen_teach_files");
    from_files.data = cfg.out / "data.csv";
    from_files.target = cfg.out / "target.csv";
    auto from_gen = small(Task::classification, "gen_teach_synth");
    CHECK(cmd_teach(from_files, log)[0].risk_euclid == cmd_teach(from_gen, log)[0].risk_euclid);
}

TEST_CASE("stage errors carry exit codes")
{
    std::ostringstream log;
    auto cfg = small(Task::classification, "errors");
    std::ofstream(cfg.out / "bad.csv") << "x0,x1,label\n1,2,1\n3,1\n";
    cfg.data = cfg.out / "bad.csv";
    try {
        cmd_teach(cfg, log);
        FAIL("expected a data error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "data");
        CHECK(e.exit_code() == 1);
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }

    auto bad = small(Task::classification, "errors_cfg");
    bad.teaching.beta = {1, 1, 9, 1};
    try {
        cmd_teach(bad, log);
        FAIL("expected a config error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "config");
        CHECK(e.exit_code() == 1);
    }

    auto huge = small(Task::regression, "errors_numeric");
    std::ofstream(huge.out / "t.csv") << "theta_star\n1e300\n1e300\n1e300\n1e300\n1e300\n";
    huge.target = huge.out / "t.csv";
    try {
        cmd_teach(huge, log);
        FAIL("expected a numeric error");
    } catch (const StageError& e) {
        CHECK(e.exit_code() == 2);
    }
}

TEST_CASE("check command writes its report")
{
    std::ostringstream log;
    auto cfg = small(Task::classification, "check");
    cfg.property = Property::gradient;
    const auto rep = cmd_check(cfg, log);
    CHECK(rep.pass());
    CHECK(rep.seconds == 0.0);
    const auto j = nlohmann::json::parse(slurp(cfg.out / "check_gradient.json"));
    CHECK(j.at("passed") == 20);
}
