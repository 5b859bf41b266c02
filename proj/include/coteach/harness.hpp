#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "coteach/baselines.hpp"
#include "coteach/checks.hpp"
#include "coteach/dataset.hpp"
#include "coteach/engine.hpp"

namespace coteach {

/// Everything an experiment needs. Seeds for the later stages derive from
/// `seed`: synthetic data uses seed, the target seed+1, sharding seed+2 and
/// the random baseline seed+3.
struct ExperimentConfig {
    Task task = Task::classification;

    // data source: CSV when `data` is set, synthetic otherwise
    std::filesystem::path data;
    std::string label_column = "label";
    bool remap01 = false;
    SyntheticSpec synth;

    std::size_t k = 5;

    // target: read from `target` when set, made from the data otherwise
    std::filesystem::path target;
    double noise_ratio = 1.0;

    TeachingConfig teaching;

    double budget_fraction = 0.05;
    std::size_t budget = 0;  // absolute count; overrides budget_fraction when > 0
    std::vector<double> fractions{0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
    bool with_oblivious = false;
    bool with_random = false;
    BaselineKind baseline = BaselineKind::oblivious;
    Property property = Property::theorem1;

    std::filesystem::path out = "out";
    std::filesystem::path resume;
    std::uint64_t seed = 0;
    bool timing = false;  // false writes runtime_seconds as 0 so outputs stay byte-stable

    static ExperimentConfig defaults_for(Task task);
    void validate() const;
};

/// One line of the results table.
struct ResultRow {
    std::string method;
    std::size_t n = 0;
    std::size_t k = 0;
    double budget_fraction = 0.0;
    double risk_euclid = 0.0;
    double rho = 0.0;
    double teaching_ratio = 0.0;
    std::size_t rounds_used = 0;
    double runtime_seconds = 0.0;
    std::size_t reals_communicated = 0;
};

void write_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);

/// A pipeline stage failed. exit_code is 1 for validation problems and 2 for
/// numeric or convergence failures.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& msg, int exit_code)
        : std::runtime_error("stage '" + stage + "': " + msg), stage_(std::move(stage)), code_(exit_code) {}
    const std::string& stage() const noexcept { return stage_; }
    int exit_code() const noexcept { return code_; }

private:
    std::string stage_;
    int code_;
};

/// Resolved inputs shared by every subcommand.
struct Prepared {
    Dataset data;
    TeachingGoal goal;
    std::vector<TeacherShard> shards;
    double risk_full = 0.0;
};

Dataset load_or_generate(const ExperimentConfig& cfg);
TeachingGoal load_or_make_target(const ExperimentConfig& cfg, const Dataset& data);
Prepared prepare(const ExperimentConfig& cfg, std::ostream& log);

std::size_t resolve_budget(const ExperimentConfig& cfg, std::size_t n);

void cmd_generate(const ExperimentConfig& cfg, std::ostream& log);
void cmd_make_target(const ExperimentConfig& cfg, std::ostream& log);
std::vector<ResultRow> cmd_teach(const ExperimentConfig& cfg, std::ostream& log);
std::vector<ResultRow> cmd_baseline(const ExperimentConfig& cfg, std::ostream& log);
std::vector<ResultRow> cmd_sweep(const ExperimentConfig& cfg, std::ostream& log);
SuiteReport cmd_check(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace coteach
