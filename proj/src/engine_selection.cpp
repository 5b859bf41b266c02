#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "coteach/engine.hpp"

namespace coteach {

namespace fs = std::filesystem;

std::size_t SelectionResult::selected_count() const noexcept
{
    std::size_t n = 0;
    for (const auto& m : masks) n += static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
    return n;
}

std::vector<std::size_t> SelectionResult::selected_indices(const std::vector<TeacherShard>& shards) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < masks.size(); ++i)
        for (std::size_t j = 0; j < masks[i].size(); ++j)
            if (masks[i][j]) out.push_back(shards[i].global_offsets[j]);
    std::sort(out.begin(), out.end());
    return out;
}

SelectionResult select_subset(const DualState& state, const std::vector<TeacherShard>& shards, std::size_t budget)
{
    if (state.alpha.size() != shards.size()) throw ParameterError("select_subset: block count mismatch");
    const std::size_t n = state.total_size();
    if (budget == 0 || budget > n) {
        throw ParameterError("select_subset: budget " + std::to_string(budget) + " outside [1, " + std::to_string(n) + "]");
    }

    struct Entry {
        double magnitude;
        std::size_t global;
        std::size_t teacher;
        std::size_t local;
    };
    std::vector<Entry> entries;
    entries.reserve(n);
    for (std::size_t i = 0; i < shards.size(); ++i) {
        if (static_cast<std::size_t>(state.alpha[i].size()) != shards[i].size()) {
            throw ParameterError("select_subset: block " + std::to_string(i) + " size mismatch");
        }
        for (std::size_t j = 0; j < shards[i].size(); ++j)
            entries.push_back({std::abs(state.alpha[i](static_cast<Eigen::Index>(j))), shards[i].global_offsets[j], i, j});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
        return a.global < b.global;
    });

    SelectionResult sel;
    sel.budget = budget;
    sel.masks.resize(shards.size());
    for (std::size_t i = 0; i < shards.size(); ++i) sel.masks[i].assign(shards[i].size(), 0);
    sel.global_ranking.reserve(n);
    for (std::size_t r = 0; r < entries.size(); ++r) {
        sel.global_ranking.push_back(entries[r].global);
        if (r < budget) sel.masks[entries[r].teacher][entries[r].local] = 1;
    }
    return sel;
}

Dataset selected_data(const SelectionResult& sel, const std::vector<TeacherShard>& shards)
{
    struct Pick {
        std::size_t global, teacher, local;
    };
    std::vector<Pick> picks;
    for (std::size_t i = 0; i < sel.masks.size(); ++i)
        for (std::size_t j = 0; j < sel.masks[i].size(); ++j)
            if (sel.masks[i][j]) picks.push_back({shards[i].global_offsets[j], i, j});
    std::sort(picks.begin(), picks.end(), [](const Pick& a, const Pick& b) { return a.global < b.global; });

    Dataset out;
    out.task = shards.empty() ? Task::classification : shards.front().data.task;
    const auto d = shards.empty() ? 0 : static_cast<Eigen::Index>(shards.front().dim());
    out.x.resize(static_cast<Eigen::Index>(picks.size()), d);
    out.y.resize(static_cast<Eigen::Index>(picks.size()));
    for (std::size_t r = 0; r < picks.size(); ++r) {
        const auto& src = shards[picks[r].teacher].data;
        out.x.row(static_cast<Eigen::Index>(r)) = src.x.row(static_cast<Eigen::Index>(picks[r].local));
        out.y(static_cast<Eigen::Index>(r)) = src.y(static_cast<Eigen::Index>(picks[r].local));
    }
    return out;
}

std::size_t budget_for_fraction(double fraction, std::size_t n)
{
    if (!(fraction > 0 && fraction <= 1)) throw ParameterError("budget fraction must lie in (0, 1]");
    const auto b = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    return std::clamp<std::size_t>(b, 1, n);
}

SweepResult sweep_budgets(const std::vector<TeacherShard>& shards, const Dataset& full,
                          const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                          const TeachingConfig& config, const std::vector<double>& fractions)
{
    if (fractions.empty()) throw ParameterError("sweep: no budget fractions");
    for (std::size_t f = 0; f < fractions.size(); ++f) {
        if (!(fractions[f] > 0 && fractions[f] <= 1)) throw ParameterError("sweep: fractions must lie in (0, 1]");
        if (f > 0 && fractions[f] <= fractions[f - 1]) throw ParameterError("sweep: fractions must be strictly increasing");
    }

    SweepResult out;
    out.run = run_teaching(shards, theta_star, full.task, config);
    const auto theta_full = fit_primal(full, config.lambda).theta;
    out.risk_full = teaching_risk(theta_full, theta_star).euclid;

    for (double f : fractions) {
        SweepRow row;
        row.fraction = f;
        row.budget = budget_for_fraction(f, full.size());
        const auto sel = select_subset(out.run.state, shards, row.budget);
        const auto theta = fit_primal(selected_data(sel, shards), config.lambda).theta;
        row.metrics = evaluate(full, theta, theta_star, out.risk_full);
        row.metrics.runtime_seconds = out.run.runtime_seconds;
        out.rows.push_back(row);
    }
    for (std::size_t r = 1; r < out.rows.size(); ++r)
        if (out.rows[r].metrics.risk_euclid < out.rows[out.best].metrics.risk_euclid) out.best = r;
    return out;
}

namespace {

void put_double(std::ostream& out, double v)
{
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, ptr - buf);
}

double get_double(std::istream& in, const fs::path& path)
{
    std::string tok;
    if (!(in >> tok)) throw IngestionError(path.string() + ": truncated state file", 0);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) throw IngestionError(path.string() + ": bad number '" + tok + "'", 0);
    return v;
}

constexpr const char* kStateMagic = "coteach-dual-state v1";

}  // namespace

void write_trace_csv(const RunTrace& trace, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path.string());
    out << "round,objective,risk,reals_up,reals_down\n";
    for (const auto& r : trace.rounds) {
        out << r.round << ',';
        put_double(out, r.objective);
        out << ',';
        if (r.risk) put_double(out, *r.risk);
        out << ',' << r.reals_up << ',' << r.reals_down << '\n';
    }
}

void write_state(const DualState& state, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path.string());
    out << kStateMagic << '\n' << state.alpha.size() << ' ' << state.theta_tilde.size() << '\n';
    for (std::size_t i = 0; i < state.alpha.size(); ++i) out << (i ? " " : "") << state.alpha[i].size();
    out << '\n' << state.round << '\n';
    auto put_vec = [&](const Eigen::VectorXd& v) {
        for (Eigen::Index j = 0; j < v.size(); ++j) {
            if (j) out << ' ';
            put_double(out, v(j));
        }
        out << '\n';
    };
    put_vec(state.theta_tilde);
    for (const auto& a : state.alpha) put_vec(a);
}

DualState read_state(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open " + path.string(), 0);
    std::string magic;
    std::getline(in, magic);
    if (magic != kStateMagic) throw IngestionError(path.string() + ": not a dual-state snapshot", 1);
    std::size_t k = 0;
    Eigen::Index d = 0;
    if (!(in >> k >> d)) throw IngestionError(path.string() + ": bad header", 2);
    std::vector<Eigen::Index> sizes(k);
    for (auto& s : sizes)
        if (!(in >> s)) throw IngestionError(path.string() + ": bad shard sizes", 3);
    DualState state;
    if (!(in >> state.round)) throw IngestionError(path.string() + ": bad round", 4);
    state.theta_tilde.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) state.theta_tilde(j) = get_double(in, path);
    for (auto s : sizes) {
        Eigen::VectorXd a(s);
        for (Eigen::Index j = 0; j < s; ++j) a(j) = get_double(in, path);
        state.alpha.push_back(std::move(a));
    }
    return state;
}

void write_selection_csv(const SelectionResult& sel, const DualState* state,
                         const std::vector<TeacherShard>& shards, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path.string());
    out << "global_index,teacher_id,local_index,alpha,selected\n";
    for (std::size_t i = 0; i < shards.size(); ++i) {
        for (std::size_t j = 0; j < shards[i].size(); ++j) {
            out << shards[i].global_offsets[j] << ',' << shards[i].teacher_id << ',' << j << ',';
            if (state) put_double(out, state->alpha[i](static_cast<Eigen::Index>(j)));
            out << ',' << int(sel.masks[i][j]) << '\n';
        }
    }
}

}  // namespace coteach
