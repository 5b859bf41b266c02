#include "coteach/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "coteach/errors.hpp"
#include "coteach/learner.hpp"

namespace coteach {

namespace fs = std::filesystem;

Example Dataset::example(std::size_t j) const
{
    return Example{x.row(static_cast<Eigen::Index>(j)).transpose(), y(static_cast<Eigen::Index>(j))};
}

Dataset Dataset::from_examples(Task task, const std::vector<Example>& examples)
{
    Dataset out;
    out.task = task;
    if (examples.empty()) return out;
    const auto d = examples.front().features.size();
    out.x.resize(static_cast<Eigen::Index>(examples.size()), d);
    out.y.resize(static_cast<Eigen::Index>(examples.size()));
    for (std::size_t j = 0; j < examples.size(); ++j) {
        if (examples[j].features.size() != d) {
            throw ParameterError("example " + std::to_string(j) + " has dimension " +
                                 std::to_string(examples[j].features.size()) + ", expected " +
                                 std::to_string(d));
        }
        out.x.row(static_cast<Eigen::Index>(j)) = examples[j].features.transpose();
        out.y(static_cast<Eigen::Index>(j)) = examples[j].label;
    }
    out.validate();
    return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const
{
    Dataset out;
    out.task = task;
    out.x.resize(static_cast<Eigen::Index>(indices.size()), x.cols());
    out.y.resize(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto src = static_cast<Eigen::Index>(indices[r]);
        out.x.row(static_cast<Eigen::Index>(r)) = x.row(src);
        out.y(static_cast<Eigen::Index>(r)) = y(src);
    }
    return out;
}

void Dataset::validate() const
{
    if (x.rows() != y.size()) throw ParameterError("feature rows and labels disagree in count");
    if (!x.allFinite() || !y.allFinite()) throw ParameterError("dataset contains non-finite values");
    if (task == Task::classification) {
        for (Eigen::Index j = 0; j < y.size(); ++j) {
            if (y(j) != 1.0 && y(j) != -1.0) {
                throw ParameterError("classification label at example " + std::to_string(j) +
                                     " is " + std::to_string(y(j)) + ", expected +1 or -1");
            }
        }
    }
}

Dataset gen_synthetic(const SyntheticSpec& spec)
{
    if (spec.d < 1) throw ParameterError("gen_synthetic: d must be >= 1");
    if (spec.clusters < 2) throw ParameterError("gen_synthetic: clusters must be >= 2");
    if (spec.n < spec.clusters) throw ParameterError("gen_synthetic: n must be >= clusters");
    if (spec.task == Task::classification) {
        if (spec.clusters % 2 != 0) throw ParameterError("gen_synthetic: classification needs an even cluster count");
        if (spec.n % 2 != 0) throw ParameterError("gen_synthetic: classification needs an even n for exact balance");
    }

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(spec.n);
    const auto d = static_cast<Eigen::Index>(spec.d);

    Eigen::MatrixXd centers(static_cast<Eigen::Index>(spec.clusters), d);
    for (Eigen::Index c = 0; c < centers.rows(); ++c)
        for (Eigen::Index k = 0; k < d; ++k) centers(c, k) = spec.center_scale * normal(rng);

    Dataset out;
    out.task = spec.task;
    out.x.resize(n, d);
    out.y.resize(n);

    const auto per_class = static_cast<Eigen::Index>(spec.clusters / 2);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Index c;
        if (spec.task == Task::classification) {
            // even j -> +1 clusters [0, per_class), odd j -> -1 clusters [per_class, clusters)
            const bool positive = (j % 2) == 0;
            c = (j / 2) % per_class + (positive ? 0 : per_class);
            out.y(j) = positive ? 1.0 : -1.0;
        } else {
            c = j % centers.rows();
        }
        for (Eigen::Index k = 0; k < d; ++k) out.x(j, k) = centers(c, k) + spec.cluster_std * normal(rng);
    }

    if (spec.task == Task::regression) {
        Eigen::VectorXd beta(d);
        for (Eigen::Index k = 0; k < d; ++k) beta(k) = normal(rng);
        out.y = out.x * beta;
        for (Eigen::Index j = 0; j < n; ++j) out.y(j) += spec.regression_noise_std * normal(rng);
    }

    // Interleave cluster membership so row order carries no structure.
    std::vector<std::size_t> perm(spec.n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    return out.subset(perm);
}

namespace {

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

bool parse_double(const std::string& cell, double& out)
{
    if (cell.empty()) return false;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

}  // namespace

Dataset load_csv(const fs::path& path, Task task, const CsvOptions& opts)
{
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open " + path.string(), 0);

    std::string line;
    if (!std::getline(in, line)) throw IngestionError(path.string() + ": missing header row", 0);
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
    const auto header = split_csv_line(line);
    const auto label_it = std::find(header.begin(), header.end(), opts.label_column);
    if (label_it == header.end()) {
        throw IngestionError(path.string() + ": label column '" + opts.label_column +
                                 "' not found in header",
                             0);
    }
    const auto label_col = static_cast<std::size_t>(label_it - header.begin());
    const std::size_t arity = header.size();
    const std::size_t d = arity - 1;

    std::vector<double> features;
    std::vector<double> labels;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto cells = split_csv_line(line);
        if (cells.size() != arity) {
            throw IngestionError(path.string() + ": row " + std::to_string(row) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(arity),
                                 row);
        }
        for (std::size_t c = 0; c < arity; ++c) {
            double v = 0.0;
            if (!parse_double(cells[c], v) || !std::isfinite(v)) {
                throw IngestionError(path.string() + ": row " + std::to_string(row) + ", column '" +
                                         header[c] + "': non-numeric cell '" + cells[c] + "'",
                                     row);
            }
            if (c == label_col) {
                if (task == Task::classification) {
                    if (opts.remap_01 && (v == 0.0 || v == 1.0)) v = 2.0 * v - 1.0;
                    if (v != 1.0 && v != -1.0) {
                        throw IngestionError(path.string() + ": row " + std::to_string(row) +
                                                 ": classification label " + cells[c] +
                                                 " is not +1/-1" +
                                                 (opts.remap_01 ? "" : " (use the 0/1 remap flag?)"),
                                             row);
                    }
                }
                labels.push_back(v);
            } else {
                features.push_back(v);
            }
        }
    }

    Dataset out;
    out.task = task;
    const auto n = static_cast<Eigen::Index>(labels.size());
    out.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        features.data(), n, static_cast<Eigen::Index>(d));
    out.y = Eigen::Map<const Eigen::VectorXd>(labels.data(), n);
    return out;
}

void write_csv(const Dataset& data, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path.string());
    for (std::size_t k = 0; k < data.dim(); ++k) out << 'x' << k << ',';
    out << "label\n";
    char buf[32];
    auto put = [&](double v) {
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        out.write(buf, ptr - buf);
    };
    for (Eigen::Index j = 0; j < data.x.rows(); ++j) {
        for (Eigen::Index k = 0; k < data.x.cols(); ++k) {
            put(data.x(j, k));
            out << ',';
        }
        put(data.y(j));
        out << '\n';
    }
}

void write_metadata(const Metadata& meta, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path.string());
    for (const auto& [k, v] : meta) out << k << '=' << v << '\n';
}

Metadata read_metadata(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open " + path.string(), 0);
    Metadata meta;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw IngestionError(path.string() + ": line " + std::to_string(row) + " lacks '='", row);
        meta[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
    }
    return meta;
}

std::vector<TeacherShard> shard(const Dataset& data, std::size_t k, std::uint64_t seed)
{
    const std::size_t n = data.size();
    if (k < 1) throw ParameterError("shard: K must be >= 1");
    if (k > n) throw ParameterError("shard: K = " + std::to_string(k) + " exceeds N = " + std::to_string(n));

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<TeacherShard> shards(k);
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t len = base + (i < extra ? 1 : 0);
        shards[i].teacher_id = i;
        shards[i].global_offsets.assign(perm.begin() + static_cast<std::ptrdiff_t>(cursor),
                                        perm.begin() + static_cast<std::ptrdiff_t>(cursor + len));
        shards[i].data = data.subset(shards[i].global_offsets);
        cursor += len;
    }
    return shards;
}

void write_shard_manifest(const std::vector<TeacherShard>& shards, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path.string());
    out << "global_index,teacher_id,local_index\n";
    for (const auto& s : shards)
        for (std::size_t j = 0; j < s.global_offsets.size(); ++j)
            out << s.global_offsets[j] << ',' << s.teacher_id << ',' << j << '\n';
}

TeachingGoal make_target(const Dataset& data, double lambda, double noise_ratio, std::uint64_t seed)
{
    if (!(lambda > 0)) throw ParameterError("make_target: lambda must be > 0");
    if (data.empty()) throw ParameterError("make_target: empty dataset");
    if (!(noise_ratio >= 0)) throw ParameterError("make_target: noise_ratio must be >= 0");

    TeachingGoal goal;
    goal.noise_ratio = noise_ratio;
    goal.theta_gt = fit_primal(data, lambda).theta;
    if (!goal.theta_gt.allFinite()) throw NumericError("make_target: full-data fit is not finite");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd tau(goal.theta_gt.size());
    for (Eigen::Index k = 0; k < tau.size(); ++k) tau(k) = normal(rng);
    const double target_norm = noise_ratio * goal.theta_gt.norm();
    const double tau_norm = tau.norm();
    tau = (tau_norm > 0 && target_norm > 0) ? Eigen::VectorXd(tau * (target_norm / tau_norm))
                                            : Eigen::VectorXd::Zero(tau.size());
    goal.theta_star = goal.theta_gt + tau;
    return goal;
}

void write_vector_csv(const Eigen::VectorXd& v, const std::string& column, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path.string());
    out << column << '\n';
    char buf[32];
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v(k));
        out.write(buf, ptr - buf);
        out << '\n';
    }
}

Eigen::VectorXd read_vector_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open " + path.string(), 0);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> values;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty()) continue;
        ++row;
        double v = 0.0;
        if (!parse_double(t, v)) throw IngestionError(path.string() + ": row " + std::to_string(row) + " is not numeric", row);
        values.push_back(v);
    }
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace coteach
