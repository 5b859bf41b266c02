#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "coteach/losses.hpp"

namespace coteach {

struct Example {
    Eigen::VectorXd features;
    double label = 0.0;
};

/// Row-major view of a labeled dataset: row j of `x` is example j.
/// Classification labels are exactly +1 or -1.
struct Dataset {
    Task task = Task::classification;
    Eigen::MatrixXd x;
    Eigen::VectorXd y;

    std::size_t size() const noexcept { return static_cast<std::size_t>(x.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(x.cols()); }
    bool empty() const noexcept { return x.rows() == 0; }
    Example example(std::size_t j) const;

    static Dataset from_examples(Task task, const std::vector<Example>& examples);
    // Rows at `indices`, in the given order.
    Dataset subset(const std::vector<std::size_t>& indices) const;
    // Throws ParameterError if labels or dimensions violate the invariants.
    void validate() const;
};

/// One teacher's private partition. `global_offsets[j]` is the global index of
/// local example j.
struct TeacherShard {
    std::size_t teacher_id = 0;
    Dataset data;
    std::vector<std::size_t> global_offsets;

    std::size_t size() const noexcept { return data.size(); }
    std::size_t dim() const noexcept { return data.dim(); }
};

struct TeachingGoal {
    Eigen::VectorXd theta_star;
    Eigen::VectorXd theta_gt;
    double noise_ratio = 0.0;
};

struct SyntheticSpec {
    Task task = Task::classification;
    std::size_t n = 5000;
    std::size_t d = 10;
    std::size_t clusters = 4;
    std::uint64_t seed = 0;
    double center_scale = 1.0;
    double cluster_std = 0.3;
    double regression_noise_std = 0.1;
};

/// Normal clusters around N(0, center_scale^2 I) centers. Classification puts
/// clusters/2 clusters on each class and alternates labels so the two classes
/// are exactly balanced; regression labels come from a random linear model
/// plus N(0, regression_noise_std^2) noise.
Dataset gen_synthetic(const SyntheticSpec& spec);

struct CsvOptions {
    std::string label_column = "label";
    bool remap_01 = false;  // {0,1} -> {-1,+1} for classification
};

/// Header row required. Features are every non-label column in header order.
/// Errors name the 1-based data row (the header is not counted).
Dataset load_csv(const std::filesystem::path& path, Task task, const CsvOptions& opts = {});

/// Writes `x0..x{d-1},label` with round-trip precision.
void write_csv(const Dataset& data, const std::filesystem::path& path);

using Metadata = std::map<std::string, std::string>;

// Plain key=value sidecar, one pair per line, keys sorted.
void write_metadata(const Metadata& meta, const std::filesystem::path& path);
Metadata read_metadata(const std::filesystem::path& path);

/// Seeded uniform permutation, then contiguous blocks. The first N mod K
/// shards receive one extra example.
std::vector<TeacherShard> shard(const Dataset& data, std::size_t k, std::uint64_t seed);

/// Shard manifest CSV: global_index,teacher_id,local_index.
void write_shard_manifest(const std::vector<TeacherShard>& shards,
                          const std::filesystem::path& path);

/// theta_gt = full-data primal fit; theta_star = theta_gt + tau where tau is an
/// isotropic normal draw rescaled to ||tau|| = noise_ratio * ||theta_gt||.
TeachingGoal make_target(const Dataset& data, double lambda, double noise_ratio,
                         std::uint64_t seed);

void write_vector_csv(const Eigen::VectorXd& v, const std::string& column,
                      const std::filesystem::path& path);
Eigen::VectorXd read_vector_csv(const std::filesystem::path& path);

}  // namespace coteach
