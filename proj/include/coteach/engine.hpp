#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "coteach/dataset.hpp"
#include "coteach/errors.hpp"
#include "coteach/learner.hpp"
#include "coteach/losses.hpp"

namespace coteach {

/// Parameters of the regularized dual teaching objective and its solver.
///
/// The objective over all dual variables alpha is
///
///   c * sum_ij l*(-alpha_ij) + (lambda/2)||theta(alpha)||^2
///     + lambda_theta ||theta* - theta(alpha)||^2 + lambda_alpha sum_ij w_ij |alpha_ij|
///
/// with theta(alpha) = (1/lambda) sum_ij alpha_ij z_ij, z = y x for
/// classification and z = x for regression. c is 1, or 1/N when
/// normalize_conjugate is set.
struct TeachingConfig {
    double lambda = 1.0;
    double lambda_alpha = 0.1;
    double lambda_theta = 1000.0;
    std::vector<double> beta;  // per-teacher step scale in [1, K]; empty means all 1
    std::size_t rounds = 100;
    std::size_t inner_max_iter = 200;
    double inner_tol = 1e-8;
    double outer_tol = 0.0;  // 0 runs exactly `rounds`
    double w_max = 1e6;
    double ols_eps = 1e-8;
    double boundary_eps = kBoundaryEps;
    bool normalize_conjugate = false;
    std::size_t threads = 1;  // intra-round block parallelism
    std::uint64_t seed = 0;

    static TeachingConfig defaults_for(Task task);
    void validate(std::size_t k) const;
    double beta_for(std::size_t teacher) const;
    double coupling(std::size_t k) const;
};

/// Teacher-side view of a shard: the signed columns z_j and labels. Only the
/// owning teacher ever touches this.
struct TeacherBlock {
    std::size_t teacher_id = 0;
    LossKind kind = LossKind::logistic;
    Eigen::MatrixXd z;  // N_i x d
    Eigen::VectorXd y;
    const TeacherShard* shard = nullptr;

    std::size_t size() const noexcept { return static_cast<std::size_t>(z.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(z.cols()); }
};

TeacherBlock prepare_block(const TeacherShard& shard);
std::vector<TeacherBlock> prepare_blocks(const std::vector<TeacherShard>& shards);

struct DualState {
    std::vector<Eigen::VectorXd> alpha;  // one block per teacher
    Eigen::VectorXd theta_tilde;         // (1/lambda) sum alpha_ij z_ij
    std::size_t round = 0;

    static DualState zeros(const std::vector<TeacherBlock>& blocks);
    std::size_t total_size() const noexcept;
};

struct WeightVector {
    std::vector<Eigen::VectorXd> w;  // aligned with DualState::alpha
};

// ---------------------------------------------------------------------------
// Warm-start weights. Teachers publish d x d Gram aggregates, the coordinator
// solves a d x d system and broadcasts one d-vector back.
// ---------------------------------------------------------------------------

Eigen::MatrixXd local_gram(const TeacherBlock& block);

/// lambda (sum_i G_i + eps I)^{-1} theta*, eps = ols_eps * trace(G) / d.
Eigen::VectorXd warm_start_direction(std::span<const Eigen::MatrixXd> grams,
                                     const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                                     double lambda, double ols_eps);

/// Teacher-local part of the minimum-norm least-squares estimate alpha_hat.
Eigen::VectorXd local_warm_estimate(const TeacherBlock& block,
                                    const Eigen::Ref<const Eigen::VectorXd>& direction);

/// w_j = min(1 / |alpha_hat_j|, w_max).
Eigen::VectorXd adaptive_weights(const Eigen::Ref<const Eigen::VectorXd>& alpha_hat, double w_max);

WeightVector warm_start_weights(const std::vector<TeacherBlock>& blocks,
                                const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                                double lambda, double ols_eps, double w_max);

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

struct ObjectiveTerms {
    double conjugate = 0.0;
    double model_norm = 0.0;
    double target_gap = 0.0;
    double l1 = 0.0;
    double total() const noexcept { return conjugate + model_norm + target_gap + l1; }
};

/// theta(alpha) recomputed from every block, summed in teacher order.
Eigen::VectorXd model_from_dual(const std::vector<Eigen::VectorXd>& alpha,
                                const std::vector<TeacherBlock>& blocks, double lambda);

ObjectiveTerms objective_terms(const std::vector<Eigen::VectorXd>& alpha,
                               const std::vector<TeacherBlock>& blocks,
                               const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                               const TeachingConfig& config, const WeightVector& weights);

double objective(const std::vector<Eigen::VectorXd>& alpha, const std::vector<TeacherBlock>& blocks,
                 const Eigen::Ref<const Eigen::VectorXd>& theta_star, const TeachingConfig& config,
                 const WeightVector& weights);

/// Smooth part (everything but the weighted l1 term) and its gradient with
/// respect to alpha, flattened in teacher order.
double smooth_objective(const std::vector<Eigen::VectorXd>& alpha,
                        const std::vector<TeacherBlock>& blocks,
                        const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                        const TeachingConfig& config);
std::vector<Eigen::VectorXd> smooth_gradient(const std::vector<Eigen::VectorXd>& alpha,
                                             const std::vector<TeacherBlock>& blocks,
                                             const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                                             const TeachingConfig& config);

double soft_threshold(double v, double t) noexcept;

// ---------------------------------------------------------------------------
// Block update (teacher side)
// ---------------------------------------------------------------------------

/// Inputs a teacher receives each round besides its own shard.
struct BlockContext {
    Eigen::Ref<const Eigen::VectorXd> theta_tilde;  // round t-1 aggregate
    Eigen::Ref<const Eigen::VectorXd> theta_star;
    double conjugate_weight = 1.0;
    // curvature multiplier on the shared quadratic, max(1, sum_i beta_i / K)
    double coupling = 1.0;
};

struct BlockUpdate {
    Eigen::VectorXd delta;
    double surrogate_before = 0.0;  // F_i(0)
    double surrogate_after = 0.0;   // F_i(delta)
    std::size_t iterations = 0;
};

/// Approximately minimizes the local surrogate F_i(delta) by backtracking
/// proximal gradient with Barzilai-Borwein step guesses. The result never
/// increases the surrogate: F_i(delta) <= F_i(0).
BlockUpdate local_block_update(const TeacherBlock& block,
                               const Eigen::Ref<const Eigen::VectorXd>& alpha_block,
                               const BlockContext& ctx, const TeachingConfig& config,
                               const Eigen::Ref<const Eigen::VectorXd>& weights_block);

/// F_i(delta) evaluated directly; used by tests and diagnostics.
double local_surrogate(const TeacherBlock& block, const Eigen::Ref<const Eigen::VectorXd>& alpha_block,
                       const Eigen::Ref<const Eigen::VectorXd>& delta, const BlockContext& ctx,
                       const TeachingConfig& config, const Eigen::Ref<const Eigen::VectorXd>& weights_block);

/// What a teacher sends up after applying its scaled step: the d-vector
/// sum_j (alpha_new_j - alpha_old_j) z_j.
struct TeacherMessage {
    std::size_t teacher_id = 0;
    Eigen::VectorXd aggregate;
};

/// alpha_new = Pi(alpha_old + step * delta); returns the message for the reduce.
TeacherMessage apply_local_step(const TeacherBlock& block, Eigen::VectorXd& alpha_block,
                                const Eigen::Ref<const Eigen::VectorXd>& delta, double step,
                                const ConjugateDomain& domain);

// ---------------------------------------------------------------------------
// Coordinator side: sees only d-vectors.
// ---------------------------------------------------------------------------

struct CommTally {
    std::size_t reals_up = 0;
    std::size_t reals_down = 0;
};

/// theta_tilde += (1/lambda) sum_i message_i, accumulated in ascending
/// teacher_id order. Counts K*d reals up and K*d down (the broadcast).
void reduce_and_broadcast(Eigen::VectorXd& theta_tilde, std::span<const TeacherMessage> messages,
                          double lambda, CommTally& tally);

/// One full coordinator step: every teacher applies its delta, then the reduce.
DualState apply_and_reduce(const DualState& state, const std::vector<Eigen::VectorXd>& deltas,
                           const std::vector<TeacherBlock>& blocks, const TeachingConfig& config,
                           CommTally& tally);

// ---------------------------------------------------------------------------
// Rounds
// ---------------------------------------------------------------------------

struct RoundRecord {
    std::size_t round = 0;
    double objective = 0.0;
    std::optional<double> risk;  // ||theta_tilde - theta*||
    std::size_t reals_up = 0;
    std::size_t reals_down = 0;
};

struct RunTrace {
    double initial_objective = 0.0;
    std::vector<RoundRecord> rounds;
    CommTally totals;

    std::size_t rounds_used() const noexcept { return rounds.size(); }
    bool monotone(double slack = 1e-9) const noexcept;
};

struct TeachingRun {
    DualState state;
    RunTrace trace;
    WeightVector weights;
    double runtime_seconds = 0.0;
};

struct RunOptions {
    const DualState* resume = nullptr;
    bool track_risk = true;
    // Called after every reduce; sees the new state and the round record.
    std::function<void(const DualState&, const RoundRecord&)> on_round;
};

/// Raised when a round fails numerically; carries the rounds completed so far.
class TeachingAborted : public NumericError {
public:
    TeachingAborted(const std::string& msg, RunTrace partial)
        : NumericError(msg), partial_(std::move(partial)) {}
    const RunTrace& partial_trace() const noexcept { return partial_; }

private:
    RunTrace partial_;
};

/// Bulk-synchronous block-coordinate descent. Starts from alpha = 0 and
/// theta_tilde = 0 (or `opts.resume`), runs up to config.rounds rounds, and
/// stops early once the relative objective change drops below outer_tol.
TeachingRun run_teaching(const std::vector<TeacherShard>& shards,
                         const Eigen::Ref<const Eigen::VectorXd>& theta_star, Task task,
                         const TeachingConfig& config, const RunOptions& opts = {});

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

struct SelectionResult {
    std::vector<std::vector<std::uint8_t>> masks;  // b^i per teacher
    std::size_t budget = 0;
    std::vector<std::size_t> global_ranking;

    std::size_t selected_count() const noexcept;
    /// Selected global indices, ascending.
    std::vector<std::size_t> selected_indices(const std::vector<TeacherShard>& shards) const;
};

/// Ranks every example by |alpha| descending (ties: ascending global index)
/// and marks the top `budget`.
SelectionResult select_subset(const DualState& state, const std::vector<TeacherShard>& shards,
                              std::size_t budget);

/// Union of the selected examples, in ascending global index order.
Dataset selected_data(const SelectionResult& sel, const std::vector<TeacherShard>& shards);

std::size_t budget_for_fraction(double fraction, std::size_t n);

struct SweepRow {
    double fraction = 0.0;
    std::size_t budget = 0;
    Metrics metrics;
};

struct SweepResult {
    TeachingRun run;
    std::vector<SweepRow> rows;
    double risk_full = 0.0;
    std::size_t best = 0;  // index into rows with the smallest risk
};

/// One teaching run, then for each fraction: select, refit on the union,
/// score against the whole dataset.
SweepResult sweep_budgets(const std::vector<TeacherShard>& shards, const Dataset& full,
                          const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                          const TeachingConfig& config, const std::vector<double>& fractions);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// round,objective,risk,reals_up,reals_down
void write_trace_csv(const RunTrace& trace, const std::filesystem::path& path);

/// Text snapshot: header line, "K d", shard sizes, round, theta_tilde, then
/// one line per alpha block. Values use shortest round-trip formatting.
void write_state(const DualState& state, const std::filesystem::path& path);
DualState read_state(const std::filesystem::path& path);

/// global_index,teacher_id,local_index,alpha,selected
void write_selection_csv(const SelectionResult& sel, const DualState* state,
                         const std::vector<TeacherShard>& shards, const std::filesystem::path& path);

}  // namespace coteach
