#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "coteach/detail/compensated_sum.hpp"
#include "coteach/engine.hpp"

namespace coteach {

TeachingConfig TeachingConfig::defaults_for(Task task)
{
    TeachingConfig c;
    if (task == Task::regression) {
        c.lambda_alpha = 1.0;
        c.lambda_theta = 2000.0;
    }
    return c;
}

void TeachingConfig::validate(std::size_t k) const
{
    auto fail = [](const std::string& what) { throw ParameterError("teaching config: " + what); };
    if (!(lambda > 0)) fail("lambda must be > 0");
    if (!(lambda_alpha >= 0)) fail("lambda_alpha must be >= 0");
    if (!(lambda_theta >= 0)) fail("lambda_theta must be >= 0");
    if (!(inner_tol > 0)) fail("inner_tol must be > 0");
    if (!(outer_tol >= 0)) fail("outer_tol must be >= 0");
    if (!(w_max > 0)) fail("w_max must be > 0");
    if (!(ols_eps > 0)) fail("ols_eps must be > 0");
    if (!(boundary_eps > 0 && boundary_eps < 0.5)) fail("boundary_eps must be in (0, 0.5)");
    if (inner_max_iter == 0) fail("inner_max_iter must be >= 1");
    if (!beta.empty()) {
        if (beta.size() != k) {
            fail("beta has " + std::to_string(beta.size()) + " entries for " + std::to_string(k) + " teachers");
        }
        for (double b : beta) {
            if (!(b >= 1.0 && b <= static_cast<double>(k))) fail("every beta must lie in [1, K]");
        }
    }
}

double TeachingConfig::beta_for(std::size_t teacher) const
{
    return beta.empty() ? 1.0 : beta.at(teacher);
}

double TeachingConfig::coupling(std::size_t k) const
{
    if (beta.empty() || k == 0) return 1.0;
    double total = 0.0;
    for (double b : beta) total += b;
    return std::max(1.0, total / static_cast<double>(k));
}

TeacherBlock prepare_block(const TeacherShard& shard)
{
    TeacherBlock b;
    b.teacher_id = shard.teacher_id;
    b.kind = loss_for(shard.data.task);
    b.y = shard.data.y;
    b.z = shard.data.x;
    if (b.kind == LossKind::logistic) b.z = shard.data.y.asDiagonal() * shard.data.x;
    b.shard = &shard;
    return b;
}

std::vector<TeacherBlock> prepare_blocks(const std::vector<TeacherShard>& shards)
{
    std::vector<TeacherBlock> blocks;
    blocks.reserve(shards.size());
    for (const auto& s : shards) blocks.push_back(prepare_block(s));
    return blocks;
}

DualState DualState::zeros(const std::vector<TeacherBlock>& blocks)
{
    DualState s;
    s.alpha.reserve(blocks.size());
    for (const auto& b : blocks) s.alpha.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.size())));
    s.theta_tilde = Eigen::VectorXd::Zero(blocks.empty() ? 0 : static_cast<Eigen::Index>(blocks.front().dim()));
    return s;
}

std::size_t DualState::total_size() const noexcept
{
    std::size_t n = 0;
    for (const auto& a : alpha) n += static_cast<std::size_t>(a.size());
    return n;
}

Eigen::MatrixXd local_gram(const TeacherBlock& block)
{
    return block.z.transpose() * block.z;
}

Eigen::VectorXd warm_start_direction(std::span<const Eigen::MatrixXd> grams,
                                     const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                                     double lambda, double ols_eps)
{
    const auto d = theta_star.size();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
    for (const auto& gi : grams) {
        if (gi.rows() != d || gi.cols() != d) throw ParameterError("warm start: Gram aggregate has wrong shape");
        g += gi;
    }
    const double eps = ols_eps * g.trace() / static_cast<double>(d);
    g.diagonal().array() += eps;
    Eigen::VectorXd v = lambda * g.ldlt().solve(theta_star);
    if (!v.allFinite()) throw NumericError("warm start: least-squares system is singular");
    return v;
}

Eigen::VectorXd local_warm_estimate(const TeacherBlock& block,
                                    const Eigen::Ref<const Eigen::VectorXd>& direction)
{
    return block.z * direction;
}

Eigen::VectorXd adaptive_weights(const Eigen::Ref<const Eigen::VectorXd>& alpha_hat, double w_max)
{
    Eigen::VectorXd w(alpha_hat.size());
    for (Eigen::Index j = 0; j < w.size(); ++j) {
        const double a = std::abs(alpha_hat(j));
        w(j) = (a > 0 && 1.0 / a < w_max) ? 1.0 / a : w_max;
    }
    if (!w.allFinite()) throw NumericError("warm start: non-finite adaptive weight");
    return w;
}

WeightVector warm_start_weights(const std::vector<TeacherBlock>& blocks,
                                const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                                double lambda, double ols_eps, double w_max)
{
    std::vector<Eigen::MatrixXd> grams;
    grams.reserve(blocks.size());
    for (const auto& b : blocks) grams.push_back(local_gram(b));
    const Eigen::VectorXd direction = warm_start_direction(grams, theta_star, lambda, ols_eps);
    WeightVector out;
    out.w.reserve(blocks.size());
    for (const auto& b : blocks) out.w.push_back(adaptive_weights(local_warm_estimate(b, direction), w_max));
    return out;
}

Eigen::VectorXd model_from_dual(const std::vector<Eigen::VectorXd>& alpha,
                                const std::vector<TeacherBlock>& blocks, double lambda)
{
    if (alpha.size() != blocks.size()) throw ParameterError("model_from_dual: block count mismatch");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(blocks.empty() ? 0 : static_cast<Eigen::Index>(blocks.front().dim()));
    for (std::size_t i = 0; i < blocks.size(); ++i) acc.noalias() += blocks[i].z.transpose() * alpha[i];
    return acc / lambda;
}

namespace {

double conjugate_weight(const TeachingConfig& config, std::size_t n)
{
    return config.normalize_conjugate && n > 0 ? 1.0 / static_cast<double>(n) : 1.0;
}

std::size_t total_rows(const std::vector<TeacherBlock>& blocks)
{
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.size();
    return n;
}

}  // namespace

ObjectiveTerms objective_terms(const std::vector<Eigen::VectorXd>& alpha,
                               const std::vector<TeacherBlock>& blocks,
                               const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                               const TeachingConfig& config, const WeightVector& weights)
{
    if (weights.w.size() != blocks.size()) throw ParameterError("objective: weight block count mismatch");
    const Eigen::VectorXd theta = model_from_dual(alpha, blocks, config.lambda);
    detail::CompensatedSum conj;
    detail::CompensatedSum l1;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& a = alpha[i];
        if (a.size() != static_cast<Eigen::Index>(blocks[i].size()) || weights.w[i].size() != a.size()) {
            throw ParameterError("objective: block " + std::to_string(i) + " size mismatch");
        }
        for (Eigen::Index j = 0; j < a.size(); ++j) {
            conj.add(conjugate(blocks[i].kind, a(j), blocks[i].y(j)));
            l1.add(weights.w[i](j) * std::abs(a(j)));
        }
    }
    ObjectiveTerms t;
    t.conjugate = conjugate_weight(config, total_rows(blocks)) * conj.value();
    t.model_norm = 0.5 * config.lambda * theta.squaredNorm();
    t.target_gap = config.lambda_theta * (theta_star - theta).squaredNorm();
    t.l1 = config.lambda_alpha * l1.value();
    return t;
}

double objective(const std::vector<Eigen::VectorXd>& alpha, const std::vector<TeacherBlock>& blocks,
                 const Eigen::Ref<const Eigen::VectorXd>& theta_star, const TeachingConfig& config,
                 const WeightVector& weights)
{
    return objective_terms(alpha, blocks, theta_star, config, weights).total();
}

double smooth_objective(const std::vector<Eigen::VectorXd>& alpha,
                        const std::vector<TeacherBlock>& blocks,
                        const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                        const TeachingConfig& config)
{
    WeightVector zero;
    for (const auto& a : alpha) zero.w.push_back(Eigen::VectorXd::Zero(a.size()));
    const auto t = objective_terms(alpha, blocks, theta_star, config, zero);
    return t.conjugate + t.model_norm + t.target_gap;
}

std::vector<Eigen::VectorXd> smooth_gradient(const std::vector<Eigen::VectorXd>& alpha,
                                             const std::vector<TeacherBlock>& blocks,
                                             const Eigen::Ref<const Eigen::VectorXd>& theta_star,
                                             const TeachingConfig& config)
{
    const Eigen::VectorXd theta = model_from_dual(alpha, blocks, config.lambda);
    // d/dalpha_j of (lambda/2)||theta||^2 + lambda_theta||theta - theta*||^2 is z_j . pull
    const Eigen::VectorXd pull = theta + (2.0 * config.lambda_theta / config.lambda) * (theta - theta_star);
    const double cw = conjugate_weight(config, total_rows(blocks));
    std::vector<Eigen::VectorXd> grad;
    grad.reserve(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        Eigen::VectorXd g = blocks[i].z * pull;
        for (Eigen::Index j = 0; j < g.size(); ++j) g(j) += cw * conjugate_grad(blocks[i].kind, alpha[i](j), blocks[i].y(j));
        grad.push_back(std::move(g));
    }
    return grad;
}

double soft_threshold(double v, double t) noexcept
{
    const double m = std::abs(v) - t;
    if (m <= 0) return 0.0;
    return v > 0 ? m : -m;
}

}  // namespace coteach
