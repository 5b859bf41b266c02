#include <algorithm>
#include <cmath>
#include <string>

#include "coteach/detail/compensated_sum.hpp"
#include "coteach/engine.hpp"

namespace coteach {

namespace {

constexpr double kMinCurvature = 1e-12;
constexpr double kMaxCurvature = 1e30;

// Local surrogate in terms of the block's new value u = alpha_old + delta.
class LocalProblem {
public:
    LocalProblem(const TeacherBlock& block, const Eigen::Ref<const Eigen::VectorXd>& alpha_old,
                 const BlockContext& ctx, const TeachingConfig& config,
                 const Eigen::Ref<const Eigen::VectorXd>& weights)
        : block_(block),
          alpha_old_(alpha_old),
          ctx_(ctx),
          config_(config),
          weights_(weights),
          domain_(ConjugateDomain::of(block.kind, config.boundary_eps)),
          pull_scale_(2.0 * config.lambda_theta / config.lambda),
          sigma_(ctx.coupling),
          base_quad_(quad(ctx.theta_tilde))
    {
        if (!(sigma_ >= 1.0)) throw ParameterError("block update: coupling must be >= 1");
    }

    // Smooth part G(u); fills theta_loc = theta_tilde + (sigma/lambda) z^T (u - alpha_old).
    // The quadratic is Q(theta_tilde) + (Q(theta_loc) - Q(theta_tilde)) / sigma, so
    // sigma = 1 gives Q(theta_tilde + (1/lambda) z^T delta) exactly.
    double smooth(const Eigen::VectorXd& u, Eigen::VectorXd& theta_loc, Eigen::VectorXd& scratch) const
    {
        scratch = u - alpha_old_;
        theta_loc = ctx_.theta_tilde;
        theta_loc.noalias() += (sigma_ / config_.lambda) * (block_.z.transpose() * scratch);
        detail::CompensatedSum conj;
        for (Eigen::Index j = 0; j < u.size(); ++j) conj.add(conjugate(block_.kind, u(j), block_.y(j)));
        const double q = sigma_ == 1.0 ? quad(theta_loc) : base_quad_ + (quad(theta_loc) - base_quad_) / sigma_;
        return ctx_.conjugate_weight * conj.value() + q;
    }

    void gradient(const Eigen::VectorXd& u, const Eigen::VectorXd& theta_loc, Eigen::VectorXd& g) const
    {
        const Eigen::VectorXd pull = theta_loc + pull_scale_ * (theta_loc - ctx_.theta_star);
        g.noalias() = block_.z * pull;
        for (Eigen::Index j = 0; j < u.size(); ++j) {
            g(j) += ctx_.conjugate_weight * conjugate_grad(block_.kind, u(j), block_.y(j));
        }
    }

    double penalty(const Eigen::VectorXd& u) const
    {
        detail::CompensatedSum s;
        for (Eigen::Index j = 0; j < u.size(); ++j) s.add(weights_(j) * std::abs(u(j)));
        return config_.lambda_alpha * s.value();
    }

    // prox of step * lambda_alpha * sum w|u| plus the box, applied to v.
    void prox(const Eigen::VectorXd& v, double step, Eigen::VectorXd& out) const
    {
        for (Eigen::Index j = 0; j < v.size(); ++j) {
            out(j) = domain_.project_interior(soft_threshold(v(j), step * config_.lambda_alpha * weights_(j)));
        }
    }

    double project(double a) const noexcept { return domain_.project_interior(a); }

private:
    double quad(const Eigen::Ref<const Eigen::VectorXd>& theta) const
    {
        return 0.5 * config_.lambda * theta.squaredNorm() + config_.lambda_theta * (theta - ctx_.theta_star).squaredNorm();
    }

    const TeacherBlock& block_;
    Eigen::Ref<const Eigen::VectorXd> alpha_old_;
    const BlockContext& ctx_;
    const TeachingConfig& config_;
    Eigen::Ref<const Eigen::VectorXd> weights_;
    ConjugateDomain domain_;
    double pull_scale_;
    double sigma_;
    double base_quad_;
};

void check_finite(double v, const TeacherBlock& block, const char* what)
{
    if (!std::isfinite(v)) {
        throw NumericError("teacher " + std::to_string(block.teacher_id) + ": non-finite " + what +
                           " in block update");
    }
}

}  // namespace

double local_surrogate(const TeacherBlock& block, const Eigen::Ref<const Eigen::VectorXd>& alpha_block,
                       const Eigen::Ref<const Eigen::VectorXd>& delta, const BlockContext& ctx,
                       const TeachingConfig& config, const Eigen::Ref<const Eigen::VectorXd>& weights_block)
{
    LocalProblem p(block, alpha_block, ctx, config, weights_block);
    const Eigen::VectorXd u = alpha_block + delta;
    Eigen::VectorXd theta_loc, scratch;
    return p.smooth(u, theta_loc, scratch) + p.penalty(u);
}

BlockUpdate local_block_update(const TeacherBlock& block,
                               const Eigen::Ref<const Eigen::VectorXd>& alpha_block,
                               const BlockContext& ctx, const TeachingConfig& config,
                               const Eigen::Ref<const Eigen::VectorXd>& weights_block)
{
    const auto n = static_cast<Eigen::Index>(block.size());
    if (alpha_block.size() != n || weights_block.size() != n) {
        throw ParameterError("teacher " + std::to_string(block.teacher_id) + ": block size mismatch");
    }
    LocalProblem p(block, alpha_block, ctx, config, weights_block);

    Eigen::VectorXd theta_loc, scratch;
    BlockUpdate out;
    out.surrogate_before = p.smooth(alpha_block, theta_loc, scratch) + p.penalty(alpha_block);
    check_finite(out.surrogate_before, block, "surrogate");

    // Start from the projection of the current block into the solver's box.
    Eigen::VectorXd u(n);
    for (Eigen::Index j = 0; j < n; ++j) u(j) = p.project(alpha_block(j));
    double g_val = p.smooth(u, theta_loc, scratch);
    double f_val = g_val + p.penalty(u);
    check_finite(f_val, block, "surrogate");

    Eigen::VectorXd grad(n), grad_prev(n), u_prev(n), cand(n), cand_theta, step(n);
    p.gradient(u, theta_loc, grad);

    double curvature = 1.0;
    bool have_prev = false;
    std::size_t it = 0;
    for (; it < config.inner_max_iter; ++it) {
        if (have_prev) {
            // Barzilai-Borwein guess from the last accepted step.
            const double ss = (u - u_prev).squaredNorm();
            const double sy = (u - u_prev).dot(grad - grad_prev);
            if (ss > 0 && sy > 0) curvature = std::clamp(sy / ss, kMinCurvature, kMaxCurvature);
        }

        bool accepted = false;
        double cand_g = 0.0;
        double cand_f = 0.0;
        while (curvature <= kMaxCurvature) {
            p.prox(u - grad / curvature, 1.0 / curvature, cand);
            step = cand - u;
            const double step_sq = step.squaredNorm();
            if (step_sq == 0.0) break;
            cand_g = p.smooth(cand, cand_theta, scratch);
            if (std::isfinite(cand_g) && cand_g <= g_val + grad.dot(step) + 0.5 * curvature * step_sq) {
                cand_f = cand_g + p.penalty(cand);
                if (cand_f <= f_val) {
                    accepted = true;
                    break;
                }
            }
            curvature *= 2.0;
        }
        if (!accepted) break;

        const double decrease = f_val - cand_f;
        u_prev.swap(u);
        u.swap(cand);
        grad_prev.swap(grad);
        theta_loc.swap(cand_theta);
        g_val = cand_g;
        f_val = cand_f;
        p.gradient(u, theta_loc, grad);
        have_prev = true;
        if (decrease <= config.inner_tol * std::max(1.0, std::abs(f_val))) {
            ++it;
            break;
        }
    }
    check_finite(f_val, block, "surrogate");

    out.iterations = it;
    if (f_val <= out.surrogate_before) {
        out.delta = u - alpha_block;
        out.surrogate_after = f_val;
    } else {
        out.delta = Eigen::VectorXd::Zero(n);
        out.surrogate_after = out.surrogate_before;
    }
    return out;
}

TeacherMessage apply_local_step(const TeacherBlock& block, Eigen::VectorXd& alpha_block,
                                const Eigen::Ref<const Eigen::VectorXd>& delta, double step,
                                const ConjugateDomain& domain)
{
    if (delta.size() != alpha_block.size()) {
        throw ParameterError("teacher " + std::to_string(block.teacher_id) + ": delta size mismatch");
    }
    Eigen::VectorXd change(alpha_block.size());
    for (Eigen::Index j = 0; j < alpha_block.size(); ++j) {
        const double next = domain.project_interior(alpha_block(j) + step * delta(j));
        change(j) = next - alpha_block(j);
        alpha_block(j) = next;
    }
    TeacherMessage msg;
    msg.teacher_id = block.teacher_id;
    msg.aggregate = block.z.transpose() * change;
    return msg;
}

}  // namespace coteach
