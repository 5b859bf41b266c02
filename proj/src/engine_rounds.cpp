#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "coteach/engine.hpp"

namespace coteach {

namespace {

// Runs fn(0..count-1) on a fixed worker set and waits for all of them. The
// first exception by index is rethrown on the calling thread.
class BlockExecutor {
public:
    explicit BlockExecutor(std::size_t threads)
    {
        for (std::size_t t = 1; t < threads; ++t) workers_.emplace_back([this] { worker_loop(); });
    }

    ~BlockExecutor()
    {
        {
            std::lock_guard lock(mu_);
            stop_ = true;
        }
        wake_.notify_all();
        for (auto& w : workers_) w.join();
    }

    BlockExecutor(const BlockExecutor&) = delete;
    BlockExecutor& operator=(const BlockExecutor&) = delete;

    void run(std::size_t count, const std::function<void(std::size_t)>& fn)
    {
        errors_.assign(count, nullptr);
        if (workers_.empty() || count <= 1) {
            for (std::size_t i = 0; i < count; ++i) invoke(fn, i);
        } else {
            {
                std::lock_guard lock(mu_);
                job_ = &fn;
                count_ = count;
                next_.store(0);
                active_ = workers_.size();
                ++generation_;
            }
            wake_.notify_all();
            drain();
            std::unique_lock lock(mu_);
            done_.wait(lock, [this] { return active_ == 0; });
            job_ = nullptr;
        }
        for (auto& e : errors_) {
            if (e) std::rethrow_exception(e);
        }
    }

private:
    void invoke(const std::function<void(std::size_t)>& fn, std::size_t i)
    {
        try {
            fn(i);
        } catch (...) {
            errors_[i] = std::current_exception();
        }
    }

    void drain()
    {
        for (std::size_t i = next_.fetch_add(1); i < count_; i = next_.fetch_add(1)) invoke(*job_, i);
    }

    void worker_loop()
    {
        std::size_t seen = 0;
        while (true) {
            {
                std::unique_lock lock(mu_);
                wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
            }
            drain();
            {
                std::lock_guard lock(mu_);
                if (--active_ == 0) done_.notify_one();
            }
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable wake_;
    std::condition_variable done_;
    const std::function<void(std::size_t)>* job_ = nullptr;
    std::size_t count_ = 0;
    std::atomic<std::size_t> next_{0};
    std::size_t active_ = 0;
    std::size_t generation_ = 0;
    bool stop_ = false;
    std::vector<std::exception_ptr> errors_;
};

void check_blocks(const DualState& state, const std::vector<TeacherBlock>& blocks, std::size_t deltas)
{
    if (state.alpha.size() != blocks.size() || deltas != blocks.size()) {
        throw ParameterError("apply_and_reduce: expected " + std::to_string(blocks.size()) +
                             " blocks, got " + std::to_string(state.alpha.size()) + " alpha and " +
                             std::to_string(deltas) + " delta blocks");
    }
}

void advance(DualState& state, const std::vector<Eigen::VectorXd>& deltas,
             const std::vector<TeacherBlock>& blocks, const TeachingConfig& config,
             std::vector<TeacherMessage>& messages, CommTally& tally)
{
    check_blocks(state, blocks, deltas.size());
    const double k = static_cast<double>(blocks.size());
    messages.clear();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto domain = ConjugateDomain::of(blocks[i].kind, config.boundary_eps);
        messages.push_back(apply_local_step(blocks[i], state.alpha[i], deltas[i], config.beta_for(i) / k, domain));
    }
    reduce_and_broadcast(state.theta_tilde, messages, config.lambda, tally);
    ++state.round;
}

}  // namespace

void reduce_and_broadcast(Eigen::VectorXd& theta_tilde, std::span<const TeacherMessage> messages,
                          double lambda, CommTally& tally)
{
    std::vector<const TeacherMessage*> ordered;
    ordered.reserve(messages.size());
    for (const auto& m : messages) {
        if (m.aggregate.size() != theta_tilde.size()) throw ParameterError("reduce: message has wrong dimension");
        ordered.push_back(&m);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const TeacherMessage* a, const TeacherMessage* b) { return a->teacher_id < b->teacher_id; });
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(theta_tilde.size());
    for (const auto* m : ordered) sum += m->aggregate;
    theta_tilde += sum / lambda;
    const auto d = static_cast<std::size_t>(theta_tilde.size());
    tally.reals_up += messages.size() * d;
    tally.reals_down += messages.size() * d;
}

DualState apply_and_reduce(const DualState& state, const std::vector<Eigen::VectorXd>& deltas,
                           const std::vector<TeacherBlock>& blocks, const TeachingConfig& config,
                           CommTally& tally)
{
    DualState next = state;
    std::vector<TeacherMessage> messages;
    advance(next, deltas, blocks, config, messages, tally);
    return next;
}

bool RunTrace::monotone(double slack) const noexcept
{
    double prev = initial_objective;
    for (const auto& r : rounds) {
        if (r.objective > prev + slack) return false;
        prev = r.objective;
    }
    return true;
}

TeachingRun run_teaching(const std::vector<TeacherShard>& shards,
                         const Eigen::Ref<const Eigen::VectorXd>& theta_star, Task task,
                         const TeachingConfig& config, const RunOptions& opts)
{
    if (shards.empty()) throw ParameterError("run_teaching: no shards");
    const std::size_t k = shards.size();
    config.validate(k);
    const auto d = static_cast<Eigen::Index>(shards.front().dim());
    for (const auto& s : shards) {
        if (s.data.task != task) throw ParameterError("run_teaching: shard task does not match");
        if (static_cast<Eigen::Index>(s.dim()) != d) throw ParameterError("run_teaching: shards disagree on dimension");
        if (s.size() == 0) throw ParameterError("run_teaching: teacher " + std::to_string(s.teacher_id) + " has no data");
    }
    if (theta_star.size() != d) throw ParameterError("run_teaching: theta* has the wrong dimension");

    const auto blocks = prepare_blocks(shards);
    TeachingRun run;
    run.weights = warm_start_weights(blocks, theta_star, config.lambda, config.ols_eps, config.w_max);

    if (opts.resume) {
        const auto& r = *opts.resume;
        if (r.alpha.size() != k || r.theta_tilde.size() != d) throw ParameterError("run_teaching: resume state has the wrong shape");
        for (std::size_t i = 0; i < k; ++i) {
            if (r.alpha[i].size() != static_cast<Eigen::Index>(blocks[i].size())) {
                throw ParameterError("run_teaching: resume state block " + std::to_string(i) + " has the wrong size");
            }
        }
        run.state = r;
    } else {
        run.state = DualState::zeros(blocks);
    }

    std::size_t n_total = 0;
    for (const auto& b : blocks) n_total += b.size();
    const double cw = config.normalize_conjugate ? 1.0 / static_cast<double>(n_total) : 1.0;

    auto& trace = run.trace;
    trace.initial_objective = objective(run.state.alpha, blocks, theta_star, config, run.weights);
    trace.rounds.reserve(config.rounds);

    const double sigma = config.coupling(k);
    BlockExecutor executor(std::max<std::size_t>(1, std::min(config.threads, k)));
    std::vector<Eigen::VectorXd> deltas(k);
    std::vector<TeacherMessage> messages;
    messages.reserve(k);
    const std::function<void(std::size_t)> update_block = [&](std::size_t i) {
        const BlockContext ctx{run.state.theta_tilde, theta_star, cw, sigma};
        deltas[i] = local_block_update(blocks[i], run.state.alpha[i], ctx, config, run.weights.w[i]).delta;
    };

    const auto start = std::chrono::steady_clock::now();
    double prev = trace.initial_objective;
    for (std::size_t t = 0; t < config.rounds; ++t) {
        RoundRecord rec;
        try {
            executor.run(k, update_block);
            const CommTally before = trace.totals;
            advance(run.state, deltas, blocks, config, messages, trace.totals);
            rec.round = run.state.round;
            rec.reals_up = trace.totals.reals_up - before.reals_up;
            rec.reals_down = trace.totals.reals_down - before.reals_down;
            rec.objective = objective(run.state.alpha, blocks, theta_star, config, run.weights);
            if (!std::isfinite(rec.objective)) throw NumericError("objective is not finite");
        } catch (const NumericError& e) {
            throw TeachingAborted("round " + std::to_string(run.state.round + 1) + ": " + e.what(), trace);
        }
        if (opts.track_risk) rec.risk = (run.state.theta_tilde - theta_star).norm();
        trace.rounds.push_back(rec);
        if (opts.on_round) opts.on_round(run.state, rec);

        const double change = std::abs(prev - rec.objective);
        prev = rec.objective;
        if (config.outer_tol > 0 && change <= config.outer_tol * std::max(1.0, std::abs(rec.objective))) break;
    }
    run.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

}  // namespace coteach
