#include "prefflow/grpo/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "prefflow/kern/kernels.hpp"

namespace prefflow::grpo {

namespace {
constexpr double kStdFloor = 1e-8;
}

void GrpoConfig::validate() const {
    if (group_size < 2) throw GrpoError("grpo config: group_size must be >= 2");
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0))
        throw GrpoError("grpo config: clip_epsilon must lie in (0,1)");
    if (!(kl_weight >= 0.0)) throw GrpoError("grpo config: kl_weight must be >= 0");
    if (denoise_steps < 1) throw GrpoError("grpo config: denoise_steps must be >= 1");
    if (!(lr > 0.0)) throw GrpoError("grpo config: learning rate must be positive");
    if (groups_per_iter < 1) throw GrpoError("grpo config: groups_per_iter must be >= 1");
}

std::vector<double> compute_group_advantages(std::span<const double> rewards) {
    if (rewards.size() < 2)
        throw GrpoError("group advantages need at least 2 rewards, got " +
                        std::to_string(rewards.size()));
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= n;
    const double std_dev = std::sqrt(var);

    std::vector<double> adv(rewards.size(), 0.0);
    if (std_dev < kStdFloor) return adv;  // degenerate group: no signal
    for (size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / std_dev;
    return adv;
}

double importance_ratio(double logp_new, double logp_old) {
    if (!std::isfinite(logp_new) || !std::isfinite(logp_old))
        throw GrpoError("importance_ratio: non-finite log-probability");
    return std::exp(logp_new - logp_old);
}

double clipped_term(double ratio, double advantage, double epsilon) {
    if (!(ratio >= 0.0)) throw GrpoError("clipped_term: ratio must be nonnegative");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw GrpoError("clipped_term: epsilon in (0,1)");
    const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    return std::min(ratio * advantage, clipped * advantage);
}

double gaussian_step_kl(std::span<const double> mean_p, std::span<const double> mean_q,
                        double variance) {
    if (mean_p.size() != mean_q.size()) throw GrpoError("gaussian_step_kl: dimension mismatch");
    if (!(variance > 0.0)) throw GrpoError("gaussian_step_kl: variance must be positive");
    return kern::sq_dist(mean_p, mean_q) / (2.0 * variance);
}

void RolloutGroup::validate() const {
    const size_t g = trajectories.size();
    if (g < 2) throw GrpoError("rollout group needs at least 2 trajectories");
    if (rewards.size() != g || advantages.size() != g)
        throw GrpoError("rollout group: rewards/advantages length mismatch");
    const size_t steps = trajectories.front().steps();
    for (const auto& traj : trajectories) {
        if (traj.steps() != steps) throw GrpoError("rollout group: step-count mismatch");
        if (traj.condition.id != condition.id)
            throw GrpoError("rollout group: trajectories do not share the group condition");
        if (!traj.stochastic)
            throw GrpoError("rollout group: deterministic trajectory cannot be used for updates");
    }
}

ObjectiveStats grpo_objective(const RolloutGroup& group, const flow::MlpField& policy,
                              const PolicySnapshot& old_policy, const PolicySnapshot& reference,
                              const GrpoConfig& cfg, std::vector<double>* grad) {
    group.validate();
    cfg.validate();
    if (grad && grad->size() != policy.param_count())
        throw GrpoError("grpo_objective: gradient buffer size mismatch");

    const size_t g = group.trajectories.size();
    const size_t steps = group.trajectories.front().steps();
    const size_t d = policy.dim();
    const double inv_gt = 1.0 / (static_cast<double>(g) * static_cast<double>(steps));

    flow::MlpField::Workspace ws_new, ws_old, ws_ref;
    flow::Vec v_new(d), v_old(d), v_ref(d);
    flow::Vec mean_new(d), mean_old(d), mean_ref(d), g_v(d);

    // Raw sums, divided once at the end: 21 step-ratios of exactly 1.0 must
    // average to exactly 1.0.
    double surrogate_sum = 0.0, kl_sum = 0.0, ratio_sum = 0.0;
    for (size_t i = 0; i < g; ++i) {
        const flow::Trajectory& traj = group.trajectories[i];
        const double adv = group.advantages[i];
        const std::span<const double> cond = traj.condition.embedding;
        for (size_t k = 0; k < steps; ++k) {
            const double t = traj.times[k];
            const double dt = traj.times[k + 1] - traj.times[k];
            const double variance = traj.variances[k];
            if (!(variance > 0.0))
                throw GrpoError("grpo_objective: zero-variance transition at step " +
                                std::to_string(k));
            const double sigma = std::sqrt(variance / dt);
            const flow::Vec& x = traj.states[k];
            const flow::Vec& x_next = traj.states[k + 1];

            policy.forward(x, t, cond, v_new, ws_new);
            old_policy.field.forward(x, t, cond, v_old, ws_old);
            const flow::Vec drift_new = flow::sampler_drift(v_new, x, t, sigma);
            const flow::Vec drift_old = flow::sampler_drift(v_old, x, t, sigma);
            for (size_t j = 0; j < d; ++j) {
                mean_new[j] = x[j] + drift_new[j] * dt;
                mean_old[j] = x[j] + drift_old[j] * dt;
            }
            const double logp_new = flow::transition_logprob(x_next, mean_new, variance);
            const double logp_old = flow::transition_logprob(x_next, mean_old, variance);
            const double ratio = importance_ratio(logp_new, logp_old);
            const double surrogate = clipped_term(ratio, adv, cfg.clip_epsilon);

            reference.field.forward(x, t, cond, v_ref, ws_ref);
            const flow::Vec drift_ref = flow::sampler_drift(v_ref, x, t, sigma);
            for (size_t j = 0; j < d; ++j) mean_ref[j] = x[j] + drift_ref[j] * dt;
            const double kl = gaussian_step_kl(mean_new, mean_ref, variance);

            surrogate_sum += surrogate;
            kl_sum += kl;
            ratio_sum += ratio;

            if (!grad) continue;
            // d(surrogate)/d(logp_new) = adv * ratio on the unclipped branch,
            // zero once the clip is active on the selected branch.
            const double clipped = std::clamp(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
            const bool unclipped_active = ratio * adv <= clipped * adv;
            const double surr_coef = unclipped_active ? adv * ratio : 0.0;
            const double gain = flow::mean_velocity_gain(t, sigma, dt);
            for (size_t j = 0; j < d; ++j) {
                double g_mean = surr_coef * (x_next[j] - mean_new[j]) / variance;
                g_mean -= cfg.kl_weight * (mean_new[j] - mean_ref[j]) / variance;
                g_v[j] = inv_gt * g_mean * gain;
            }
            policy.backward(ws_new, g_v, *grad);
        }
    }
    const double count = static_cast<double>(g) * static_cast<double>(steps);
    ObjectiveStats stats;
    stats.value = (surrogate_sum - cfg.kl_weight * kl_sum) / count;
    stats.mean_kl = kl_sum / count;
    stats.mean_ratio = ratio_sum / count;
    return stats;
}

}  // namespace prefflow::grpo
