#pragma once

#include <span>
#include <vector>

#include "prefflow/flow/sampler.hpp"

namespace prefflow::grpo {

struct GrpoError : PrefflowError {
    using PrefflowError::PrefflowError;
};

struct GrpoConfig {
    size_t group_size = 8;
    double clip_epsilon = 0.2;
    double kl_weight = 0.01;
    size_t denoise_steps = 40;
    flow::NoiseSchedule noise{};
    double lr = 0.005;
    size_t iterations = 300;
    size_t groups_per_iter = 8;
    uint64_t seed = 1;
    unsigned threads = 0;  // 0 -> hardware concurrency

    void validate() const;
};

// (R_i - mean) / std with population std. Groups whose std falls below the
// 1e-8 floor get all-zero advantages. Requires at least two rewards.
std::vector<double> compute_group_advantages(std::span<const double> rewards);

// exp(logp_new - logp_old); rejects non-finite inputs.
double importance_ratio(double logp_new, double logp_old);

// min(ratio * adv, clip(ratio, 1-eps, 1+eps) * adv)
double clipped_term(double ratio, double advantage, double epsilon);

// KL(N(mean_p, var I) || N(mean_q, var I)) = |mean_p - mean_q|^2 / (2 var).
double gaussian_step_kl(std::span<const double> mean_p, std::span<const double> mean_q,
                        double variance);

// G rollouts that share a condition, plus their scores/rewards/advantages.
struct RolloutGroup {
    flow::Condition condition;
    std::vector<flow::Trajectory> trajectories;
    std::vector<double> scores;      // raw scorer output, [0,5]
    std::vector<double> rewards;     // sigmoid-normalized, (0,1)
    std::vector<double> advantages;

    void validate() const;
};

// Frozen parameter copy; captured before rollouts (old policy) and once at
// the start of post-training (reference).
struct PolicySnapshot {
    flow::MlpField field;

    static PolicySnapshot capture(const flow::MlpField& policy) { return {policy}; }
};

struct ObjectiveStats {
    double value = 0.0;
    double mean_kl = 0.0;
    double mean_ratio = 0.0;
};

// The clipped-surrogate-minus-KL objective over one group:
//   (1/G) sum_i (1/T) sum_t [ min(r Adv, clip(r) Adv) - kl_weight * KL_t ]
// Transition means are recomputed for the current and old policies on the
// trajectories' stored states; stored variances are policy-independent under
// this discretization. When grad is non-null the gradient with respect to
// the current policy's parameters is accumulated into it (ascent direction).
ObjectiveStats grpo_objective(const RolloutGroup& group, const flow::MlpField& policy,
                              const PolicySnapshot& old_policy, const PolicySnapshot& reference,
                              const GrpoConfig& cfg, std::vector<double>* grad);

}  // namespace prefflow::grpo
