#include "prefflow/grpo/post_train.hpp"

#include <cmath>
#include <iostream>
#include <limits>

#include "prefflow/common/util.hpp"
#include "prefflow/reward/reward.hpp"

namespace prefflow::grpo {

namespace {

struct ScoredSample {
    flow::Trajectory trajectory;
    double score = 0.0;
    bool failed = false;
    std::string error;
};

}  // namespace

PostTrainResult post_train(flow::MlpField& policy, std::span<const flow::Condition> conditions,
                           const TerminalScorer& scorer, const GrpoConfig& cfg,
                           const IterationCallback& on_iteration) {
    cfg.validate();
    if (conditions.empty()) throw GrpoError("post_train: no conditions");
    if (cfg.noise.is_zero())
        throw GrpoError("post_train: noise schedule must inject stochasticity (sigma > 0)");

    PostTrainResult result;
    const PolicySnapshot reference = PolicySnapshot::capture(policy);
    const size_t samples_per_iter = cfg.groups_per_iter * cfg.group_size;
    std::vector<double> grad(policy.param_count());

    for (size_t iter = 0; iter < cfg.iterations; ++iter) {
        const PolicySnapshot old_policy = PolicySnapshot::capture(policy);

        // Rollout + scoring, parallel across samples; slot-indexed outputs
        // and per-sample seeds keep the result independent of scheduling.
        std::vector<ScoredSample> samples(samples_per_iter);
        parallel_for(samples_per_iter, cfg.threads, [&](size_t s) {
            const size_t g = s / cfg.group_size;
            const flow::Condition& cond =
                conditions[(iter * cfg.groups_per_iter + g) % conditions.size()];
            Rng rng(mix_seed({cfg.seed, 0x726f6c6cull, iter, s}));  // "roll" stream
            flow::Vec x0(policy.dim());
            for (double& v : x0) v = rng.gaussian();
            ScoredSample& slot = samples[s];
            slot.trajectory = flow::sde_sample(old_policy.field, std::move(x0), cond,
                                               cfg.denoise_steps, cfg.noise, rng);
            try {
                slot.score = scorer(slot.trajectory.terminal(), cond);
            } catch (const std::exception& e) {
                slot.failed = true;
                slot.error = e.what();
            }
        });

        IterationRecord record;
        record.iteration = iter;
        std::fill(grad.begin(), grad.end(), 0.0);
        size_t kept_groups = 0;
        double reward_acc = 0.0, score_acc = 0.0, kl_acc = 0.0;
        size_t kept_samples = 0;

        for (size_t g = 0; g < cfg.groups_per_iter; ++g) {
            const size_t base = g * cfg.group_size;
            bool failed = false;
            for (size_t i = 0; i < cfg.group_size && !failed; ++i) failed = samples[base + i].failed;
            if (failed) {
                ++record.skipped_groups;
                std::cerr << "post_train: iteration " << iter << " group " << g
                          << " skipped (scorer failure: " << samples[base].error << ")\n";
                continue;
            }
            RolloutGroup group;
            group.condition = samples[base].trajectory.condition;
            group.trajectories.reserve(cfg.group_size);
            group.scores.reserve(cfg.group_size);
            group.rewards.reserve(cfg.group_size);
            for (size_t i = 0; i < cfg.group_size; ++i) {
                ScoredSample& slot = samples[base + i];
                group.trajectories.push_back(std::move(slot.trajectory));
                group.scores.push_back(slot.score);
                group.rewards.push_back(reward::normalize_reward(slot.score));
            }
            group.advantages = compute_group_advantages(group.rewards);
            const ObjectiveStats stats =
                grpo_objective(group, policy, old_policy, reference, cfg, &grad);
            ++kept_groups;
            kl_acc += stats.mean_kl;
            for (size_t i = 0; i < cfg.group_size; ++i) {
                reward_acc += group.rewards[i];
                score_acc += group.scores[i];
            }
            kept_samples += cfg.group_size;
        }

        if (kept_groups > 0) {
            if (!all_finite(grad))
                throw GrpoError("post_train: non-finite gradient at iteration " +
                                std::to_string(iter));
            const double scale = cfg.lr / static_cast<double>(kept_groups);
            auto params = policy.params_mut();
            for (size_t i = 0; i < params.size(); ++i) params[i] += scale * grad[i];
            record.mean_reward = reward_acc / static_cast<double>(kept_samples);
            record.mean_score = score_acc / static_cast<double>(kept_samples);
            record.kl = kl_acc / static_cast<double>(kept_groups);
        } else {
            record.mean_reward = std::numeric_limits<double>::quiet_NaN();
            record.mean_score = std::numeric_limits<double>::quiet_NaN();
            record.kl = std::numeric_limits<double>::quiet_NaN();
        }
        result.total_skipped_groups += record.skipped_groups;
        result.curve.push_back(record);
        if (on_iteration) on_iteration(record);
    }
    return result;
}

void write_reward_csv(const std::filesystem::path& path, std::span<const IterationRecord> curve) {
    CsvWriter csv(path, {"iteration", "mean_reward", "mean_score", "kl"});
    for (const IterationRecord& rec : curve)
        csv.row({std::to_string(rec.iteration), fmt_double(rec.mean_reward),
                 fmt_double(rec.mean_score), fmt_double(rec.kl)});
    csv.flush();
}

}  // namespace prefflow::grpo
