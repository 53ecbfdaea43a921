#pragma once

#include <filesystem>
#include <functional>

#include "prefflow/grpo/grpo.hpp"

namespace prefflow::grpo {

// Raw 0-5 score for a rollout's terminal state. Throwing marks the sample
// failed; its whole group is skipped and counted for that iteration.
using TerminalScorer =
    std::function<double(const flow::Vec& terminal, const flow::Condition& cond)>;

struct IterationRecord {
    size_t iteration = 0;
    double mean_reward = 0.0;
    double mean_score = 0.0;
    double kl = 0.0;
    size_t skipped_groups = 0;
};

// Invoked after each completed iteration; gives the CLI a flush point so a
// partial reward curve survives interruption.
using IterationCallback = std::function<void(const IterationRecord&)>;

struct PostTrainResult {
    std::vector<IterationRecord> curve;
    size_t total_skipped_groups = 0;
};

// Online post-training: per iteration, snapshot the current policy, roll out
// groups_per_iter groups of group_size SDE trajectories (conditions cycled in
// order), score terminals, sigmoid-normalize to rewards, normalize within
// groups to advantages, and take one ascent step on the clipped objective
// against the initial-policy reference. Deterministic given cfg.seed; the
// per-trajectory noise streams do not depend on thread scheduling.
PostTrainResult post_train(flow::MlpField& policy, std::span<const flow::Condition> conditions,
                           const TerminalScorer& scorer, const GrpoConfig& cfg,
                           const IterationCallback& on_iteration = {});

void write_reward_csv(const std::filesystem::path& path, std::span<const IterationRecord> curve);

}  // namespace prefflow::grpo
