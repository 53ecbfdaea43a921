#pragma once

#include "prefflow/reward/reward.hpp"

namespace prefflow::reward {

struct RemoteScorerConfig {
    std::string endpoint;  // e.g. "http://127.0.0.1:8080"
    int timeout_ms = 2000;
    int retries = 2;        // retransmissions after the first attempt
    int max_in_flight = 4;  // concurrent requests across all threads

    void validate() const;
};

// HTTP client for an external evaluator. POSTs to <endpoint>/score:
//   {"task", "instruction", "input_ref", "output_ref", "rubric", "questions"}
// and expects {"score": <real in [0,5]>}. Transport failures and 5xx are
// retried up to `retries` times; protocol violations (malformed body,
// out-of-range score) surface immediately as errors, never as clamped
// scores. A semaphore bounds in-flight requests, so one instance can be
// shared across rollout workers.
class RemoteScorer final : public Scorer {
  public:
    explicit RemoteScorer(RemoteScorerConfig config);
    ~RemoteScorer() override;

    std::string_view name() const override { return "remote"; }
    double score(const EditCase& edit_case, const ScoringPrompt& prompt) const override;

    struct CallStats {
        int retries = 0;
    };
    double score_with_stats(const EditCase& edit_case, const ScoringPrompt& prompt,
                            CallStats& stats) const;

    const RemoteScorerConfig& config() const { return config_; }

  private:
    RemoteScorerConfig config_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace prefflow::reward
