#include "prefflow/reward/remote.hpp"

#include <chrono>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace prefflow::reward {

void RemoteScorerConfig::validate() const {
    if (endpoint.empty()) throw ConfigError("remote scorer: endpoint not configured");
    if (timeout_ms <= 0) throw ConfigError("remote scorer: timeout must be positive");
    if (retries < 0) throw ConfigError("remote scorer: retries must be >= 0");
    if (max_in_flight < 1) throw ConfigError("remote scorer: max_in_flight must be >= 1");
}

struct RemoteScorer::Impl {
    explicit Impl(int max_in_flight) : limiter(max_in_flight) {}
    std::counting_semaphore<> limiter;
};

RemoteScorer::RemoteScorer(RemoteScorerConfig config) : config_(std::move(config)) {
    config_.validate();
    impl_ = std::make_unique<Impl>(config_.max_in_flight);
}

RemoteScorer::~RemoteScorer() = default;

double RemoteScorer::score(const EditCase& edit_case, const ScoringPrompt& prompt) const {
    CallStats stats;
    return score_with_stats(edit_case, prompt, stats);
}

double RemoteScorer::score_with_stats(const EditCase& edit_case, const ScoringPrompt& prompt,
                                      CallStats& stats) const {
    if (!edit_case.has_output())
        throw ScorerError(ScoreErrorKind::missing_output,
                          "case " + edit_case.id + " has no output to score");

    const nlohmann::json request{
        {"task", std::string(task_name(edit_case.task))},
        {"instruction", edit_case.instruction},
        {"input_ref", edit_case.input_ref},
        {"output_ref", edit_case.output_ref},
        {"rubric", prompt.rubric.levels},
        {"questions", prompt.questions},
    };
    const std::string body = request.dump();

    stats.retries = 0;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) {
            ++stats.retries;
            std::this_thread::sleep_for(std::chrono::milliseconds(25 * attempt));
        }

        impl_->limiter.acquire();
        httplib::Client client(config_.endpoint);
        client.set_connection_timeout(std::chrono::milliseconds(config_.timeout_ms));
        client.set_read_timeout(std::chrono::milliseconds(config_.timeout_ms));
        client.set_write_timeout(std::chrono::milliseconds(config_.timeout_ms));
        auto result = client.Post("/score", body, "application/json");
        impl_->limiter.release();

        if (!result) {
            const auto err = result.error();
            const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                                   err == httplib::Error::Read || err == httplib::Error::Write;
            last_error = "endpoint " + config_.endpoint + ": " + httplib::to_string(err);
            if (attempt == config_.retries)
                throw ScorerError(timed_out ? ScoreErrorKind::timeout : ScoreErrorKind::unreachable,
                                  "remote scorer failed after " + std::to_string(stats.retries) +
                                      " retries (" + last_error + ")");
            continue;  // transport failures are retryable
        }
        if (result->status != 200) {
            last_error = "endpoint " + config_.endpoint + ": HTTP " +
                         std::to_string(result->status);
            if (result->status >= 500 && attempt < config_.retries) continue;
            throw ScorerError(ScoreErrorKind::http_status, "remote scorer: " + last_error);
        }

        nlohmann::json response;
        try {
            response = nlohmann::json::parse(result->body);
        } catch (const nlohmann::json::exception&) {
            throw ScorerError(ScoreErrorKind::malformed,
                              "remote scorer: response is not valid JSON");
        }
        if (!response.is_object() || !response.contains("score") ||
            !response["score"].is_number())
            throw ScorerError(ScoreErrorKind::malformed,
                              "remote scorer: response missing numeric 'score'");
        const double score = response["score"].get<double>();
        if (!(score >= 0.0 && score <= 5.0))
            throw ScorerError(ScoreErrorKind::out_of_range,
                              "remote scorer: score " + fmt_double(score) + " outside [0,5]");
        return score;
    }
    throw ScorerError(ScoreErrorKind::unreachable, "remote scorer: " + last_error);
}

}  // namespace prefflow::reward
