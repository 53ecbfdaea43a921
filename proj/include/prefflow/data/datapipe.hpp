#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>

#include "prefflow/reward/reward.hpp"

namespace prefflow::data {

struct DatapipeError : PrefflowError {
    using PrefflowError::PrefflowError;
};

struct RawDataset {
    std::vector<reward::EditCase> cases;
    std::string provenance;
};

// JSONL, one case per line:
//   {"id", "task", "instruction", "category_hint"?, "category"?,
//    "input": {"embedding": [...], "payload_ref"},
//    "output": {"payload_ref", "terminal_point": [...]}?, "score"?}
// Malformed lines, unknown keys, and duplicate ids fail with the offending
// line number in the message.
RawDataset ingest(const std::filesystem::path& path);

struct ScoredEntry {
    reward::EditCase edit_case;
    double score = 0.0;
};

struct ScoreFailure {
    std::string id;
    std::string error;
};

struct ScoredDataset {
    std::vector<ScoredEntry> entries;
    std::vector<ScoreFailure> failures;
};

// Scores every case with its task's prompt. Per-case scorer failures go to
// the failure list; the run continues. Entry order follows the input order.
ScoredDataset score_dataset(const RawDataset& raw, const reward::Scorer& scorer,
                            const reward::PromptRegistry& prompts, unsigned threads = 1);

struct HardCaseDataset {
    std::vector<ScoredEntry> entries;
    size_t discarded = 0;
    bool all_perfect = false;  // warning flag: the filter removed everything
};

// Drops perfect-score entries: |score - 5| <= 1e-9 by default, or
// score >= *threshold when one is configured. Order-preserving, idempotent.
HardCaseDataset filter_hard_cases(const ScoredDataset& scored,
                                  std::optional<double> threshold = std::nullopt);

struct CategoryProfile {
    std::vector<std::string> names;
    std::vector<std::vector<double>> embeddings;

    void validate() const;
    static CategoryProfile load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    // Deterministic per-name unit vectors; stands in for the image/text
    // encoder, which is out of scope at desk scale.
    static CategoryProfile synthetic(std::vector<std::string> names, size_t dim, uint64_t seed);
};

// Labels each case with the argmax cosine-similarity category; exact ties
// break to the lexicographically smaller name. Zero-norm embeddings are
// errors naming the case.
std::vector<reward::EditCase> assign_categories(std::vector<reward::EditCase> cases,
                                                const CategoryProfile& profile);

// Caps each category at cap_ratio * ceil(N / #nonempty categories); excess
// entries are dropped highest score first (id ascending as tie-break), so a
// case is never dropped while a strictly higher-scoring same-category case
// is kept. cap_ratio = infinity is the identity.
std::vector<ScoredEntry> balance_categories(std::vector<ScoredEntry> entries, double cap_ratio);

struct TaskStats {
    std::map<reward::EditTask, size_t> counts;
    size_t total = 0;

    // count/total*100, rounded half-up to 2 decimals.
    double ratio_percent(reward::EditTask task) const;
};

TaskStats dataset_stats(std::span<const ScoredEntry> entries);
TaskStats stats_from_counts(std::map<reward::EditTask, size_t> counts);

// CSV columns: task,count,ratio (ratio formatted to 2 decimals).
void write_stats_csv(const std::filesystem::path& path, const TaskStats& stats);

// Serializes entries back to the ingest schema (score field filled in).
// Byte-deterministic for a fixed input.
void write_cases_jsonl(const std::filesystem::path& path, std::span<const ScoredEntry> entries);

}  // namespace prefflow::data
