#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <span>

#include "prefflow/data/datapipe.hpp"

namespace prefflow::bench {

struct BenchError : PrefflowError {
    using PrefflowError::PrefflowError;
};

struct BenchSuite {
    std::map<reward::EditTask, std::vector<reward::EditCase>> by_task;

    static BenchSuite load(const std::filesystem::path& path);
    static BenchSuite from_cases(std::vector<reward::EditCase> cases);
    size_t total_cases() const;
};

// Produces the model output (terminal point) for one case; must be a pure
// function of (case, seed).
using CaseSampler =
    std::function<std::vector<double>(const reward::EditCase& edit_case, uint64_t seed)>;

struct BenchReport {
    std::string model_id;
    std::string scorer_id;
    uint64_t seed = 0;
    std::map<reward::EditTask, double> task_means;
    std::map<reward::EditTask, size_t> task_counts;
    double overall = 0.0;  // unweighted mean of the present task means
    size_t failures = 0;   // cases excluded from the means
    bool rounded = false;  // true for reports parsed back from a 3-decimal CSV

    // overall must re-derive from the task means: to 1e-9 for fresh reports,
    // to the 3-decimal rounding slack for file-loaded ones. Rechecked before
    // every emit.
    void verify_consistency() const;
};

struct EvalConfig {
    std::string model_id = "model";
    uint64_t seed = 1;
    unsigned threads = 0;
};

// Generates one output per case (seed derived from the run seed and case
// id), scores it with the task's prompt, and aggregates per-task means.
// Scorer failures are excluded from the means and counted.
BenchReport evaluate(const CaseSampler& sampler, const BenchSuite& suite,
                     const reward::Scorer& scorer, const reward::PromptRegistry& prompts,
                     const EvalConfig& cfg);

// Unweighted mean of exactly eight per-task means.
double aggregate_overall(std::span<const double> task_means);

// Standard Pearson r; needs equal lengths >= 2 and nonzero variances.
double pearson_correlation(std::span<const double> x, std::span<const double> y);

// CSV: model,add,remove,obj_swap,bg_replace,color,bokeh,relighting,style,
// overall,failures - one row per report, means to 3 decimals.
void write_report_csv(const std::filesystem::path& path, std::span<const BenchReport> reports);
std::vector<BenchReport> read_report_csv(const std::filesystem::path& path);

// Aligned markdown table, same column order.
void write_report_markdown(const std::filesystem::path& path,
                           std::span<const BenchReport> reports);

// Sorts by overall, best first.
std::vector<BenchReport> merge_reports(std::vector<BenchReport> reports);

}  // namespace prefflow::bench
