#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefflow/common/util.hpp"

namespace prefflow::reward {

// The eight editing sub-tasks. Order matches the benchmark report columns.
enum class EditTask : uint8_t {
    addition,
    removal,
    object_swap,
    background_replace,
    color_change,
    bokeh,
    relighting,
    style_transfer,
};

inline constexpr std::array<EditTask, 8> kAllTasks{
    EditTask::addition,       EditTask::removal,    EditTask::object_swap,
    EditTask::background_replace, EditTask::color_change, EditTask::bokeh,
    EditTask::relighting,     EditTask::style_transfer,
};

std::string_view task_name(EditTask task);           // "addition", "object_swap", ...
std::string_view task_report_label(EditTask task);   // "add", "obj_swap", ...
std::string_view task_display_name(EditTask task);   // "Add", "Obj. Swap", ...
std::optional<EditTask> task_from_name(std::string_view name);

enum class ScoreErrorKind {
    missing_output,
    unreachable,
    timeout,
    http_status,
    malformed,
    out_of_range,
};

struct ScorerError : PrefflowError {
    ScorerError(ScoreErrorKind k, const std::string& message)
        : PrefflowError(message), kind(k) {}
    ScoreErrorKind kind;
};

// Six level descriptions anchoring scores 0..5.
struct ScoreRubric {
    std::array<std::string, 6> levels;

    static const ScoreRubric& standard();
};

struct ScoringPrompt {
    EditTask task = EditTask::addition;
    ScoreRubric rubric;
    std::vector<std::string> questions;  // task-specific reasoning questions

    // Rubric plus questions as one scoring instruction block.
    std::string render() const;
};

using PromptRegistry = std::map<EditTask, ScoringPrompt>;

// Built-in prompts: one entry per task, the shared rubric, and at least
// three reasoning questions each.
const PromptRegistry& prompt_registry();

// JSON data files, one per task: {"task", "rubric": [6], "questions": [...]}.
void save_prompts(const std::filesystem::path& dir, const PromptRegistry& registry);
PromptRegistry load_prompts(const std::filesystem::path& dir);

// r = 1 / (1 + exp(-alpha*s + beta)); strictly increasing, range (0,1).
double normalize_reward(double score, double alpha = 2.0, double beta = 5.0);

// One editing case: input A (reference + embedding), instruction T, and the
// generated output B (reference and, at desk scale, a terminal point).
struct EditCase {
    std::string id;
    EditTask task = EditTask::addition;
    std::string instruction;
    std::string category_hint;
    std::string input_ref;
    std::vector<double> input_embedding;
    std::string output_ref;
    std::optional<std::vector<double>> terminal_point;
    std::optional<double> score;
    std::string category;  // assigned label, empty until categorized

    bool has_output() const { return terminal_point.has_value() || !output_ref.empty(); }
};

class Scorer {
  public:
    virtual ~Scorer() = default;
    virtual std::string_view name() const = 0;
    // Returns s in [0,5]. Throws ScorerError; missing output B is an error.
    virtual double score(const EditCase& edit_case, const ScoringPrompt& prompt) const = 0;
};

// Desk-scale stand-in for the learned evaluator: a piecewise-linear radial
// rubric around a target point. 5 inside r5, 5->3 on [r5, r3], 3->0 on
// [r3, 2*r3], 0 beyond. Continuous and radially nonincreasing.
class ModePreferenceScorer final : public Scorer {
  public:
    ModePreferenceScorer(std::vector<double> center, double r5, double r3);

    std::string_view name() const override { return "mode_preference"; }
    double score(const EditCase& edit_case, const ScoringPrompt& prompt) const override;
    double score_point(std::span<const double> point) const;

  private:
    std::vector<double> center_;
    double r5_;
    double r3_;
};

// Fixed-value scorer for pipeline tests and degenerate-input drills.
class ConstantScorer final : public Scorer {
  public:
    explicit ConstantScorer(double value) : value_(value) {}
    std::string_view name() const override { return "constant"; }
    double score(const EditCase& edit_case, const ScoringPrompt&) const override;

  private:
    double value_;
};

}  // namespace prefflow::reward
