#include "prefflow/reward/reward.hpp"

#include <cmath>

#include <json.hpp>

#include "prefflow/kern/kernels.hpp"

namespace prefflow::reward {

namespace {

struct TaskNames {
    EditTask task;
    std::string_view name;
    std::string_view report;
    std::string_view display;
};

constexpr std::array<TaskNames, 8> kTaskNames{{
    {EditTask::addition, "addition", "add", "Add"},
    {EditTask::removal, "removal", "remove", "Remove"},
    {EditTask::object_swap, "object_swap", "obj_swap", "Obj. Swap"},
    {EditTask::background_replace, "background_replace", "bg_replace", "Bg. Replace"},
    {EditTask::color_change, "color_change", "color", "Color"},
    {EditTask::bokeh, "bokeh", "bokeh", "Bokeh"},
    {EditTask::relighting, "relighting", "relighting", "Relighting"},
    {EditTask::style_transfer, "style_transfer", "style", "Style"},
}};

const TaskNames& names_of(EditTask task) {
    for (const auto& entry : kTaskNames)
        if (entry.task == task) return entry;
    throw PrefflowError("unknown edit task value");
}

std::vector<std::string> default_questions(EditTask task) {
    switch (task) {
        case EditTask::addition:
            return {
                "Is the requested object present in the edited image?",
                "Does the added object match the described attributes, position, and size?",
                "Does the added object blend naturally with the scene lighting and perspective?",
                "Is the rest of the scene preserved without unintended changes?",
            };
        case EditTask::removal:
            return {
                "Is the target object fully removed with no residue or ghosting?",
                "Is the revealed background plausible and consistent with the surroundings?",
                "Are nearby objects and textures preserved without distortion?",
            };
        case EditTask::object_swap:
            return {
                "Is the object replacement feasible and clearly specified?",
                "Is the original object completely replaced?",
                "Does the replacement match the requested object's appearance and scale?",
                "Is the surrounding scene unchanged apart from the swapped object?",
            };
        case EditTask::background_replace:
            return {
                "Is the background fully replaced with the described scene?",
                "Is the foreground subject preserved with clean boundaries?",
                "Do the lighting and color temperature of the new background match the subject?",
            };
        case EditTask::color_change:
            return {
                "Is the color changed on exactly the requested object or region?",
                "Does the new color match the instruction?",
                "Are texture, shading, and highlights preserved under the new color?",
            };
        case EditTask::bokeh:
            return {
                "Is the intended subject kept sharp and in focus?",
                "Is the background blur smooth and depth-consistent?",
                "Are the subject's edges free of halo or blur bleeding?",
            };
        case EditTask::relighting:
            return {
                "Does the lighting direction match the instruction?",
                "Are shadows and highlights consistent with the new light source?",
                "Does the relit image keep natural colors and details?",
            };
        case EditTask::style_transfer:
            return {
                "Does the result clearly exhibit the requested style?",
                "Are the original layout and object geometry maintained?",
                "Is the stylization applied uniformly across the image?",
            };
    }
    throw PrefflowError("unknown edit task value");
}

}  // namespace

std::string_view task_name(EditTask task) { return names_of(task).name; }
std::string_view task_report_label(EditTask task) { return names_of(task).report; }
std::string_view task_display_name(EditTask task) { return names_of(task).display; }

std::optional<EditTask> task_from_name(std::string_view name) {
    for (const auto& entry : kTaskNames)
        if (entry.name == name) return entry.task;
    return std::nullopt;
}

const ScoreRubric& ScoreRubric::standard() {
    static const ScoreRubric rubric{{
        "The edited image B is completely incorrect, does not follow the instruction at all, "
        "or fails to meet any requirements.",
        "The edited image B is partially correct but still largely incorrect. It follows the "
        "instruction only marginally, or the result appears unrealistic.",
        "The edited image B is mostly correct but still deviates from the instruction or fails "
        "to meet several key requirements.",
        "The edited image B generally follows the instruction, but its visual quality or "
        "aesthetics are subpar.",
        "The edited image B largely follows the instruction, and the visual quality and "
        "aesthetics are good.",
        "The edited image B fully follows the instruction, satisfies all requirements, and "
        "exhibits high-quality, realistic visual results.",
    }};
    return rubric;
}

std::string ScoringPrompt::render() const {
    std::string out = "Rate the edited image B against the instruction on a 0-5 scale.\n";
    for (size_t level = 0; level < rubric.levels.size(); ++level)
        out += "Score " + std::to_string(level) + ": " + rubric.levels[level] + "\n";
    out += "Consider the following before scoring:\n";
    for (const std::string& q : questions) out += "- " + q + "\n";
    return out;
}

const PromptRegistry& prompt_registry() {
    static const PromptRegistry registry = [] {
        PromptRegistry reg;
        for (EditTask task : kAllTasks)
            reg.emplace(task,
                        ScoringPrompt{task, ScoreRubric::standard(), default_questions(task)});
        return reg;
    }();
    return registry;
}

void save_prompts(const std::filesystem::path& dir, const PromptRegistry& registry) {
    ensure_dir(dir);
    for (const auto& [task, prompt] : registry) {
        nlohmann::json doc{
            {"task", std::string(task_name(task))},
            {"rubric", prompt.rubric.levels},
            {"questions", prompt.questions},
        };
        write_text_file(dir / (std::string(task_name(task)) + ".json"), doc.dump(2) + "\n");
    }
}

PromptRegistry load_prompts(const std::filesystem::path& dir) {
    PromptRegistry registry;
    for (EditTask task : kAllTasks) {
        const auto path = dir / (std::string(task_name(task)) + ".json");
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(read_text_file(path));
        } catch (const std::exception& e) {
            throw PrefflowError("bad prompt file " + path.string() + ": " + e.what());
        }
        ScoringPrompt prompt;
        prompt.task = task;
        try {
            const auto& name = doc.at("task").get_ref<const std::string&>();
            if (name != task_name(task))
                throw PrefflowError("prompt file " + path.string() + " names task '" + name + "'");
            const auto rubric = doc.at("rubric").get<std::vector<std::string>>();
            if (rubric.size() != 6)
                throw PrefflowError("prompt file " + path.string() + " needs 6 rubric levels");
            std::copy(rubric.begin(), rubric.end(), prompt.rubric.levels.begin());
            prompt.questions = doc.at("questions").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw PrefflowError("bad prompt schema in " + path.string() + ": " + e.what());
        }
        if (prompt.questions.empty())
            throw PrefflowError("prompt file " + path.string() + " has no questions");
        registry.emplace(task, std::move(prompt));
    }
    return registry;
}

double normalize_reward(double score, double alpha, double beta) {
    if (!(score >= 0.0 && score <= 5.0))
        throw ScorerError(ScoreErrorKind::out_of_range,
                          "score " + fmt_double(score) + " outside [0,5]");
    return 1.0 / (1.0 + std::exp(-alpha * score + beta));
}

ModePreferenceScorer::ModePreferenceScorer(std::vector<double> center, double r5, double r3)
    : center_(std::move(center)), r5_(r5), r3_(r3) {
    if (!(r5 > 0.0 && r3 > r5))
        throw PrefflowError("mode preference scorer requires 0 < r5 < r3");
}

double ModePreferenceScorer::score_point(std::span<const double> point) const {
    if (point.size() != center_.size())
        throw ScorerError(ScoreErrorKind::malformed, "terminal point dimension mismatch");
    const double dist = std::sqrt(kern::sq_dist(point, center_));
    if (dist <= r5_) return 5.0;
    if (dist <= r3_) return 5.0 - 2.0 * (dist - r5_) / (r3_ - r5_);
    if (dist <= 2.0 * r3_) return 3.0 * (2.0 * r3_ - dist) / r3_;
    return 0.0;
}

double ModePreferenceScorer::score(const EditCase& edit_case, const ScoringPrompt&) const {
    if (!edit_case.terminal_point)
        throw ScorerError(ScoreErrorKind::missing_output,
                          "case " + edit_case.id + " has no output to score");
    return score_point(*edit_case.terminal_point);
}

double ConstantScorer::score(const EditCase& edit_case, const ScoringPrompt&) const {
    if (!edit_case.has_output())
        throw ScorerError(ScoreErrorKind::missing_output,
                          "case " + edit_case.id + " has no output to score");
    if (!(value_ >= 0.0 && value_ <= 5.0))
        throw ScorerError(ScoreErrorKind::out_of_range, "constant scorer value outside [0,5]");
    return value_;
}

}  // namespace prefflow::reward
