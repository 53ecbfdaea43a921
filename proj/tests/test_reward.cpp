#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "prefflow/common/rng.hpp"
#include "prefflow/reward/reward.hpp"

using namespace prefflow;
using namespace prefflow::reward;

namespace {

EditCase case_at(std::vector<double> terminal, EditTask task = EditTask::addition) {
    EditCase c;
    c.id = "case";
    c.task = task;
    c.instruction = "move mass toward the target";
    c.input_ref = "mem://in";
    c.output_ref = "mem://out";
    c.terminal_point = std::move(terminal);
    return c;
}

}  // namespace

TEST_CASE("sigmoid reward normalization hand values") {
    CHECK(normalize_reward(2.5) == 0.5);  // argument of the sigmoid is exactly 0
    CHECK(normalize_reward(5.0) == doctest::Approx(0.993307).epsilon(1e-6));
    CHECK(normalize_reward(0.0) == doctest::Approx(0.006693).epsilon(1e-4));
    CHECK(std::abs(normalize_reward(0.0) - 0.006693) < 1e-6);
    CHECK_THROWS_AS(normalize_reward(-0.1), ScorerError);
    CHECK_THROWS_AS(normalize_reward(5.1), ScorerError);
}

TEST_CASE("sigmoid reward is strictly increasing with outputs in (0,1)") {
    double prev = -1.0;
    for (int i = 0; i <= 500; ++i) {
        const double s = 5.0 * static_cast<double>(i) / 500.0;
        const double r = normalize_reward(s);
        CHECK(r > 0.0);
        CHECK(r < 1.0);
        CHECK(r > prev);
        prev = r;
    }
}

TEST_CASE("monotone normalization preserves the within-group argmax") {
    Rng rng(61);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> scores(8);
        for (double& s : scores) s = rng.uniform(0.0, 5.0);
        size_t best_score = 0, best_reward = 0;
        for (size_t i = 1; i < scores.size(); ++i) {
            if (scores[i] > scores[best_score]) best_score = i;
            if (normalize_reward(scores[i]) > normalize_reward(scores[best_reward]))
                best_reward = i;
        }
        CHECK(best_score == best_reward);
    }
}

TEST_CASE("rubric anchors its extreme levels") {
    const ScoreRubric& rubric = ScoreRubric::standard();
    CHECK(rubric.levels.size() == 6);
    CHECK(rubric.levels[0].find("completely incorrect") != std::string::npos);
    CHECK(rubric.levels[5].find("fully follows the instruction") != std::string::npos);
}

TEST_CASE("prompt registry covers all eight tasks with questioned prompts") {
    const PromptRegistry& registry = prompt_registry();
    CHECK(registry.size() == 8);
    for (EditTask task : kAllTasks) {
        REQUIRE(registry.count(task) == 1);
        const ScoringPrompt& prompt = registry.at(task);
        CHECK(prompt.task == task);
        CHECK(prompt.questions.size() >= 3);
        // each prompt carries all six rubric levels
        const std::string text = prompt.render();
        for (const std::string& level : ScoreRubric::standard().levels)
            CHECK(text.find(level) != std::string::npos);
    }
    const auto& swap_questions = registry.at(EditTask::object_swap).questions;
    auto has = [&](std::string_view q) {
        for (const auto& question : swap_questions)
            if (question == q) return true;
        return false;
    };
    CHECK(has("Is the object replacement feasible and clearly specified?"));
    CHECK(has("Is the original object completely replaced?"));
}

TEST_CASE("task name tables are consistent") {
    for (EditTask task : kAllTasks) {
        CHECK(task_from_name(task_name(task)) == task);
    }
    CHECK_FALSE(task_from_name("collage").has_value());
    CHECK(task_report_label(EditTask::object_swap) == "obj_swap");
    CHECK(task_display_name(EditTask::background_replace) == "Bg. Replace");
}

TEST_CASE("prompt files round-trip through disk") {
    const auto dir = std::filesystem::temp_directory_path() / "prefflow_prompts";
    std::filesystem::remove_all(dir);
    save_prompts(dir, prompt_registry());
    const PromptRegistry loaded = load_prompts(dir);
    REQUIRE(loaded.size() == 8);
    for (EditTask task : kAllTasks) {
        CHECK(loaded.at(task).questions == prompt_registry().at(task).questions);
        CHECK(loaded.at(task).rubric.levels == prompt_registry().at(task).rubric.levels);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("mode preference scorer hits its knots") {
    const std::vector<double> center{1.0, -2.0};
    const double r5 = 0.5, r3 = 1.5;
    ModePreferenceScorer scorer(center, r5, r3);

    CHECK(scorer.score(case_at({1.0, -2.0}), prompt_registry().at(EditTask::addition)) == 5.0);
    // a point exactly at distance r3
    CHECK(scorer.score_point(std::vector<double>{1.0 + r3, -2.0}) == doctest::Approx(3.0));
    // outer knot at 2*r3
    CHECK(scorer.score_point(std::vector<double>{1.0 + 2 * r3, -2.0}) == doctest::Approx(0.0));
    CHECK(scorer.score_point(std::vector<double>{1.0 + 5.0, -2.0}) == 0.0);

    CHECK_THROWS_AS(ModePreferenceScorer(center, 1.5, 0.5), PrefflowError);
}

TEST_CASE("mode preference scorer is continuous and radially nonincreasing") {
    const std::vector<double> center{0.0};
    ModePreferenceScorer scorer(center, 0.4, 1.2);
    for (double knot : {0.4, 1.2, 2.4}) {
        const double below = scorer.score_point(std::vector<double>{knot - 1e-9});
        const double above = scorer.score_point(std::vector<double>{knot + 1e-9});
        CHECK(std::abs(below - above) < 1e-7);
    }
    Rng rng(62);
    for (int rep = 0; rep < 500; ++rep) {
        const double d1 = rng.uniform(0.0, 3.0);
        const double d2 = d1 + rng.uniform(0.0, 1.0);
        CHECK(scorer.score_point(std::vector<double>{d1}) >=
              scorer.score_point(std::vector<double>{d2}));
    }
}

TEST_CASE("knot continuity to 1e-12 by closed-form piece evaluation") {
    // Adjacent pieces evaluated AT the knot must agree exactly.
    const double r5 = 0.4, r3 = 1.2;
    const double inner_at_r5 = 5.0;
    const double mid_at_r5 = 5.0 - 2.0 * (r5 - r5) / (r3 - r5);
    const double mid_at_r3 = 5.0 - 2.0 * (r3 - r5) / (r3 - r5);
    const double outer_at_r3 = 3.0 * (2.0 * r3 - r3) / r3;
    const double outer_at_2r3 = 3.0 * (2.0 * r3 - 2.0 * r3) / r3;
    CHECK(std::abs(inner_at_r5 - mid_at_r5) < 1e-12);
    CHECK(std::abs(mid_at_r3 - outer_at_r3) < 1e-12);
    CHECK(std::abs(outer_at_2r3 - 0.0) < 1e-12);
}

TEST_CASE("scorers reject cases without an output") {
    EditCase incomplete;
    incomplete.id = "pending";
    incomplete.task = EditTask::removal;
    const auto& prompt = prompt_registry().at(EditTask::removal);
    CHECK_THROWS_AS(ModePreferenceScorer({0.0}, 0.1, 0.2).score(incomplete, prompt), ScorerError);
    CHECK_THROWS_AS(ConstantScorer(4.0).score(incomplete, prompt), ScorerError);
    CHECK(ConstantScorer(4.0).score(case_at({0.0, 0.0}), prompt) == 4.0);
}
