#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "prefflow/common/rng.hpp"
#include "prefflow/grpo/post_train.hpp"
#include "prefflow/flow/train.hpp"
#include "prefflow/reward/reward.hpp"
#include "support/oracles.hpp"

using namespace prefflow;
using namespace prefflow::grpo;
using prefflow::flow::Condition;
using prefflow::flow::MlpField;
using prefflow::flow::NoiseSchedule;
using prefflow::flow::Vec;

namespace {

const std::vector<Condition> kToyConditions{{"toy", {}}};

MlpField pretrained_two_mode_policy() {
    flow::GaussMixture mixture{
        {flow::GaussMode{{1.5, 0.0}, 0.3, 0.5}, flow::GaussMode{{-1.5, 0.0}, 0.3, 0.5}}};
    Rng rng(101);
    MlpField field({.dim = 2, .cond_dim = 0, .hidden = {32, 32}});
    field.init_params(rng);
    flow::TrainConfig cfg{.steps = 800, .batch = 128, .lr = 0.02, .momentum = 0.9, .seed = 42};
    flow::train_flow(field, flow::mixture_pair_sampler(mixture), cfg);
    return field;
}

GrpoConfig toy_config() {
    GrpoConfig cfg;
    cfg.group_size = 8;
    cfg.clip_epsilon = 0.2;
    cfg.kl_weight = 0.01;
    cfg.denoise_steps = 20;
    cfg.noise = {NoiseSchedule::Kind::constant, 0.3};
    cfg.lr = 0.01;
    cfg.groups_per_iter = 4;
    cfg.seed = 7;
    cfg.threads = 2;
    return cfg;
}

TerminalScorer mode_a_scorer() {
    auto scorer = std::make_shared<reward::ModePreferenceScorer>(
        std::vector<double>{1.5, 0.0}, 0.45, 1.5);
    return [scorer](const Vec& terminal, const Condition&) {
        return scorer->score_point(terminal);
    };
}

}  // namespace

TEST_CASE("zero iterations leave the policy untouched") {
    MlpField policy({.dim = 2, .cond_dim = 0, .hidden = {4}});
    Rng rng(1);
    policy.init_params(rng);
    const std::vector<double> before(policy.params().begin(), policy.params().end());
    GrpoConfig cfg = toy_config();
    cfg.iterations = 0;
    const PostTrainResult result = post_train(policy, kToyConditions, mode_a_scorer(), cfg);
    CHECK(result.curve.empty());
    CHECK(std::equal(before.begin(), before.end(), policy.params().begin()));
}

TEST_CASE("constant rewards give zero advantages and an unchanged policy") {
    MlpField policy({.dim = 2, .cond_dim = 0, .hidden = {6}});
    Rng rng(2);
    policy.init_params(rng);
    const std::vector<double> before(policy.params().begin(), policy.params().end());
    GrpoConfig cfg = toy_config();
    cfg.iterations = 3;
    cfg.groups_per_iter = 2;
    cfg.denoise_steps = 5;
    const TerminalScorer constant = [](const Vec&, const Condition&) { return 4.0; };
    const PostTrainResult result = post_train(policy, kToyConditions, constant, cfg);
    REQUIRE(result.curve.size() == 3);
    // Surrogate gradient vanishes (all advantages zero) and the policy stays
    // at the reference, so the KL gradient vanishes too: no movement at all.
    CHECK(std::equal(before.begin(), before.end(), policy.params().begin()));
    for (const auto& rec : result.curve)
        CHECK(rec.mean_reward == doctest::Approx(reward::normalize_reward(4.0)));
}

TEST_CASE("post-training is deterministic given the seed") {
    auto run = [] {
        MlpField policy({.dim = 2, .cond_dim = 0, .hidden = {8}});
        Rng rng(3);
        policy.init_params(rng);
        GrpoConfig cfg = toy_config();
        cfg.iterations = 4;
        cfg.groups_per_iter = 2;
        cfg.denoise_steps = 8;
        post_train(policy, kToyConditions, mode_a_scorer(), cfg);
        return std::vector<double>(policy.params().begin(), policy.params().end());
    };
    CHECK(run() == run());
}

TEST_CASE("scorer failures skip the group and are logged in the curve") {
    MlpField policy({.dim = 2, .cond_dim = 0, .hidden = {6}});
    Rng rng(4);
    policy.init_params(rng);
    GrpoConfig cfg = toy_config();
    cfg.iterations = 2;
    cfg.groups_per_iter = 3;
    cfg.denoise_steps = 4;
    size_t calls = 0;
    const TerminalScorer flaky = [&calls](const Vec& terminal, const Condition&) {
        if (++calls % 5 == 0)
            throw reward::ScorerError(reward::ScoreErrorKind::timeout, "synthetic outage");
        return std::min(5.0, std::abs(terminal[0]));
    };
    const PostTrainResult result = post_train(policy, kToyConditions, flaky, cfg);
    CHECK(result.total_skipped_groups > 0);
    size_t from_curve = 0;
    for (const auto& rec : result.curve) from_curve += rec.skipped_groups;
    CHECK(from_curve == result.total_skipped_groups);
}

TEST_CASE("a very large KL weight pins the policy to the reference") {
    MlpField policy = pretrained_two_mode_policy();
    const std::vector<double> reference(policy.params().begin(), policy.params().end());

    GrpoConfig cfg = toy_config();
    cfg.iterations = 25;
    cfg.kl_weight = 1e3;
    cfg.lr = 5e-4;  // large penalties need a step small enough to stay stable
    const PostTrainResult result = post_train(policy, kToyConditions, mode_a_scorer(), cfg);
    REQUIRE(result.curve.size() == 25);

    double max_shift = 0.0;
    for (size_t i = 0; i < reference.size(); ++i)
        max_shift = std::max(max_shift, std::abs(policy.params()[i] - reference[i]));
    CHECK(max_shift < 0.05);
}

TEST_CASE("mode-preference rewards rise on the toy mixture") {
    MlpField policy = pretrained_two_mode_policy();
    GrpoConfig cfg = toy_config();
    cfg.iterations = 40;
    const PostTrainResult result = post_train(policy, kToyConditions, mode_a_scorer(), cfg);
    REQUIRE(result.curve.size() == 40);

    auto window_mean = [&](size_t lo, size_t hi) {
        double acc = 0.0;
        for (size_t i = lo; i < hi; ++i) acc += result.curve[i].mean_reward;
        return acc / static_cast<double>(hi - lo);
    };
    CHECK(window_mean(30, 40) > window_mean(0, 10));
}

TEST_CASE("iteration callback sees records as they are produced") {
    MlpField policy({.dim = 2, .cond_dim = 0, .hidden = {4}});
    Rng rng(5);
    policy.init_params(rng);
    GrpoConfig cfg = toy_config();
    cfg.iterations = 3;
    cfg.groups_per_iter = 1;
    cfg.denoise_steps = 3;
    std::vector<size_t> seen;
    post_train(policy, kToyConditions, mode_a_scorer(), cfg,
               [&](const IterationRecord& rec) { seen.push_back(rec.iteration); });
    CHECK(seen == std::vector<size_t>{0, 1, 2});
}

TEST_CASE("reward csv schema") {
    const auto path = std::filesystem::temp_directory_path() / "prefflow_reward.csv";
    std::vector<IterationRecord> curve{{0, 0.5, 2.5, 0.01, 0}, {1, 0.6, 3.0, 0.02, 1}};
    write_reward_csv(path, curve);
    const std::string text = read_text_file(path);
    CHECK(text.substr(0, text.find('\n')) == "iteration,mean_reward,mean_score,kl");
    std::filesystem::remove(path);
}

TEST_CASE("post_train validates its inputs") {
    MlpField policy({.dim = 2, .cond_dim = 0, .hidden = {4}});
    Rng rng(6);
    policy.init_params(rng);
    GrpoConfig cfg = toy_config();
    CHECK_THROWS_AS(post_train(policy, {}, mode_a_scorer(), cfg), GrpoError);
    cfg.noise.level = 0.0;
    CHECK_THROWS_AS(post_train(policy, kToyConditions, mode_a_scorer(), cfg), GrpoError);
}
