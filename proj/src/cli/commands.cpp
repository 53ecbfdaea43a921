#include <iostream>
#include <memory>

#include "prefflow/bench/bench.hpp"
#include "prefflow/cli/config.hpp"
#include "prefflow/data/datapipe.hpp"
#include "prefflow/flow/checkpoint.hpp"
#include "prefflow/flow/train.hpp"
#include "prefflow/grpo/post_train.hpp"
#include "prefflow/reward/remote.hpp"

namespace prefflow::cli {

using nlohmann::json;

namespace {

const json& require_section(const json& config, const char* name) {
    if (!config.contains(name))
        throw ConfigError("config: missing required section '" + std::string(name) + "'");
    return config.at(name);
}

template <typename T>
T require_key(const json& section, const std::string& section_name, const char* key) {
    if (!section.contains(key))
        throw ConfigError("config: missing required key '" + section_name + "." + key + "'");
    return section.at(key).get<T>();
}

RunPaths run_paths(const json& config) {
    return RunPaths{config.value("out_dir", std::string("runs/default"))};
}

uint64_t run_seed(const json& config) { return config.value("seed", 1ull); }

flow::NoiseSchedule noise_from(const json& section, const char* key) {
    flow::NoiseSchedule schedule;
    if (!section.contains(key)) return schedule;
    const json& noise = section.at(key);
    const auto kind = noise.value("kind", std::string("constant"));
    schedule.kind = kind == "scaled" ? flow::NoiseSchedule::Kind::scaled
                                     : flow::NoiseSchedule::Kind::constant;
    schedule.level = noise.value("level", 0.3);
    return schedule;
}

flow::GaussMixture mixture_from(const json& target) {
    flow::GaussMixture mixture;
    if (!target.contains("modes"))
        throw ConfigError("config: missing required key 'flow.target.modes'");
    for (const json& mode : target.at("modes")) {
        flow::GaussMode m;
        m.center = mode.at("center").get<std::vector<double>>();
        m.stddev = mode.value("std", 0.3);
        m.weight = mode.value("weight", 1.0);
        mixture.modes.push_back(std::move(m));
    }
    mixture.validate();
    return mixture;
}

std::unique_ptr<reward::Scorer> scorer_from(const json& config) {
    const json& section = require_section(config, "scorer");
    const auto kind = require_key<std::string>(section, "scorer", "kind");
    if (kind == "mode_preference") {
        auto center = require_key<std::vector<double>>(section, "scorer", "center");
        const double r5 = require_key<double>(section, "scorer", "r5");
        const double r3 = require_key<double>(section, "scorer", "r3");
        return std::make_unique<reward::ModePreferenceScorer>(std::move(center), r5, r3);
    }
    reward::RemoteScorerConfig remote;
    remote.endpoint = require_key<std::string>(section, "scorer", "endpoint");
    remote.timeout_ms = section.value("timeout_ms", remote.timeout_ms);
    remote.retries = section.value("retries", remote.retries);
    remote.max_in_flight = section.value("max_in_flight", remote.max_in_flight);
    return std::make_unique<reward::RemoteScorer>(std::move(remote));
}

reward::PromptRegistry prompts_from(const json& config) {
    if (config.contains("datapipe") && config.at("datapipe").contains("prompts"))
        return reward::load_prompts(
            config.at("datapipe").at("prompts").get<std::string>());
    return reward::prompt_registry();
}

flow::MlpField checkpoint_or_default(const json& section, const std::string& section_name,
                                     const char* key, const RunPaths& paths) {
    if (section.contains(key))
        return flow::load_checkpoint(section.at(key).get<std::string>());
    const auto post = paths.checkpoints() / "post";
    const auto flow_base = paths.checkpoints() / "flow";
    std::filesystem::path sidecar = post;
    sidecar += ".json";
    if (std::filesystem::exists(sidecar)) return flow::load_checkpoint(post);
    sidecar = flow_base;
    sidecar += ".json";
    if (std::filesystem::exists(sidecar)) return flow::load_checkpoint(flow_base);
    throw ConfigError("config: no checkpoint found; set '" + section_name + "." + key +
                      "' or train one first");
}

}  // namespace

int cmd_train_flow(const json& config) {
    const json& section = require_section(config, "flow");
    const RunPaths paths = run_paths(config);
    paths.prepare();
    write_manifest(paths, "train-flow", config);

    flow::MlpArch arch;
    arch.dim = section.value("dim", 2ull);
    arch.cond_dim = section.value("cond_dim", 0ull);
    arch.hidden = section.value("hidden", std::vector<size_t>{64, 64});

    flow::TrainConfig train_cfg;
    train_cfg.steps = require_key<size_t>(section, "flow", "steps");
    train_cfg.lr = require_key<double>(section, "flow", "lr");
    train_cfg.batch = require_key<size_t>(section, "flow", "batch");
    train_cfg.momentum = section.value("momentum", 0.9);
    train_cfg.seed = run_seed(config);

    const flow::GaussMixture mixture = mixture_from(require_section(config, "flow").at("target"));
    if (mixture.dim() != arch.dim)
        throw ConfigError("config: flow.target modes have dimension " +
                          std::to_string(mixture.dim()) + ", flow.dim is " +
                          std::to_string(arch.dim));

    flow::MlpField field(arch);
    Rng init_rng(mix_seed({train_cfg.seed, 0x696e6974ull}));  // "init" stream
    field.init_params(init_rng);

    const flow::TrainResult result =
        flow::train_flow(field, flow::mixture_pair_sampler(mixture), train_cfg);

    flow::write_loss_csv(paths.curves() / "loss.csv", result.curve);
    flow::save_checkpoint(paths.checkpoints() / "flow", field);

    const size_t n_traj = section.value("sample_trajectories", 8ull);
    if (n_traj > 0) {
        const size_t steps = section.value("sample_steps", 40ull);
        std::vector<flow::Trajectory> trajectories;
        trajectories.reserve(n_traj);
        const flow::Condition cond{"sample", std::vector<double>(arch.cond_dim, 0.0)};
        for (size_t i = 0; i < n_traj; ++i) {
            Rng rng(mix_seed({train_cfg.seed, 0x74726a73ull, i}));
            flow::Vec x0(arch.dim);
            for (double& v : x0) v = rng.gaussian();
            trajectories.push_back(flow::ode_sample(field, std::move(x0), cond, steps));
        }
        flow::write_trajectories_csv(paths.curves() / "trajectories.csv", trajectories);
    }

    std::cout << "train-flow: " << result.curve.size() << " steps, final loss "
              << fmt_double(result.final_loss) << ", checkpoint "
              << (paths.checkpoints() / "flow").string() << "\n";
    return 0;
}

int cmd_build_dataset(const json& config) {
    const json& section = require_section(config, "datapipe");
    const RunPaths paths = run_paths(config);
    paths.prepare();
    write_manifest(paths, "build-dataset", config);

    const auto input = require_key<std::string>(section, "datapipe", "input");
    const data::RawDataset raw = data::ingest(input);
    const auto scorer = scorer_from(config);
    const reward::PromptRegistry prompts = prompts_from(config);
    const unsigned threads = section.value("threads", 0u);

    const data::ScoredDataset scored = data::score_dataset(raw, *scorer, prompts, threads);
    if (!scored.failures.empty()) {
        std::cerr << "build-dataset: " << scored.failures.size() << " of " << raw.cases.size()
                  << " cases failed to score; first: " << scored.failures.front().id << ": "
                  << scored.failures.front().error << "\n";
        if (scored.entries.empty() && !raw.cases.empty())
            throw PrefflowError("build-dataset: scoring failed for every case (" +
                                scored.failures.front().error + ")");
    }

    std::optional<double> threshold;
    if (section.contains("threshold")) threshold = section.at("threshold").get<double>();

    const bool balance = section.contains("profile");
    const auto order = section.value("order", std::string("filter_then_balance"));
    const double cap_ratio = section.value("cap_ratio", 1.5);

    auto apply_balance = [&](std::vector<data::ScoredEntry> entries) {
        const data::CategoryProfile profile =
            data::CategoryProfile::load(section.at("profile").get<std::string>());
        std::vector<reward::EditCase> cases;
        cases.reserve(entries.size());
        for (auto& entry : entries) cases.push_back(entry.edit_case);
        const auto labeled = data::assign_categories(std::move(cases), profile);
        for (size_t i = 0; i < entries.size(); ++i) entries[i].edit_case = labeled[i];
        return data::balance_categories(std::move(entries), cap_ratio);
    };

    data::HardCaseDataset hard;
    std::vector<data::ScoredEntry> final_entries;
    if (!balance) {
        hard = data::filter_hard_cases(scored, threshold);
        final_entries = hard.entries;
    } else if (order == "filter_then_balance") {
        hard = data::filter_hard_cases(scored, threshold);
        final_entries = apply_balance(hard.entries);
    } else {
        data::ScoredDataset balanced{apply_balance(scored.entries), {}};
        hard = data::filter_hard_cases(balanced, threshold);
        final_entries = hard.entries;
    }

    if (hard.all_perfect)
        std::cerr << "build-dataset: warning: every scored case is a perfect 5; the hard-case "
                     "set is empty\n";

    data::write_cases_jsonl(paths.datasets() / "hard_cases.jsonl", final_entries);
    data::write_stats_csv(paths.datasets() / "stats.csv", data::dataset_stats(final_entries));

    std::cout << "build-dataset: " << raw.cases.size() << " cases in, "
              << final_entries.size() << " retained, " << hard.discarded << " discarded, "
              << scored.failures.size() << " failed\n";
    return 0;
}

int cmd_post_train(const json& config) {
    const json& section = require_section(config, "grpo");
    const RunPaths paths = run_paths(config);
    paths.prepare();
    write_manifest(paths, "post-train", config);

    grpo::GrpoConfig cfg;
    cfg.group_size = section.value("group_size", cfg.group_size);
    cfg.clip_epsilon = section.value("epsilon", cfg.clip_epsilon);
    cfg.kl_weight = section.value("kl_weight", cfg.kl_weight);
    cfg.denoise_steps = section.value("steps", cfg.denoise_steps);
    cfg.noise = noise_from(section, "noise");
    cfg.lr = section.value("lr", cfg.lr);
    cfg.iterations = require_key<size_t>(section, "grpo", "iterations");
    cfg.groups_per_iter = section.value("groups_per_iter", cfg.groups_per_iter);
    cfg.threads = section.value("threads", 0u);
    cfg.seed = run_seed(config);
    cfg.validate();

    flow::MlpField policy = checkpoint_or_default(section, "grpo", "init_checkpoint", paths);

    std::vector<flow::Condition> conditions;
    if (section.contains("dataset")) {
        const data::RawDataset hard = data::ingest(section.at("dataset").get<std::string>());
        for (const reward::EditCase& c : hard.cases) {
            flow::Condition cond{c.id, {}};
            if (policy.cond_dim() > 0) {
                if (c.input_embedding.size() != policy.cond_dim())
                    throw ConfigError("config: dataset case " + c.id + " embedding size " +
                                      std::to_string(c.input_embedding.size()) +
                                      " does not match policy cond_dim " +
                                      std::to_string(policy.cond_dim()));
                cond.embedding = c.input_embedding;
            }
            conditions.push_back(std::move(cond));
        }
    } else {
        conditions.push_back({"toy", std::vector<double>(policy.cond_dim(), 0.0)});
    }

    const auto scorer = scorer_from(config);
    const reward::PromptRegistry prompts = prompts_from(config);
    const auto task =
        reward::task_from_name(section.value("task", std::string("addition")));
    if (!task) throw ConfigError("config: grpo.task is not one of the eight tasks");
    const reward::ScoringPrompt prompt = prompts.at(*task);

    const grpo::TerminalScorer terminal_scorer =
        [&scorer, &prompt, task](const flow::Vec& terminal, const flow::Condition& cond) {
            reward::EditCase edit_case;
            edit_case.id = cond.id;
            edit_case.task = *task;
            edit_case.instruction = cond.id;
            edit_case.output_ref = "rollout://" + cond.id;
            edit_case.terminal_point = terminal;
            return scorer->score(edit_case, prompt);
        };

    // The curve file is appended and flushed per iteration so an interrupted
    // run still leaves a usable prefix.
    CsvWriter csv(paths.curves() / "reward.csv", {"iteration", "mean_reward", "mean_score", "kl"});
    csv.flush();
    const grpo::PostTrainResult result = grpo::post_train(
        policy, conditions, terminal_scorer, cfg, [&](const grpo::IterationRecord& rec) {
            csv.row({std::to_string(rec.iteration), fmt_double(rec.mean_reward),
                     fmt_double(rec.mean_score), fmt_double(rec.kl)});
            csv.flush();
        });

    flow::save_checkpoint(paths.checkpoints() / "post", policy);
    flow::save_grpo_state(paths.checkpoints() / "post",
                          {.iterations = cfg.iterations, .seed = cfg.seed});

    const double final_reward =
        result.curve.empty() ? 0.0 : result.curve.back().mean_reward;
    std::cout << "post-train: " << result.curve.size() << " iterations, final mean reward "
              << fmt_double(final_reward) << ", skipped groups "
              << result.total_skipped_groups << ", checkpoint "
              << (paths.checkpoints() / "post").string() << "\n";
    return 0;
}

int cmd_evaluate(const json& config) {
    const json& section = require_section(config, "bench");
    const RunPaths paths = run_paths(config);
    paths.prepare();
    write_manifest(paths, "evaluate", config);

    const auto suite_path = require_key<std::string>(section, "bench", "suite");
    const bench::BenchSuite suite = bench::BenchSuite::load(suite_path);

    const flow::MlpField policy = checkpoint_or_default(section, "bench", "checkpoint", paths);
    const size_t steps = section.value("sample_steps", 40ull);
    const auto sampler_kind = section.value("sampler", std::string("ode"));
    const flow::NoiseSchedule noise = noise_from(section, "noise");

    const bench::CaseSampler sampler = [&policy, steps, sampler_kind,
                                        noise](const reward::EditCase& c, uint64_t seed) {
        Rng rng(seed);
        flow::Vec x0(policy.dim());
        for (double& v : x0) v = rng.gaussian();
        flow::Condition cond{c.id, {}};
        if (policy.cond_dim() > 0) {
            if (c.input_embedding.size() != policy.cond_dim())
                throw PrefflowError("case " + c.id + " embedding does not match policy cond_dim");
            cond.embedding = c.input_embedding;
        }
        if (sampler_kind == "sde")
            return flow::sde_sample(policy, std::move(x0), cond, steps, noise, rng).terminal();
        return flow::ode_sample(policy, std::move(x0), cond, steps).terminal();
    };

    const auto scorer = scorer_from(config);
    const reward::PromptRegistry prompts = prompts_from(config);
    bench::EvalConfig eval_cfg;
    eval_cfg.model_id = section.value("model_id", std::string("model"));
    eval_cfg.seed = run_seed(config);
    eval_cfg.threads = section.value("threads", 0u);

    const bench::BenchReport report = bench::evaluate(sampler, suite, *scorer, prompts, eval_cfg);

    std::vector<bench::BenchReport> rows{report};
    if (section.contains("compare")) {
        const auto baseline = bench::read_report_csv(section.at("compare").get<std::string>());
        rows.insert(rows.end(), baseline.begin(), baseline.end());
        rows = bench::merge_reports(std::move(rows));
    }
    bench::write_report_csv(paths.reports() / "bench.csv", rows);
    bench::write_report_markdown(paths.reports() / "bench.md", rows);

    std::cout << "evaluate: model " << eval_cfg.model_id << " overall "
              << fmt_double(round_half_up(report.overall, 3)) << " (" << report.failures
              << " failures) -> " << (paths.reports() / "bench.csv").string() << "\n";
    return 0;
}

}  // namespace prefflow::cli
