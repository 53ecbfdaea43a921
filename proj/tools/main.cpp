#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "prefflow/cli/config.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<uint64_t> seed;
    std::optional<std::string> out;
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration (JSON, or a run.json manifest)")
        ->required();
    cmd->add_option("--set", args.sets, "override a scalar config leaf, e.g. grpo.epsilon=0.1");
    cmd->add_option("--seed", args.seed, "override the global seed");
    cmd->add_option("--out", args.out, "override the output directory");
}

nlohmann::json effective_config(const CommonArgs& args) {
    nlohmann::json config = prefflow::cli::load_config_file(args.config_path);
    for (const std::string& assignment : args.sets)
        prefflow::cli::apply_set_override(config, assignment);
    if (args.seed) config["seed"] = *args.seed;
    if (args.out) config["out_dir"] = *args.out;
    prefflow::cli::apply_env_overrides(config);
    prefflow::cli::validate_config(config);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rectified-flow pretraining, preference post-training, and evaluation "
                 "on desk-scale synthetic tasks"};
    app.require_subcommand(1);

    CommonArgs train_args, dataset_args, post_args, eval_args;
    std::optional<std::string> compare;

    CLI::App* train = app.add_subcommand("train-flow", "pretrain the flow model");
    add_common_options(train, train_args);
    CLI::App* dataset = app.add_subcommand("build-dataset", "score, filter, and balance cases");
    add_common_options(dataset, dataset_args);
    CLI::App* post = app.add_subcommand("post-train", "preference post-training (GRPO)");
    add_common_options(post, post_args);
    CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint on a bench suite");
    add_common_options(evaluate, eval_args);
    evaluate->add_option("--compare", compare, "baseline report CSV to merge into the table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // usage errors
    }

    try {
        if (train->parsed()) return prefflow::cli::cmd_train_flow(effective_config(train_args));
        if (dataset->parsed())
            return prefflow::cli::cmd_build_dataset(effective_config(dataset_args));
        if (post->parsed()) return prefflow::cli::cmd_post_train(effective_config(post_args));
        if (evaluate->parsed()) {
            nlohmann::json config = effective_config(eval_args);
            if (compare) config["bench"]["compare"] = *compare;
            prefflow::cli::validate_config(config);
            return prefflow::cli::cmd_evaluate(config);
        }
    } catch (const prefflow::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
