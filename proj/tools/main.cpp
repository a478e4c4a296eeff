#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "vfrl/pipeline.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "config file (flat key=value)");
    auto track = [&flags](const std::string& key) {
        return [&flags, key](const std::string& value) {
            flags.overrides.emplace_back(key, value);
        };
    };
    cmd->add_option_function<std::string>("--seed", track("seed"), "run seed");
    cmd->add_option_function<std::string>("--env", track("env"), "nav2|maze|dose|grid");
    cmd->add_option_function<std::string>("--budget", track("budget"), "rollout budget");
    cmd->add_option_function<std::string>("--depth", track("L"), "mutation depth limit {1|10|20}");
    cmd->add_option_function<std::string>("--strategy", track("strategy"),
                                          "combined|uncertainty|fuzz");
    cmd->add_flag_function("--force-falsify",
                           [&flags](std::int64_t) { flags.overrides.emplace_back("force_falsify", "true"); },
                           "run falsification even when the checker found a violation");
    cmd->add_option_function<std::string>("--workers", track("workers"), "worker cap");
    cmd->add_option_function<std::string>("--run-id", track("run_id"), "run identifier");
    cmd->add_option_function<std::string>("--out", track("out_dir"), "artifact root directory");
    cmd->add_flag_function("--timings",
                           [&flags](std::int64_t) { flags.overrides.emplace_back("timings", "true"); },
                           "include wall-clock timings in reports (non-deterministic)");
}

vfrl::RunConfig resolve(const CommonFlags& flags) {
    vfrl::RunConfig cfg;
    if (!flags.config_path.empty()) cfg = vfrl::load_config(flags.config_path);
    for (const auto& [key, value] : flags.overrides) vfrl::apply_config_kv(cfg, key, value);
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"policy verification and falsification toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string abstract_method = "tree";
    std::string check_formula;
    bool falsify_compare = false;

    auto* train = app.add_subcommand("train", "train the task policy");
    auto* dataset = app.add_subcommand("dataset", "generate the offline dataset");
    auto* abstract_cmd = app.add_subcommand("abstract", "cluster states and build the policy graph");
    abstract_cmd->add_option("--method", abstract_method, "tree|kmeans");
    auto* check_cmd = app.add_subcommand("check", "model-check the policy graph");
    check_cmd->add_option("--formula", check_formula, "PCTL formula (defaults to the safety spec)");
    auto* falsify_cmd = app.add_subcommand("falsify", "run the falsification campaign");
    falsify_cmd->add_flag("--compare", falsify_compare, "also run the baseline strategies");
    auto* shield_cmd = app.add_subcommand("shield", "train the shield and re-verify");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "assemble metrics and the run report");
    auto* pipeline_cmd = app.add_subcommand("pipeline", "run all stages end to end");
    for (auto* cmd : {train, dataset, abstract_cmd, check_cmd, falsify_cmd, shield_cmd,
                      evaluate_cmd, pipeline_cmd})
        add_common(cmd, flags);

    CLI11_PARSE(app, argc, argv);

    try {
        const vfrl::RunConfig cfg = resolve(flags);
        if (pipeline_cmd->parsed()) return vfrl::run_pipeline(cfg);

        vfrl::PipelineManifest manifest = vfrl::PipelineManifest::create(cfg);
        if (train->parsed()) {
            vfrl::stage_train(manifest, cfg);
        } else if (dataset->parsed()) {
            vfrl::stage_dataset(manifest, cfg);
        } else if (abstract_cmd->parsed()) {
            vfrl::stage_abstract(manifest, cfg, abstract_method);
        } else if (check_cmd->parsed()) {
            const auto outcome = vfrl::stage_check(manifest, cfg, check_formula);
            return outcome.satisfied ? 0 : 2;
        } else if (falsify_cmd->parsed()) {
            const auto outcome = vfrl::stage_falsify(manifest, cfg, falsify_compare);
            return outcome.violations > 0 ? 2 : 0;
        } else if (shield_cmd->parsed()) {
            const auto outcome = vfrl::stage_shield(manifest, cfg);
            return outcome.shielded_violations > 0 ? 2 : 0;
        } else if (evaluate_cmd->parsed()) {
            vfrl::stage_evaluate(manifest, cfg);
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
