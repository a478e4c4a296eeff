#pragma once

#include <optional>

#include "vfrl/manifest.hpp"
#include "vfrl/metrics.hpp"
#include "vfrl/shield.hpp"

namespace vfrl {

// Stage drivers shared by the CLI and the test suites. Every stage draws its
// randomness from a fixed fork of the run seed, so rerunning a stage with the
// same manifest and seed rewrites byte-identical artifacts.

void stage_train(PipelineManifest& m, const RunConfig& cfg);
void stage_dataset(PipelineManifest& m, const RunConfig& cfg);
// Trains the risk critic (once per run) and builds the graph for `method`
// ("tree" or "kmeans"), exporting both JSON and DOT forms.
void stage_abstract(PipelineManifest& m, const RunConfig& cfg, const std::string& method);

struct CheckStageOutcome {
    bool satisfied = false;
    bool counterexample_found = false;
    bool goal_unreachable = false;
};
// `formula_text` overrides the default specification (standalone checking).
CheckStageOutcome stage_check(PipelineManifest& m, const RunConfig& cfg,
                              const std::string& formula_text = "");

struct FalsifyStageOutcome {
    int violations = 0;
    std::optional<int> episodes_to_first;
};
// Trains the encoder ensemble (once per run), selects seeds per the
// configured strategy and runs the campaign. With compare=true the two
// baselines run under the identical budget as well.
FalsifyStageOutcome stage_falsify(PipelineManifest& m, const RunConfig& cfg, bool compare = false);

struct ShieldStageOutcome {
    int unshielded_violations = 0;
    int shielded_violations = 0;
    bool shielded_check_satisfied = false;
};
ShieldStageOutcome stage_shield(PipelineManifest& m, const RunConfig& cfg);

void stage_evaluate(PipelineManifest& m, const RunConfig& cfg);

// Full A -> B -> C flow; returns the process exit code (0 no violation found,
// 2 violations found, 1 is reserved for operational errors).
int run_pipeline(const RunConfig& cfg);

// The default safety specification checked by the pipeline (the reach-goal-
// while-avoiding-unsafe shape, with p from the config).
std::string default_formula_text(const RunConfig& cfg);

struct ReportInputs {
    std::string run_id;
    std::string config_snapshot;
    std::optional<nlohmann::ordered_json> check;
    std::optional<nlohmann::ordered_json> campaign;
    std::optional<nlohmann::ordered_json> strategy_table;
    std::optional<nlohmann::ordered_json> shield_comparison;
    std::optional<nlohmann::ordered_json> fidelity;
    std::optional<nlohmann::ordered_json> pac;
};

struct RunReport {
    std::string text;
    nlohmann::ordered_json json;
};

// One document per run: verdict, counterexample, campaign, strategy table,
// shield comparison, abstraction fidelity and the PAC check, with absent
// sections marked skipped. Field order is stable; reruns with the same seed
// produce byte-identical output.
RunReport summarize_run(const ReportInputs& inputs);

}  // namespace vfrl
