#include "vfrl/pipeline.hpp"

#include <filesystem>
#include <fstream>

namespace vfrl {

namespace {

// Fixed per-stage rng stream ids.
enum StageStream : std::uint64_t {
    kTrain = 1,
    kDataset = 2,
    kCritic = 3,
    kEnsemble = 4,
    kClusterTree = 5,
    kClusterKmeans = 6,
    kCampaign = 7,
    kAdversary = 8,
    kSafePolicy = 9,
    kReverify = 10,
};

Rng stage_rng(const RunConfig& cfg, StageStream stream) { return Rng(cfg.seed).fork(stream); }

void write_json(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

nlohmann::ordered_json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    nlohmann::ordered_json j;
    in >> j;
    return j;
}

struct LoadedRun {
    std::unique_ptr<Env> env;
    TrainedTaskPolicy task;
    TrajectoryDataset dataset;
    std::optional<RiskCritic> critic;
    std::optional<EncoderEnsemble> ensemble;
};

LoadedRun load_core(PipelineManifest& m, const RunConfig& cfg, bool need_dataset = true) {
    LoadedRun run;
    run.env = make_env(cfg);
    m.require("train");
    run.task = load_task_policy(m.path("policy.model"), *run.env);
    if (need_dataset) {
        m.require("dataset");
        run.dataset = read_dataset(m.path("dataset.txt"));
    }
    return run;
}

RiskCritic ensure_critic(PipelineManifest& m, const RunConfig& cfg, const LoadedRun& run) {
    if (m.stage_done("critic")) return RiskCritic::load(m.path("critic.model"), *run.env);
    Rng rng = stage_rng(cfg, kCritic);
    RiskCritic critic = train_risk_critic(run.dataset, *run.task.policy, *run.env, cfg, rng);
    critic.save(m.path("critic.model"));
    m.record("critic", "critic.model");
    return critic;
}

EncoderEnsemble ensure_ensemble(PipelineManifest& m, const RunConfig& cfg, const LoadedRun& run) {
    if (m.stage_done("ensemble")) return EncoderEnsemble::load(m.path("ensemble.model"), *run.env);
    Rng rng = stage_rng(cfg, kEnsemble);
    EncoderEnsemble ens = train_ensemble(run.dataset, *run.env, cfg.ensemble_k, cfg, rng);
    ens.save(m.path("ensemble.model"));
    m.record("ensemble", "ensemble.model");
    return ens;
}

double resolve_delta(const RunConfig& cfg, const EncoderEnsemble& ens,
                     const TrajectoryDataset& dataset, const Env& env) {
    return cfg.delta_auto ? calibrate_delta(ens, dataset, env) : cfg.delta;
}

nlohmann::ordered_json trace_to_json(const CounterexampleTrace& t) {
    nlohmann::ordered_json j;
    j["nodes"] = t.nodes;
    j["probability"] = t.probability;
    j["node_predicates"] = t.node_predicates;
    j["node_risk"] = t.node_risk;
    return j;
}

}  // namespace

std::string default_formula_text(const RunConfig& cfg) {
    return "P>=" + format_double(cfg.pctl_p) + " [ !unsafe U goal ]";
}

void stage_train(PipelineManifest& m, const RunConfig& cfg) {
    const auto env = make_env(cfg);
    Rng rng = stage_rng(cfg, kTrain);
    const TrainedTaskPolicy tp = train_task_policy(*env, cfg.train_episodes, cfg, rng);
    save_task_policy(tp, *env, m.path("policy.model"));
    m.record("train", "policy.model");
}

void stage_dataset(PipelineManifest& m, const RunConfig& cfg) {
    LoadedRun run = load_core(m, cfg, false);
    Rng rng = stage_rng(cfg, kDataset);
    TrajectoryDataset ds = generate_dataset(*run.env, *run.task.policy, cfg.dataset_episodes, rng);
    ds.seed = cfg.seed;
    write_dataset(ds, m.path("dataset.txt"));
    m.record("dataset", "dataset.txt");
}

void stage_abstract(PipelineManifest& m, const RunConfig& cfg, const std::string& method) {
    LoadedRun run = load_core(m, cfg);
    const RiskCritic critic = ensure_critic(m, cfg, run);
    Rng rng = stage_rng(cfg, method == "tree" ? kClusterTree : kClusterKmeans);
    auto clusters = std::shared_ptr<const Clustering>(fit_clusters(run.dataset, method, cfg, rng));
    const PolicyGraph graph =
        build_graph(run.dataset, clusters, *run.task.policy, critic, *run.env, cfg.alpha_risk);
    export_graph_json(graph, m.path("graph_" + method + ".json"));
    export_graph_dot(graph, m.path("graph_" + method + ".dot"));
    m.record("abstract_" + method, "graph_" + method + ".json");
    if (method == cfg.cluster_method) m.record("abstract", "graph_" + method + ".json");
}

CheckStageOutcome stage_check(PipelineManifest& m, const RunConfig& cfg,
                              const std::string& formula_text) {
    m.require("abstract");
    PolicyGraph graph = load_graph_json(m.path("graph_" + cfg.cluster_method + ".json"));
    const auto formula =
        pctl::parse(formula_text.empty() ? default_formula_text(cfg) : formula_text);
    const CheckResult result = check(graph, formula);

    nlohmann::ordered_json j;
    j["formula"] = result.formula_text;
    j["satisfied"] = result.satisfied;
    j["node_probabilities"] = result.node_probabilities;
    CheckStageOutcome outcome;
    outcome.satisfied = result.satisfied;
    const bool until_shape = formula->kind == pctl::Formula::Kind::Prob &&
                             formula->path.kind != pctl::PathFormula::Kind::Next;
    if (!result.satisfied && until_shape) {
        const CounterexampleResult ce =
            extract_counterexample(graph, formula, result, cfg.counterexample_k);
        outcome.goal_unreachable = ce.goal_unreachable;
        outcome.counterexample_found = !ce.traces.empty();
        j["goal_unreachable"] = ce.goal_unreachable;
        auto traces = nlohmann::ordered_json::array();
        for (const auto& t : ce.traces) traces.push_back(trace_to_json(t));
        j["counterexamples"] = traces;
        if (!ce.traces.empty()) {
            graph.counterexample = ce.traces.front().nodes;
            export_graph_dot(graph, m.path("graph_checked.dot"));
        }
    } else {
        j["goal_unreachable"] = false;
        j["counterexamples"] = nlohmann::ordered_json::array();
    }
    write_json(m.path("check.json"), j);
    m.record("check", "check.json");
    return outcome;
}

FalsifyStageOutcome stage_falsify(PipelineManifest& m, const RunConfig& cfg, bool compare) {
    m.require("check");
    LoadedRun run = load_core(m, cfg);
    const RiskCritic critic = ensure_critic(m, cfg, run);
    const EncoderEnsemble ensemble = ensure_ensemble(m, cfg, run);
    const PolicyGraph graph = load_graph_json(m.path("graph_" + cfg.cluster_method + ".json"));
    const auto check_json = read_json(m.path("check.json"));
    CheckResult result;
    result.satisfied = check_json.at("satisfied");
    result.node_probabilities = check_json.at("node_probabilities").get<std::vector<double>>();
    result.formula_text = check_json.at("formula");

    const double delta = resolve_delta(cfg, ensemble, run.dataset, *run.env);
    const FalsifyContext ctx{*run.env, *run.task.policy, run.task.q, critic, ensemble};
    const Strategy strategy = parse_strategy(cfg.strategy);
    const auto seeds = select_seeds(strategy, ctx, graph, result, run.dataset, cfg.n_seeds);
    const std::uint64_t campaign_seed = Rng(cfg.seed).fork(kCampaign).next_u64();
    const CampaignResult campaign = run_campaign(ctx, seeds, cfg, delta, strategy, campaign_seed);

    nlohmann::ordered_json j;
    j["strategy"] = cfg.strategy;
    j["delta"] = delta;
    j["campaign_seed"] = campaign_seed;
    j["seeds"] = seeds;
    j["result"] = campaign_to_json(campaign, cfg.timings);
    write_json(m.path("campaign.json"), j);
    m.record("falsify", "campaign.json");
    if (cfg.timings)
        std::fprintf(stderr, "[falsify] wall time %.2fs\n", campaign.wall_time_seconds);

    if (compare) {
        const std::vector<Strategy> all{Strategy::Combined, Strategy::UncertaintyOnly,
                                        Strategy::RiskOnly};
        const auto rows = compare_strategies(ctx, graph, result, run.dataset, all, 1, cfg, delta,
                                             campaign_seed);
        auto table = nlohmann::ordered_json::array();
        for (const auto& r : rows) {
            nlohmann::ordered_json rj;
            rj["strategy"] = r.strategy;
            rj["repeat"] = r.repeat;
            rj["violations"] = r.violations;
            rj["episodes_to_first"] =
                r.episodes_to_first ? nlohmann::ordered_json(*r.episodes_to_first)
                                    : nlohmann::ordered_json(nullptr);
            rj["episodes_used"] = r.episodes_used;
            rj["diversity"] = r.diversity;
            rj["novelty"] = r.novelty;
            if (cfg.timings) rj["wall_time_seconds"] = r.wall_time_seconds;
            table.push_back(rj);
        }
        write_json(m.path("strategy_table.json"), table);
        m.record("compare", "strategy_table.json");
    }

    FalsifyStageOutcome outcome;
    outcome.violations = static_cast<int>(campaign.violations.size());
    outcome.episodes_to_first = campaign.episodes_to_first;
    return outcome;
}

ShieldStageOutcome stage_shield(PipelineManifest& m, const RunConfig& cfg) {
    m.require("falsify");
    LoadedRun run = load_core(m, cfg);
    const RiskCritic critic = ensure_critic(m, cfg, run);
    const EncoderEnsemble ensemble = ensure_ensemble(m, cfg, run);

    Rng adv_rng = stage_rng(cfg, kAdversary);
    std::shared_ptr<const Policy> adversary(train_adversary(*run.env, cfg, adv_rng));
    Rng safe_rng = stage_rng(cfg, kSafePolicy);
    std::shared_ptr<const Policy> safe(
        train_safe_policy(*run.env, *adversary, run.dataset, cfg, safe_rng));

    ModelFile shield_model;
    shield_model.set_meta("kind", "shield");
    shield_model.set_meta("epsilon", format_double(cfg.shield_epsilon));
    {
        ModelFile adv_mf;
        adversary->save_into(adv_mf);
        for (auto& [name, net] : adv_mf.mlps) shield_model.mlps.emplace_back("adv_" + name, net);
        for (auto& [k, v] : adv_mf.meta) shield_model.set_meta("adv." + k, v);
        ModelFile safe_mf;
        safe->save_into(safe_mf);
        for (auto& [name, net] : safe_mf.mlps) shield_model.mlps.emplace_back("safe_" + name, net);
        for (auto& [k, v] : safe_mf.meta) shield_model.set_meta("safe." + k, v);
    }
    shield_model.save(m.path("shield.model"));

    std::shared_ptr<const Policy> task(run.task.policy->clone());
    auto critic_ptr = std::make_shared<const RiskCritic>(critic);
    const ShieldedPolicy shield(task, safe, critic_ptr, cfg.shield_epsilon);

    const double delta = resolve_delta(cfg, ensemble, run.dataset, *run.env);
    Rng reverify_rng = stage_rng(cfg, kReverify);
    const ShieldedRun shielded = reverify_shielded(*run.env, shield, run.task.q, critic, ensemble,
                                                   pctl::parse(default_formula_text(cfg)), cfg,
                                                   delta, reverify_rng);

    write_dataset(shielded.data.dataset, m.path("dataset_shielded.txt"));
    export_graph_json(shielded.graph, m.path("graph_shielded.json"));
    export_graph_dot(shielded.graph, m.path("graph_shielded.dot"));
    write_json(m.path("interventions.json"), intervention_log_to_json(shielded.data.log));
    nlohmann::ordered_json cj;
    cj["formula"] = shielded.check_result.formula_text;
    cj["satisfied"] = shielded.check_result.satisfied;
    cj["node_probabilities"] = shielded.check_result.node_probabilities;
    write_json(m.path("check_shielded.json"), cj);
    write_json(m.path("campaign_shielded.json"), campaign_to_json(shielded.campaign, cfg.timings));

    const auto unshielded = read_json(m.path("campaign.json"));
    ShieldStageOutcome outcome;
    outcome.unshielded_violations =
        static_cast<int>(unshielded.at("result").at("violations").size());
    outcome.shielded_violations = static_cast<int>(shielded.campaign.violations.size());
    outcome.shielded_check_satisfied = shielded.check_result.satisfied;

    nlohmann::ordered_json comparison;
    comparison["unshielded_violations"] = outcome.unshielded_violations;
    comparison["shielded_violations"] = outcome.shielded_violations;
    comparison["shielded_check_satisfied"] = outcome.shielded_check_satisfied;
    comparison["interventions"] = shielded.data.log.size();
    write_json(m.path("shield_comparison.json"), comparison);
    m.record("shield", "shield_comparison.json");
    return outcome;
}

void stage_evaluate(PipelineManifest& m, const RunConfig& cfg) {
    m.require("check");
    ReportInputs inputs;
    inputs.run_id = m.run_id();
    inputs.config_snapshot = m.config_snapshot();
    inputs.check = read_json(m.path("check.json"));
    if (m.stage_done("falsify")) inputs.campaign = read_json(m.path("campaign.json"));
    if (m.stage_done("compare")) inputs.strategy_table = read_json(m.path("strategy_table.json"));
    if (m.stage_done("shield")) inputs.shield_comparison = read_json(m.path("shield_comparison.json"));

    if (m.stage_done("abstract_tree") && m.stage_done("abstract_kmeans")) {
        const PolicyGraph tree = load_graph_json(m.path("graph_tree.json"));
        const PolicyGraph kmeans = load_graph_json(m.path("graph_kmeans.json"));
        nlohmann::ordered_json f;
        f["tree"] = action_fidelity(tree);
        f["kmeans"] = action_fidelity(kmeans);
        inputs.fidelity = f;
    }

    if (cfg.env == "grid" && m.stage_done("falsify")) {
        LoadedRun run = load_core(m, cfg);
        const PolicyGraph graph = load_graph_json(m.path("graph_" + cfg.cluster_method + ".json"));
        const auto check_json = read_json(m.path("check.json"));
        CheckResult result;
        result.satisfied = check_json.at("satisfied");
        result.node_probabilities = check_json.at("node_probabilities").get<std::vector<double>>();
        const auto campaign_json = read_json(m.path("campaign.json"));
        const CampaignResult campaign = campaign_from_json(campaign_json.at("result"));
        std::vector<Vec> flagged;
        for (const auto& v : campaign.violations) flagged.push_back(v.flagged_state);
        const PacReport pac =
            pac_check(*run.env, *run.task.policy, graph, result, flagged, 0.1);
        nlohmann::ordered_json pj;
        pj["unsafe_starts"] = pac.unsafe_starts;
        pj["covered"] = pac.covered;
        pj["miss_rate"] = pac.miss_rate;
        pj["delta_claim"] = 0.1;
        pj["pass"] = pac.pass;
        inputs.pac = pj;
        write_json(m.path("pac.json"), pj);
    }

    const RunReport report = summarize_run(inputs);
    std::ofstream txt(m.path("report.txt"));
    txt << report.text;
    write_json(m.path("report.json"), report.json);
    m.record("evaluate", "report.json");
}

int run_pipeline(const RunConfig& cfg) {
    PipelineManifest m = PipelineManifest::create(cfg);
    stage_train(m, cfg);
    stage_dataset(m, cfg);
    stage_abstract(m, cfg, "tree");
    stage_abstract(m, cfg, "kmeans");
    const CheckStageOutcome checked = stage_check(m, cfg);

    bool any_violation = !checked.satisfied;
    // The checker settling the question skips falsification unless forced.
    const bool run_falsify = checked.satisfied || cfg.force_falsify;
    std::optional<FalsifyStageOutcome> falsified;
    if (run_falsify) {
        falsified = stage_falsify(m, cfg);
        any_violation = any_violation || falsified->violations > 0;
    }
    if (cfg.shield_enabled && falsified && cfg.env != "dose") {
        const ShieldStageOutcome shielded = stage_shield(m, cfg);
        any_violation = any_violation || shielded.shielded_violations > 0;
    }
    stage_evaluate(m, cfg);
    return any_violation ? 2 : 0;
}

namespace {

void section(std::string& text, const std::string& title) {
    text += "== " + title + " ==\n";
}

}  // namespace

RunReport summarize_run(const ReportInputs& inputs) {
    RunReport rep;
    nlohmann::ordered_json& j = rep.json;
    std::string& text = rep.text;

    j["run_id"] = inputs.run_id;
    text += "run: " + inputs.run_id + "\n";

    section(text, "verification");
    if (inputs.check) {
        const auto& c = *inputs.check;
        j["check"] = c;
        text += "formula: " + c.at("formula").get<std::string>() + "\n";
        text += std::string("verdict: ") +
                (c.at("satisfied").get<bool>() ? "satisfied" : "violated") + "\n";
        const auto& traces = c.at("counterexamples");
        if (!traces.empty()) {
            const auto& t = traces.front();
            text += "counterexample: nodes [";
            const auto nodes = t.at("nodes").get<std::vector<int>>();
            for (std::size_t i = 0; i < nodes.size(); ++i)
                text += (i ? " " : "") + std::to_string(nodes[i]);
            text += "] probability " + format_double(t.at("probability").get<double>()) + "\n";
        } else if (c.at("goal_unreachable").get<bool>()) {
            text += "counterexample: none (violation stems from goal unreachability)\n";
        } else {
            text += "counterexample: none\n";
        }
    } else {
        j["check"] = nullptr;
        text += "skipped\n";
    }

    section(text, "falsification");
    if (inputs.campaign) {
        const auto& c = *inputs.campaign;
        j["campaign"] = c;
        const auto& result = c.at("result");
        const std::size_t violations = result.at("violations").size();
        text += "strategy: " + c.at("strategy").get<std::string>() + "\n";
        text += "episodes: " + std::to_string(result.at("episodes_used").get<int>()) + "\n";
        text += "violations: " + std::to_string(violations) + "\n";
        if (!result.at("episodes_to_first").is_null())
            text += "episodes_to_first: " +
                    std::to_string(result.at("episodes_to_first").get<int>()) + "\n";
    } else {
        j["campaign"] = nullptr;
        text += "skipped\n";
    }

    section(text, "strategy comparison");
    if (inputs.strategy_table) {
        j["strategies"] = *inputs.strategy_table;
        for (const auto& row : *inputs.strategy_table) {
            text += row.at("strategy").get<std::string>() + ": violations " +
                    std::to_string(row.at("violations").get<int>()) + ", diversity " +
                    format_double(row.at("diversity").get<double>()) + ", novelty " +
                    format_double(row.at("novelty").get<double>()) + "\n";
        }
    } else {
        j["strategies"] = nullptr;
        text += "skipped\n";
    }

    section(text, "shield");
    if (inputs.shield_comparison) {
        j["shield"] = *inputs.shield_comparison;
        const auto& s = *inputs.shield_comparison;
        text += "violations unshielded -> shielded: " +
                std::to_string(s.at("unshielded_violations").get<int>()) + " -> " +
                std::to_string(s.at("shielded_violations").get<int>()) + "\n";
        text += std::string("shielded check: ") +
                (s.at("shielded_check_satisfied").get<bool>() ? "satisfied" : "violated") + "\n";
    } else {
        j["shield"] = nullptr;
        text += "skipped\n";
    }

    section(text, "abstraction fidelity");
    if (inputs.fidelity) {
        j["fidelity"] = *inputs.fidelity;
        text += "tree: " + format_double(inputs.fidelity->at("tree").get<double>()) + "\n";
        text += "kmeans: " + format_double(inputs.fidelity->at("kmeans").get<double>()) + "\n";
    } else {
        j["fidelity"] = nullptr;
        text += "skipped\n";
    }

    section(text, "pac check");
    if (inputs.pac) {
        j["pac"] = *inputs.pac;
        text += "miss_rate: " + format_double(inputs.pac->at("miss_rate").get<double>()) +
                " (claim " + format_double(inputs.pac->at("delta_claim").get<double>()) + ")\n";
        text += std::string("pass: ") + (inputs.pac->at("pass").get<bool>() ? "yes" : "no") + "\n";
    } else {
        j["pac"] = nullptr;
        text += "skipped\n";
    }

    return rep;
}

}  // namespace vfrl
