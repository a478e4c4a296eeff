#pragma once

#include <optional>

#include "vfrl/checker.hpp"
#include "vfrl/critic.hpp"
#include "vfrl/ensemble.hpp"

namespace vfrl {

// combined: risk-ranked seeds, mutation gated on low uncertainty.
// uncertainty_only: highest-uncertainty dataset seeds, no mutation.
// risk_only: highest-risk dataset seeds, mutation every step (fuzz-style).
enum class Strategy { Combined, UncertaintyOnly, RiskOnly };
Strategy parse_strategy(const std::string& name);
std::string strategy_name(Strategy s);

struct TrajStep {
    Vec s;
    int arm = 0;
    double reward = 0.0;
    double cost = 0.0;      // scalar via the configured cost channel
    int mutations = 0;      // mutations applied before this step's action
};

struct ViolationReport {
    int episode_index = 0;  // rng stream id within the campaign
    Vec seed_state;
    std::vector<TrajStep> trajectory;  // executed env steps before the flag
    Vec flagged_state;
    int flagged_arm = 0;
    double risk_value = 0.0;
    int mutation_count = 0;      // total mutations applied in the episode
    bool mutated_origin = false;  // flagged state produced by mutation, not dynamics
    std::string source = "falsifier";
    Vec latent;  // mean ensemble embedding over the episode's (s, a) pairs
};

struct CampaignResult {
    std::vector<ViolationReport> violations;
    int episodes_used = 0;
    std::optional<int> episodes_to_first;  // 1-based episode of the first violation
    double wall_time_seconds = 0.0;  // reported on the console; artifacts stay time-free
};

struct FalsifyContext {
    const Env& env;
    const Policy& policy;
    const QFunction& q;
    const RiskCritic& critic;
    const EncoderEnsemble& ensemble;
};

// One TD-error gradient step on the state (target treated as constant),
// clipped to the environment bounds. The next state comes from a noise-free
// probe of a cloned environment. Non-finite gradients leave the state
// unchanged with a warning.
Vec mutate(const Vec& state, const Policy& policy, const QFunction& q, const Env& env,
           double alpha_mut);

// Runs one falsification episode per seed (at most `budget` episodes). Every
// episode draws from its own stream fork(campaign_seed, episode_index), which
// is what makes violation reports replayable.
CampaignResult run_campaign(const FalsifyContext& ctx, const std::vector<Vec>& seeds,
                            const RunConfig& cfg, double delta, Strategy strategy,
                            std::uint64_t campaign_seed);

// Re-simulates the reported episode and checks that the flagged pair and its
// risk value reproduce exactly.
bool replay_violation(const FalsifyContext& ctx, const RunConfig& cfg, double delta,
                      Strategy strategy, std::uint64_t campaign_seed, const ViolationReport& report);

// Seed selection per strategy (combined uses the checker's risk ranking).
std::vector<Vec> select_seeds(Strategy strategy, const FalsifyContext& ctx,
                              const PolicyGraph& graph, const CheckResult& result,
                              const TrajectoryDataset& dataset, int n);

struct StrategyRow {
    std::string strategy;
    int repeat = 0;
    int violations = 0;
    std::optional<int> episodes_to_first;
    int episodes_used = 0;
    double diversity = 0.0;
    double novelty = 0.0;
    double wall_time_seconds = 0.0;
};

// Runs each strategy `repeats` times under an identical budget and reports
// violation counts, first-violation episodes and the latent-space metrics.
std::vector<StrategyRow> compare_strategies(const FalsifyContext& ctx, const PolicyGraph& graph,
                                            const CheckResult& result,
                                            const TrajectoryDataset& dataset,
                                            const std::vector<Strategy>& strategies, int repeats,
                                            const RunConfig& cfg, double delta,
                                            std::uint64_t base_seed);

nlohmann::ordered_json campaign_to_json(const CampaignResult& campaign, bool include_timings);
CampaignResult campaign_from_json(const nlohmann::ordered_json& j);

}  // namespace vfrl
