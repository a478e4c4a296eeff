#pragma once

#include "vfrl/falsify.hpp"

namespace vfrl {

// Runtime monitor: overrides the task action with the safe policy's action
// whenever the risk critic scores the task action strictly above epsilon.
class ShieldedPolicy : public Policy {
public:
    ShieldedPolicy(std::shared_ptr<const Policy> task, std::shared_ptr<const Policy> safe,
                   std::shared_ptr<const RiskCritic> critic, double epsilon)
        : task_(std::move(task)), safe_(std::move(safe)), critic_(std::move(critic)),
          epsilon_(epsilon) {}

    int arm_count() const override { return task_->arm_count(); }
    // Exact mixture distribution implied by the two-draw sampling scheme.
    void dist(const Vec& s, std::vector<double>& p) const override;
    int greedy(const Vec& s) const override;
    int sample(const Vec& s, Rng& rng) const override;
    std::unique_ptr<Policy> clone() const override { return std::make_unique<ShieldedPolicy>(*this); }
    std::string kind() const override { return "shielded"; }
    void save_into(ModelFile& mf) const override;

    bool intervenes(const Vec& s, int task_arm) const {
        return critic_->risk(s, task_arm) > epsilon_;
    }
    double epsilon() const { return epsilon_; }
    const Policy& task() const { return *task_; }
    const Policy& safe() const { return *safe_; }

private:
    std::shared_ptr<const Policy> task_;
    std::shared_ptr<const Policy> safe_;
    std::shared_ptr<const RiskCritic> critic_;
    double epsilon_;
};

struct InterventionRecord {
    int episode = 0;
    int step = 0;
    Vec state;
    int task_arm = 0;
    int chosen_arm = 0;
    bool intervened = false;
};

// Adversarial policy: fitted Q-iteration with the (summed) safety cost as
// reward. Degenerates to a uniform-random policy, with a warning, when the
// environment produces no cost at all during training.
std::unique_ptr<Policy> train_adversary(const Env& env, const RunConfig& cfg, Rng& rng);

// Safe policy head trained by gradient ascent on the entropy-regularized
// divergence objective E_pi[-log pi_adv] + lambda * H(pi) over states drawn
// from the dataset and adversary rollouts. Adversary probabilities are
// floored at 1e-6 (then renormalized) before entering the objective.
struct SafePolicyTrainStats {
    std::vector<double> objective_per_epoch;  // non-decreasing (lr backoff on dips)
};
std::unique_ptr<Policy> train_safe_policy(const Env& env, const Policy& adversary,
                                          const TrajectoryDataset& dataset, const RunConfig& cfg,
                                          Rng& rng, SafePolicyTrainStats* stats = nullptr);

// Single shielded action: (chosen arm, decider) with decider "safety" when
// the shield intervened and "task" otherwise.
std::pair<int, std::string> shielded_action(const ShieldedPolicy& shield, const Vec& s, Rng& rng);

struct ShieldedDataset {
    TrajectoryDataset dataset;
    std::vector<int> deciders;  // per transition: 0 task, 1 safety
    std::vector<InterventionRecord> log;
};

// Fresh dataset rolled out under the shielded policy, with per-step decider
// labels and the intervention log.
ShieldedDataset generate_shielded_dataset(const Env& env, const ShieldedPolicy& shield,
                                          int episodes, Rng& rng);

struct ShieldedRun {
    ShieldedDataset data;
    PolicyGraph graph;
    CheckResult check_result;
    CampaignResult campaign;
};

// Re-verification under the shield: regenerate the dataset, rebuild the
// graph (edges labeled by majority decider), re-check and re-falsify with
// the original critic and ensemble for a like-for-like comparison.
ShieldedRun reverify_shielded(const Env& env, const ShieldedPolicy& shield, const QFunction& q,
                              const RiskCritic& critic, const EncoderEnsemble& ensemble,
                              const pctl::FormulaPtr& formula, const RunConfig& cfg, double delta,
                              Rng& rng);

nlohmann::ordered_json intervention_log_to_json(const std::vector<InterventionRecord>& log);

}  // namespace vfrl
