#pragma once

#include "vfrl/policy.hpp"

namespace vfrl {

// Estimator of the expected discounted cumulative safety cost of acting from
// (s, a) and following the task policy afterwards.
class RiskCritic {
public:
    RiskCritic() = default;
    RiskCritic(QFunction q, double gamma_risk, std::string trained_on)
        : q_(std::move(q)), gamma_risk_(gamma_risk), trained_on_(std::move(trained_on)) {}

    double risk(const Vec& s, int arm) const { return q_.value(s, arm); }
    double risk_encoded(const Vec& s, const Vec& action_enc) const;
    const QFunction& q() const { return q_; }
    double gamma_risk() const { return gamma_risk_; }
    const std::string& trained_on() const { return trained_on_; }

    void save(const std::string& path) const;
    static RiskCritic load(const std::string& path, const Env& env);

private:
    QFunction q_;
    double gamma_risk_ = 0.99;
    std::string trained_on_;
};

// TD training on the offline dataset. The bootstrap expectation over the
// next action is taken exactly over the arm set weighted by the policy
// distribution; terminal records use the bare cost as target. Stops early
// once the held-out TD residual drops below cfg.critic_tol.
RiskCritic train_risk_critic(const TrajectoryDataset& dataset, const Policy& policy,
                             const Env& env, const RunConfig& cfg, Rng& rng);

// Strict threshold test: true iff risk(s, a) > alpha_risk.
bool is_violation(const RiskCritic& critic, const Vec& s, int arm, double alpha_risk);

}  // namespace vfrl
