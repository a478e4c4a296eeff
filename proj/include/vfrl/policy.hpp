#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vfrl/env.hpp"
#include "vfrl/mlp.hpp"
#include "vfrl/model_io.hpp"

namespace vfrl {

// Scalar action-value approximator over (state, action-encoding) inputs.
// Arm encodings are cached from the environment at construction.
class QFunction {
public:
    QFunction() = default;
    QFunction(Mlp net, const Env& env);

    int arm_count() const { return static_cast<int>(arm_enc_.size()); }
    double value(const Vec& s, int arm) const;
    // Values for every arm; out is resized to arm_count().
    void values(const Vec& s, std::vector<double>& out) const;
    double max_value(const Vec& s) const;
    // Analytic gradient of Q(s, arm) w.r.t. the state coordinates.
    Vec state_gradient(const Vec& s, int arm) const;

    const Mlp& net() const { return net_; }
    Mlp& mutable_net() { return net_; }
    int state_dim() const { return state_dim_; }

    Vec assemble_input(const Vec& s, int arm) const;

private:
    Mlp net_;
    std::vector<Vec> arm_enc_;
    int state_dim_ = 0;
};

// The task (and shield) policies all expose a probability vector over the
// arm set; greedy selection breaks ties toward the lowest arm index.
class Policy {
public:
    virtual ~Policy() = default;
    virtual int arm_count() const = 0;
    virtual void dist(const Vec& s, std::vector<double>& p) const = 0;
    virtual std::unique_ptr<Policy> clone() const = 0;
    virtual std::string kind() const = 0;
    virtual void save_into(ModelFile& mf) const = 0;

    virtual int greedy(const Vec& s) const;
    virtual int sample(const Vec& s, Rng& rng) const;
};

class SoftmaxQPolicy : public Policy {
public:
    SoftmaxQPolicy(QFunction q, double tau) : q_(std::move(q)), tau_(tau) {}
    int arm_count() const override { return q_.arm_count(); }
    void dist(const Vec& s, std::vector<double>& p) const override;
    int greedy(const Vec& s) const override;  // argmax Q directly
    std::unique_ptr<Policy> clone() const override { return std::make_unique<SoftmaxQPolicy>(*this); }
    std::string kind() const override { return "softmax_q"; }
    void save_into(ModelFile& mf) const override;
    const QFunction& q() const { return q_; }
    double tau() const { return tau_; }

private:
    QFunction q_;
    double tau_;
};

class GreedyQPolicy : public Policy {
public:
    explicit GreedyQPolicy(QFunction q) : q_(std::move(q)) {}
    int arm_count() const override { return q_.arm_count(); }
    void dist(const Vec& s, std::vector<double>& p) const override;
    int greedy(const Vec& s) const override;
    std::unique_ptr<Policy> clone() const override { return std::make_unique<GreedyQPolicy>(*this); }
    std::string kind() const override { return "greedy_q"; }
    void save_into(ModelFile& mf) const override;
    const QFunction& q() const { return q_; }

private:
    QFunction q_;
};

// Deterministic per-cell arm table for the tabular gridworld.
class TabularPolicy : public Policy {
public:
    TabularPolicy(std::vector<int> arms_by_cell, int arm_count, int grid_size)
        : table_(std::move(arms_by_cell)), arms_(arm_count), n_(grid_size) {}
    int arm_count() const override { return arms_; }
    void dist(const Vec& s, std::vector<double>& p) const override;
    int greedy(const Vec& s) const override;
    std::unique_ptr<Policy> clone() const override { return std::make_unique<TabularPolicy>(*this); }
    std::string kind() const override { return "tabular"; }
    void save_into(ModelFile& mf) const override;

private:
    int cell_of(const Vec& s) const;
    std::vector<int> table_;
    int arms_;
    int n_;
};

// Softmax over a dedicated logits head; used by the shield's safe policy.
class LogitsPolicy : public Policy {
public:
    explicit LogitsPolicy(Mlp head) : head_(std::move(head)) {}
    int arm_count() const override { return static_cast<int>(head_.output_dim()); }
    void dist(const Vec& s, std::vector<double>& p) const override;
    std::unique_ptr<Policy> clone() const override { return std::make_unique<LogitsPolicy>(*this); }
    std::string kind() const override { return "logits"; }
    void save_into(ModelFile& mf) const override;
    const Mlp& head() const { return head_; }
    Mlp& mutable_head() { return head_; }

private:
    Mlp head_;
};

class UniformPolicy : public Policy {
public:
    explicit UniformPolicy(int arms) : arms_(arms) {}
    int arm_count() const override { return arms_; }
    void dist(const Vec& s, std::vector<double>& p) const override;
    std::unique_ptr<Policy> clone() const override { return std::make_unique<UniformPolicy>(*this); }
    std::string kind() const override { return "uniform"; }
    void save_into(ModelFile& mf) const override;

private:
    int arms_;
};

std::unique_ptr<Policy> load_policy(const ModelFile& mf, const Env& env);

struct TrainedTaskPolicy {
    std::unique_ptr<Policy> policy;
    QFunction q;
};

// Fitted Q-iteration over the discretized arm set (exact value iteration on
// the tabular gridworld). The returned policy is the softmax (resp. tabular)
// policy over the returned Q function.
TrainedTaskPolicy train_task_policy(const Env& env, int episodes, const RunConfig& cfg, Rng& rng);

TrajectoryDataset generate_dataset(const Env& env, const Policy& policy, int episodes, Rng& rng);

// Fraction of `episodes` seeded evaluation episodes that reach the goal.
double evaluate_goal_rate(const Env& env, const Policy& policy, int episodes, Rng& rng);
// Mean summed safety cost per episode.
double evaluate_mean_cost(const Env& env, const Policy& policy, int episodes,
                          const CostChannel& channel, Rng& rng);

void save_task_policy(const TrainedTaskPolicy& tp, const Env& env, const std::string& path);
TrainedTaskPolicy load_task_policy(const std::string& path, const Env& env);

}  // namespace vfrl
