#include <algorithm>
#include <cmath>

#include "vfrl/policy.hpp"

namespace vfrl {

namespace {

struct Sample {
    Vec s;
    int arm;
    Vec s_next;
    double r;
    bool done;
};

// Exact value iteration for the enumerable gridworld; returns per-cell greedy
// arms and the converged Q table.
TrainedTaskPolicy train_grid(const GridEnv& env, const RunConfig& cfg, Rng& rng) {
    const auto states = env.enumerate_states();
    const int arms = env.arm_count();
    const int n = GridEnv::kSize;
    std::vector<double> q(states.size() * arms, 0.0);
    auto idx = [&](const Vec& s) {
        return static_cast<std::size_t>(std::lround(s[0])) * n +
               static_cast<std::size_t>(std::lround(s[1]));
    };
    for (int it = 0; it < 500; ++it) {
        double change = 0.0;
        for (std::size_t si = 0; si < states.size(); ++si) {
            for (int a = 0; a < arms; ++a) {
                const StepResult r = env.step_mean(states[si], a);
                double target = r.reward;
                if (!r.done) {
                    const std::size_t ni = idx(r.s_next);
                    double best = q[ni * arms];
                    for (int b = 1; b < arms; ++b) best = std::max(best, q[ni * arms + b]);
                    target += env.spec().gamma * best;
                }
                change = std::max(change, std::fabs(q[si * arms + a] - target));
                q[si * arms + a] = target;
            }
        }
        if (change < 1e-12) break;
    }
    std::vector<int> table(states.size(), 0);
    for (std::size_t si = 0; si < states.size(); ++si) {
        int best = 0;
        for (int a = 1; a < arms; ++a)
            if (q[si * arms + a] > q[si * arms + best]) best = a;
        table[si] = best;
    }

    // Fit a small network to the tabular values so gradient-based operators
    // have something differentiable to work with.
    Mlp net({static_cast<std::size_t>(env.spec().state_dim + env.encoding_dim()), 32, 32, 1}, rng);
    QFunction qf(std::move(net), env);
    Adam opt(qf.mutable_net(), 3e-3);
    Mlp::Workspace ws = qf.net().make_workspace();
    Mlp::ParamBuf grad = qf.net().make_param_buf();
    for (int epoch = 0; epoch < 400; ++epoch) {
        grad.zero();
        double loss = 0.0;
        for (std::size_t si = 0; si < states.size(); ++si)
            for (int a = 0; a < arms; ++a) {
                const Vec x = qf.assemble_input(states[si], a);
                qf.net().forward(x, ws);
                const double err = ws.output()[0] - q[si * arms + a];
                loss += err * err;
                const double g[1] = {2.0 * err / static_cast<double>(states.size() * arms)};
                qf.net().backward(ws, std::span<const double>(g, 1), &grad, nullptr);
            }
        if (!std::isfinite(loss))
            throw Error("task policy training diverged at iteration " + std::to_string(epoch));
        opt.step(qf.mutable_net(), grad);
    }
    (void)cfg;
    TrainedTaskPolicy out;
    out.policy = std::make_unique<TabularPolicy>(std::move(table), arms, n);
    out.q = std::move(qf);
    return out;
}

}  // namespace

TrainedTaskPolicy train_task_policy(const Env& env, int episodes, const RunConfig& cfg, Rng& rng) {
    if (episodes < 1) throw Error("train_task_policy: episodes must be >= 1");
    if (const auto* grid = dynamic_cast<const GridEnv*>(&env)) return train_grid(*grid, cfg, rng);

    const int arms = env.arm_count();
    const double gamma = env.spec().gamma;
    Mlp net({static_cast<std::size_t>(env.spec().state_dim + env.encoding_dim()), 32, 32, 1}, rng);
    QFunction q(std::move(net), env);

    std::vector<Sample> replay;
    replay.reserve(static_cast<std::size_t>(episodes) * env.spec().horizon);

    const int rounds = std::min(6, episodes);
    EnvSession session(env);
    std::vector<double> qvals;
    long grad_steps = 0;

    Adam opt(q.mutable_net(), 1e-3);
    Mlp::Workspace ws = q.net().make_workspace();
    Mlp::ParamBuf grad = q.net().make_param_buf();

    // One fitted-Q iteration: freeze targets, then minibatch Adam epochs on
    // the squared Bellman residual.
    auto fit_iteration = [&](int epochs) {
        const QFunction frozen = q;
        std::vector<double> target(replay.size());
        for (std::size_t i = 0; i < replay.size(); ++i) {
            const Sample& smp = replay[i];
            target[i] = smp.r + (smp.done ? 0.0 : gamma * frozen.max_value(smp.s_next));
        }
        std::vector<std::size_t> order(replay.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        const int batch = 64;
        for (int epoch = 0; epoch < epochs; ++epoch) {
            // Fisher-Yates shuffle with the run's generator.
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[rng.uniform_int(static_cast<int>(i))]);
            for (std::size_t start = 0; start + 1 < order.size(); start += batch) {
                const std::size_t stop = std::min(order.size(), start + batch);
                grad.zero();
                double loss = 0.0;
                for (std::size_t k = start; k < stop; ++k) {
                    const Sample& smp = replay[order[k]];
                    const Vec x = q.assemble_input(smp.s, smp.arm);
                    q.net().forward(x, ws);
                    const double err = ws.output()[0] - target[order[k]];
                    loss += err * err;
                    const double g[1] = {2.0 * err / static_cast<double>(stop - start)};
                    q.net().backward(ws, std::span<const double>(g, 1), &grad, nullptr);
                }
                if (!std::isfinite(loss))
                    throw Error("task policy training diverged at iteration " +
                                std::to_string(grad_steps));
                opt.step(q.mutable_net(), grad);
                ++grad_steps;
            }
        }
    };

    for (int round = 0; round < rounds; ++round) {
        // Collection: epsilon-greedy over the current Q, annealed per round;
        // exploring starts every other episode for state coverage.
        const double eps = 1.0 - (1.0 - 0.2) * (static_cast<double>(round) / std::max(1, rounds - 1));
        const int eps_budget = episodes / rounds + (round < episodes % rounds ? 1 : 0);
        for (int e = 0; e < eps_budget; ++e) {
            if (e % 2 == 0) {
                session.reset(rng);
            } else {
                session.set_state(env.sample_explore(rng));
            }
            while (!session.done()) {
                const Vec s = session.state();
                int arm;
                if (rng.uniform01() < eps) {
                    arm = rng.uniform_int(arms);
                } else {
                    q.values(s, qvals);
                    arm = static_cast<int>(std::max_element(qvals.begin(), qvals.end()) -
                                           qvals.begin());
                }
                const StepResult r = session.step(arm, rng);
                replay.push_back({s, arm, r.s_next, r.reward, r.done});
            }
        }
        fit_iteration(2);
        fit_iteration(2);
    }

    TrainedTaskPolicy out;
    out.policy = std::make_unique<SoftmaxQPolicy>(q, cfg.tau);
    out.q = std::move(q);
    return out;
}

TrajectoryDataset generate_dataset(const Env& env, const Policy& policy, int episodes, Rng& rng) {
    TrajectoryDataset ds;
    ds.state_dim = env.spec().state_dim;
    ds.action_dim = env.spec().action_space.dim();
    ds.discrete_actions = env.spec().action_space.discrete;
    ds.cost_dim = env.spec().cost_dim();
    ds.source_policy_id = env.name() + "/" + policy.kind();
    EnvSession session(env);
    for (int e = 0; e < episodes; ++e) {
        session.reset_dataset(rng);
        std::vector<Transition> episode;
        while (!session.done()) {
            Transition t;
            t.s = session.state();
            const int arm = policy.sample(t.s, rng);
            t.a = env.arm_action(arm);
            const StepResult r = session.step(arm, rng);
            t.s_next = r.s_next;
            t.r = r.reward;
            t.c = r.cost;
            t.done = r.done;
            episode.push_back(std::move(t));
        }
        ds.append_episode(std::move(episode));
    }
    ds.validate(env.spec().horizon);
    return ds;
}

double evaluate_goal_rate(const Env& env, const Policy& policy, int episodes, Rng& rng) {
    EnvSession session(env);
    int reached = 0;
    for (int e = 0; e < episodes; ++e) {
        session.reset(rng);
        while (!session.done()) {
            const int arm = policy.sample(session.state(), rng);
            session.step(arm, rng);
        }
        if (env.goal(session.state())) ++reached;
    }
    return static_cast<double>(reached) / episodes;
}

double evaluate_mean_cost(const Env& env, const Policy& policy, int episodes,
                          const CostChannel& channel, Rng& rng) {
    EnvSession session(env);
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        session.reset(rng);
        while (!session.done()) {
            const int arm = policy.sample(session.state(), rng);
            const StepResult r = session.step(arm, rng);
            total += channel.scalar(r.cost);
        }
    }
    return total / episodes;
}

void save_task_policy(const TrainedTaskPolicy& tp, const Env& env, const std::string& path) {
    ModelFile mf;
    mf.set_meta("env", env.name());
    tp.policy->save_into(mf);
    if (!mf.has_mlp("policy_q")) mf.mlps.emplace_back("q_fit", tp.q.net());
    mf.save(path);
}

TrainedTaskPolicy load_task_policy(const std::string& path, const Env& env) {
    const ModelFile mf = ModelFile::load(path);
    TrainedTaskPolicy out;
    out.policy = load_policy(mf, env);
    out.q = QFunction(mf.has_mlp("policy_q") ? mf.mlp("policy_q") : mf.mlp("q_fit"), env);
    return out;
}

}  // namespace vfrl
