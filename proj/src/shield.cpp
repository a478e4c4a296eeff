#include "vfrl/shield.hpp"

#include <algorithm>
#include <cmath>

namespace vfrl {

void ShieldedPolicy::dist(const Vec& s, std::vector<double>& p) const {
    std::vector<double> task_p, safe_p;
    task_->dist(s, task_p);
    safe_->dist(s, safe_p);
    p.assign(task_p.size(), 0.0);
    double intervened_mass = 0.0;
    for (std::size_t a = 0; a < task_p.size(); ++a) {
        if (intervenes(s, static_cast<int>(a))) intervened_mass += task_p[a];
        else p[a] += task_p[a];
    }
    for (std::size_t a = 0; a < task_p.size(); ++a) p[a] += intervened_mass * safe_p[a];
}

int ShieldedPolicy::greedy(const Vec& s) const {
    const int task_arm = task_->greedy(s);
    return intervenes(s, task_arm) ? safe_->greedy(s) : task_arm;
}

int ShieldedPolicy::sample(const Vec& s, Rng& rng) const {
    const int task_arm = task_->sample(s, rng);
    return intervenes(s, task_arm) ? safe_->sample(s, rng) : task_arm;
}

void ShieldedPolicy::save_into(ModelFile& mf) const {
    mf.set_meta("policy.kind", "shielded");
    mf.set_meta("shield.epsilon", format_double(epsilon_));
}

std::pair<int, std::string> shielded_action(const ShieldedPolicy& shield, const Vec& s, Rng& rng) {
    const int task_arm = shield.task().sample(s, rng);
    if (shield.intervenes(s, task_arm)) return {shield.safe().sample(s, rng), "safety"};
    return {task_arm, "task"};
}

std::unique_ptr<Policy> train_adversary(const Env& env, const RunConfig& cfg, Rng& rng) {
    const int arms = env.arm_count();
    const double gamma = env.spec().gamma;
    Mlp net({static_cast<std::size_t>(env.spec().state_dim + env.encoding_dim()), 32, 32, 1}, rng);
    QFunction q(std::move(net), env);

    struct Sample {
        Vec s;
        int arm;
        Vec s_next;
        double c;
        bool done;
    };
    std::vector<Sample> replay;
    EnvSession session(env);
    std::vector<double> qvals;
    const int episodes = std::max(40, cfg.train_episodes / 4);
    const int rounds = 4;
    double total_cost = 0.0;
    long grad_steps = 0;

    for (int round = 0; round < rounds; ++round) {
        const double eps = 1.0 - 0.7 * (static_cast<double>(round) / (rounds - 1));
        for (int e = 0; e < episodes / rounds; ++e) {
            session.reset(rng);
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
                const double c = cfg.cost_channel.scalar(r.cost);
                total_cost += c;
                replay.push_back({s, arm, r.s_next, c, r.done});
            }
        }
        if (round == 0 && total_cost <= 0.0) continue;  // postpone fitting until cost is seen

        const QFunction frozen = q;
        std::vector<double> target(replay.size());
        for (std::size_t i = 0; i < replay.size(); ++i)
            target[i] = replay[i].c +
                        (replay[i].done ? 0.0 : gamma * frozen.max_value(replay[i].s_next));
        Adam opt(q.mutable_net(), 1e-3);
        Mlp::Workspace ws = q.net().make_workspace();
        Mlp::ParamBuf grad = q.net().make_param_buf();
        std::vector<std::size_t> order(replay.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (int epoch = 0; epoch < 3; ++epoch) {
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[rng.uniform_int(static_cast<int>(i))]);
            for (std::size_t start = 0; start + 1 < order.size(); start += 64) {
                const std::size_t stop = std::min(order.size(), start + 64);
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
                    throw Error("adversary training diverged at iteration " +
                                std::to_string(grad_steps));
                opt.step(q.mutable_net(), grad);
                ++grad_steps;
            }
        }
    }

    if (total_cost <= 0.0) {
        warn("train_adversary: environment produced no cost; returning uniform policy");
        return std::make_unique<UniformPolicy>(arms);
    }
    return std::make_unique<GreedyQPolicy>(std::move(q));
}

std::unique_ptr<Policy> train_safe_policy(const Env& env, const Policy& adversary,
                                          const TrajectoryDataset& dataset, const RunConfig& cfg,
                                          Rng& rng, SafePolicyTrainStats* stats) {
    const int arms = env.arm_count();
    const double lambda = cfg.shield_lambda;

    // Optimization states: dataset states plus adversary rollouts.
    std::vector<Vec> states;
    {
        const std::size_t stride = std::max<std::size_t>(1, dataset.transitions.size() / 1500);
        for (std::size_t i = 0; i < dataset.transitions.size(); i += stride)
            states.push_back(dataset.transitions[i].s);
        EnvSession session(env);
        for (int e = 0; e < 10; ++e) {
            session.reset(rng);
            while (!session.done()) {
                states.push_back(session.state());
                session.step(adversary.sample(session.state(), rng), rng);
            }
        }
    }

    // Floored and renormalized adversary distributions are fixed targets.
    std::vector<std::vector<double>> neg_log_adv(states.size());
    std::vector<double> adv_p;
    for (std::size_t i = 0; i < states.size(); ++i) {
        adversary.dist(states[i], adv_p);
        double sum = 0.0;
        for (double& v : adv_p) {
            v = std::max(v, 1e-6);
            sum += v;
        }
        neg_log_adv[i].resize(arms);
        for (int a = 0; a < arms; ++a) neg_log_adv[i][a] = -std::log(adv_p[a] / sum);
    }

    Mlp head({static_cast<std::size_t>(env.spec().state_dim), 32, static_cast<std::size_t>(arms)},
             rng);
    Mlp::Workspace ws = head.make_workspace();
    Mlp::ParamBuf grad = head.make_param_buf();

    auto objective_and_grad = [&](bool want_grad) {
        if (want_grad) grad.zero();
        double obj = 0.0;
        const double inv_n = 1.0 / static_cast<double>(states.size());
        std::vector<double> p(arms), g(arms);
        for (std::size_t i = 0; i < states.size(); ++i) {
            head.forward(states[i], ws);
            const auto logits = ws.output();
            double mx = logits[0];
            for (int a = 1; a < arms; ++a) mx = std::max(mx, logits[a]);
            double sum = 0.0;
            for (int a = 0; a < arms; ++a) {
                p[a] = std::exp(logits[a] - mx);
                sum += p[a];
            }
            double entropy = 0.0, cross = 0.0;
            for (int a = 0; a < arms; ++a) {
                p[a] /= sum;
                cross += p[a] * neg_log_adv[i][a];
                entropy -= p[a] * std::log(std::max(p[a], 1e-300));
            }
            obj += inv_n * (cross + lambda * entropy);
            if (!want_grad) continue;
            // Ascent direction through the softmax (negated for the
            // minimizing optimizer).
            double mean_f = 0.0;
            for (int a = 0; a < arms; ++a)
                mean_f += p[a] * (neg_log_adv[i][a] - lambda * (std::log(std::max(p[a], 1e-300)) + entropy));
            for (int a = 0; a < arms; ++a) {
                const double f =
                    neg_log_adv[i][a] - lambda * (std::log(std::max(p[a], 1e-300)) + entropy);
                g[a] = -inv_n * p[a] * (f - mean_f);
            }
            head.backward(ws, g, &grad, nullptr);
        }
        return obj;
    };

    double lr = 5e-3;
    double best = objective_and_grad(false);
    if (stats) stats->objective_per_epoch.push_back(best);
    for (int epoch = 0; epoch < 80; ++epoch) {
        const Mlp snapshot = head;
        Adam opt(head, lr);
        for (int it = 0; it < 10; ++it) {
            objective_and_grad(true);
            opt.step(head, grad);
        }
        const double obj = objective_and_grad(false);
        if (!std::isfinite(obj)) throw Error("safe policy training diverged");
        if (obj + 1e-12 < best) {
            head = snapshot;  // keep the objective non-decreasing across epochs
            lr *= 0.5;
            if (stats) stats->objective_per_epoch.push_back(best);
            if (lr < 1e-6) break;
            continue;
        }
        best = obj;
        if (stats) stats->objective_per_epoch.push_back(best);
    }
    return std::make_unique<LogitsPolicy>(std::move(head));
}

ShieldedDataset generate_shielded_dataset(const Env& env, const ShieldedPolicy& shield,
                                          int episodes, Rng& rng) {
    ShieldedDataset out;
    TrajectoryDataset& ds = out.dataset;
    ds.state_dim = env.spec().state_dim;
    ds.action_dim = env.spec().action_space.dim();
    ds.discrete_actions = env.spec().action_space.discrete;
    ds.cost_dim = env.spec().cost_dim();
    ds.source_policy_id = env.name() + "/shielded";
    EnvSession session(env);
    for (int e = 0; e < episodes; ++e) {
        session.reset_dataset(rng);
        std::vector<Transition> episode;
        int step = 0;
        while (!session.done()) {
            Transition t;
            t.s = session.state();
            const int task_arm = shield.task().sample(t.s, rng);
            const bool intervened = shield.intervenes(t.s, task_arm);
            const int arm = intervened ? shield.safe().sample(t.s, rng) : task_arm;
            out.log.push_back({e, step, t.s, task_arm, arm, intervened});
            out.deciders.push_back(intervened ? 1 : 0);
            t.a = env.arm_action(arm);
            const StepResult r = session.step(arm, rng);
            t.s_next = r.s_next;
            t.r = r.reward;
            t.c = r.cost;
            t.done = r.done;
            episode.push_back(std::move(t));
            ++step;
        }
        ds.append_episode(std::move(episode));
    }
    ds.validate(env.spec().horizon);
    return out;
}

ShieldedRun reverify_shielded(const Env& env, const ShieldedPolicy& shield, const QFunction& q,
                              const RiskCritic& critic, const EncoderEnsemble& ensemble,
                              const pctl::FormulaPtr& formula, const RunConfig& cfg, double delta,
                              Rng& rng) {
    ShieldedRun run;
    run.data = generate_shielded_dataset(env, shield, cfg.dataset_episodes, rng);
    auto clusters = std::shared_ptr<const Clustering>(
        fit_clusters(run.data.dataset, cfg.cluster_method, cfg, rng));
    run.graph = build_graph(run.data.dataset, clusters, shield, critic, env, cfg.alpha_risk,
                            &run.data.deciders);
    run.check_result = check(run.graph, formula);

    const FalsifyContext ctx{env, shield, q, critic, ensemble};
    const auto seeds = select_seeds(Strategy::Combined, ctx, run.graph, run.check_result,
                                    run.data.dataset, cfg.n_seeds);
    run.campaign = run_campaign(ctx, seeds, cfg, delta, Strategy::Combined, rng.next_u64());
    return run;
}

nlohmann::ordered_json intervention_log_to_json(const std::vector<InterventionRecord>& log) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : log) {
        nlohmann::ordered_json j;
        j["episode"] = r.episode;
        j["step"] = r.step;
        j["state"] = r.state;
        j["task_arm"] = r.task_arm;
        j["chosen_arm"] = r.chosen_arm;
        j["intervened"] = r.intervened;
        arr.push_back(j);
    }
    return arr;
}

}  // namespace vfrl
