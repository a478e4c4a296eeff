#include "vfrl/critic.hpp"

#include <algorithm>
#include <cmath>

namespace vfrl {

double RiskCritic::risk_encoded(const Vec& s, const Vec& action_enc) const {
    Vec x;
    x.reserve(s.size() + action_enc.size());
    x.insert(x.end(), s.begin(), s.end());
    x.insert(x.end(), action_enc.begin(), action_enc.end());
    return q_.net().scalar(x);
}

void RiskCritic::save(const std::string& path) const {
    ModelFile mf;
    mf.set_meta("kind", "risk_critic");
    mf.set_meta("gamma_risk", format_double(gamma_risk_));
    mf.set_meta("trained_on", trained_on_);
    mf.mlps.emplace_back("critic", q_.net());
    mf.save(path);
}

RiskCritic RiskCritic::load(const std::string& path, const Env& env) {
    const ModelFile mf = ModelFile::load(path);
    return RiskCritic(QFunction(mf.mlp("critic"), env), std::stod(mf.meta_at("gamma_risk")),
                      mf.meta_or("trained_on", ""));
}

bool is_violation(const RiskCritic& critic, const Vec& s, int arm, double alpha_risk) {
    if (!(alpha_risk >= 0.0)) throw Error("alpha_risk must be >= 0");
    return critic.risk(s, arm) > alpha_risk;
}

RiskCritic train_risk_critic(const TrajectoryDataset& dataset, const Policy& policy,
                             const Env& env, const RunConfig& cfg, Rng& rng) {
    if (dataset.transitions.empty()) throw Error("train_risk_critic: dataset is empty");
    const double gr = cfg.gamma_risk;
    const std::size_t n = dataset.transitions.size();

    Mlp net({static_cast<std::size_t>(env.spec().state_dim + env.encoding_dim()), 32, 32, 1}, rng);
    QFunction q(std::move(net), env);

    // Policy distributions at the successor states are fixed throughout.
    std::vector<std::vector<double>> next_dist(n);
    std::vector<Vec> inputs(n);
    std::vector<double> costs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Transition& t = dataset.transitions[i];
        inputs[i] = t.s;
        const Vec enc = env.encode_action(t.a);
        inputs[i].insert(inputs[i].end(), enc.begin(), enc.end());
        costs[i] = cfg.cost_channel.scalar(t.c);
        if (!t.done) policy.dist(t.s_next, next_dist[i]);
    }

    // Every tenth record is held out to measure the post-training residual.
    std::vector<std::size_t> train_ids, holdout_ids;
    for (std::size_t i = 0; i < n; ++i) (i % 10 == 9 ? holdout_ids : train_ids).push_back(i);
    if (train_ids.empty()) train_ids = holdout_ids;

    const int batch = 64;
    const int max_epochs = 40;
    Adam opt(q.mutable_net(), 2e-3);
    Mlp::Workspace ws = q.net().make_workspace();
    Mlp::ParamBuf grad = q.net().make_param_buf();
    std::vector<double> targets(n, 0.0);
    std::vector<double> qvals;
    long grad_steps = 0;
    QFunction frozen = q;
    long last_refresh = -1000;

    auto refresh_targets = [&]() {
        frozen = q;
        for (std::size_t i = 0; i < n; ++i) {
            const Transition& t = dataset.transitions[i];
            double target = costs[i];
            if (!t.done) {
                frozen.values(t.s_next, qvals);
                double expect = 0.0;
                for (std::size_t a = 0; a < qvals.size(); ++a) expect += next_dist[i][a] * qvals[a];
                target += gr * expect;
            }
            targets[i] = target;
        }
        last_refresh = grad_steps;
    };

    auto holdout_residual = [&]() {
        double mse = 0.0;
        for (std::size_t i : holdout_ids) {
            q.net().forward(inputs[i], ws);
            const double err = ws.output()[0] - targets[i];
            mse += err * err;
        }
        return holdout_ids.empty() ? 0.0 : mse / static_cast<double>(holdout_ids.size());
    };

    refresh_targets();
    std::vector<std::size_t> order = train_ids;
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(static_cast<int>(i))]);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            if (grad_steps - last_refresh >= 100) refresh_targets();
            const std::size_t stop = std::min(order.size(), start + batch);
            grad.zero();
            double loss = 0.0;
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t i = order[k];
                q.net().forward(inputs[i], ws);
                const double err = ws.output()[0] - targets[i];
                loss += err * err;
                const double g[1] = {2.0 * err / static_cast<double>(stop - start)};
                q.net().backward(ws, std::span<const double>(g, 1), &grad, nullptr);
            }
            if (!std::isfinite(loss))
                throw Error("risk critic training diverged at iteration " + std::to_string(grad_steps));
            opt.step(q.mutable_net(), grad);
            ++grad_steps;
        }
        refresh_targets();
        if (epoch >= 4 && holdout_residual() < cfg.critic_tol) break;
    }

    return RiskCritic(std::move(q), gr, dataset.source_policy_id);
}

}  // namespace vfrl
