#include "vfrl/falsify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "vfrl/kernels.hpp"
#include "vfrl/metrics.hpp"

namespace vfrl {

Strategy parse_strategy(const std::string& name) {
    if (name == "combined") return Strategy::Combined;
    if (name == "uncertainty") return Strategy::UncertaintyOnly;
    if (name == "fuzz") return Strategy::RiskOnly;
    throw Error("unknown strategy '" + name + "'");
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Combined: return "combined";
        case Strategy::UncertaintyOnly: return "uncertainty";
        case Strategy::RiskOnly: return "fuzz";
    }
    return "?";
}

Vec mutate(const Vec& state, const Policy& policy, const QFunction& q, const Env& env,
           double alpha_mut) {
    const int arm = policy.greedy(state);
    const StepResult probe = env.step_mean(state, arm);
    const double q_target =
        probe.reward + (probe.done ? 0.0 : env.spec().gamma * q.max_value(probe.s_next));
    const double q_sa = q.value(state, arm);
    const double td = q_target - q_sa;
    Vec grad = q.state_gradient(state, arm);
    // d/ds (target - Q(s,a))^2 with the target held constant.
    for (double& g : grad) g *= -2.0 * td;
    for (double g : grad)
        if (!std::isfinite(g)) {
            warn("mutate: non-finite gradient; state left unchanged");
            return state;
        }
    Vec next = state;
    kernels::axpy(next.size(), alpha_mut, grad.data(), next.data());
    return env.clip_state(std::move(next));
}

namespace {

bool seed_in_bounds(const Env& env, const Vec& seed) {
    if (static_cast<int>(seed.size()) != env.spec().state_dim) return false;
    for (double v : seed)
        if (!std::isfinite(v)) return false;
    return env.clip_state(seed) == seed;
}

// One falsification episode; deterministic given the episode rng stream.
std::optional<ViolationReport> run_episode(const FalsifyContext& ctx, const Env& env,
                                           const Vec& seed, int episode_index,
                                           const RunConfig& cfg, double delta, Strategy strategy,
                                           Rng ep_rng) {
    EnvSession session(env);
    session.set_state(seed);
    const bool mutates = strategy != Strategy::UncertaintyOnly;
    const double delta_eff =
        strategy == Strategy::RiskOnly ? std::numeric_limits<double>::infinity() : delta;

    std::vector<TrajStep> traj;
    std::vector<Vec> latent_acc;
    int mutation_total = 0;

    auto add_latent = [&](const Vec& s, int arm) {
        latent_acc.push_back(ctx.ensemble.mean_embed(s, ctx.ensemble.arm_encoding(arm)));
    };

    while (!session.done()) {
        Vec s = session.state();
        int arm = ctx.policy.sample(s, ep_rng);
        double u = ctx.ensemble.uncertainty(s, arm);
        int depth = 0;
        bool mutated_here = false;
        if (mutates) {
            while (u <= delta_eff && depth < cfg.depth_limit) {
                s = mutate(s, ctx.policy, ctx.q, env, cfg.alpha_mut);
                arm = ctx.policy.sample(s, ep_rng);
                u = ctx.ensemble.uncertainty(s, arm);
                ++depth;
                ++mutation_total;
                mutated_here = true;
            }
            if (mutated_here) session.override_state(s);
        }

        const double risk = ctx.critic.risk(s, arm);
        if (risk > cfg.alpha_risk) {
            add_latent(s, arm);
            ViolationReport rep;
            rep.episode_index = episode_index;
            rep.seed_state = seed;
            rep.trajectory = std::move(traj);
            rep.flagged_state = s;
            rep.flagged_arm = arm;
            rep.risk_value = risk;
            rep.mutation_count = mutation_total;
            rep.mutated_origin = mutated_here;
            rep.source = "falsifier";
            Vec latent(ctx.ensemble.dim(), 0.0);
            for (const Vec& z : latent_acc) kernels::axpy(latent.size(), 1.0, z.data(), latent.data());
            for (double& v : latent) v /= static_cast<double>(latent_acc.size());
            rep.latent = std::move(latent);
            return rep;
        }

        add_latent(s, arm);
        const StepResult r = session.step(arm, ep_rng);
        traj.push_back({s, arm, r.reward, cfg.cost_channel.scalar(r.cost), depth});
    }
    return std::nullopt;
}

}  // namespace

CampaignResult run_campaign(const FalsifyContext& ctx, const std::vector<Vec>& seeds,
                            const RunConfig& cfg, double delta, Strategy strategy,
                            std::uint64_t campaign_seed) {
    if (cfg.budget < 1) throw Error("run_campaign: budget must be >= 1");
    const auto started = std::chrono::steady_clock::now();

    std::vector<Vec> usable;
    for (const Vec& s : seeds) {
        if (seed_in_bounds(ctx.env, s)) {
            usable.push_back(s);
        } else {
            warn("run_campaign: seed outside env bounds skipped");
        }
    }
    const int episodes = std::min<int>(static_cast<int>(usable.size()), cfg.budget);

    std::vector<std::optional<ViolationReport>> results(episodes);
    const Rng base(campaign_seed);
    auto work = [&](int begin, int end) {
        const auto env = ctx.env.clone();
        for (int e = begin; e < end; ++e)
            results[e] = run_episode(ctx, *env, usable[e], e, cfg, delta, strategy,
                                     base.fork(static_cast<std::uint64_t>(e)));
    };
    const int workers = std::max(1, std::min(cfg.workers, episodes));
    if (workers == 1) {
        work(0, episodes);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (episodes + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int begin = w * chunk;
            const int end = std::min(episodes, begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
        for (auto& t : pool) t.join();
    }

    CampaignResult out;
    out.episodes_used = episodes;
    for (int e = 0; e < episodes; ++e) {
        if (!results[e]) continue;
        if (!out.episodes_to_first) out.episodes_to_first = e + 1;
        out.violations.push_back(std::move(*results[e]));
    }
    out.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

bool replay_violation(const FalsifyContext& ctx, const RunConfig& cfg, double delta,
                      Strategy strategy, std::uint64_t campaign_seed,
                      const ViolationReport& report) {
    const Rng base(campaign_seed);
    const auto env = ctx.env.clone();
    const auto rerun =
        run_episode(ctx, *env, report.seed_state, report.episode_index, cfg, delta, strategy,
                    base.fork(static_cast<std::uint64_t>(report.episode_index)));
    if (!rerun) return false;
    return rerun->flagged_state == report.flagged_state && rerun->flagged_arm == report.flagged_arm &&
           rerun->risk_value == report.risk_value && rerun->risk_value > cfg.alpha_risk;
}

std::vector<Vec> select_seeds(Strategy strategy, const FalsifyContext& ctx,
                              const PolicyGraph& graph, const CheckResult& result,
                              const TrajectoryDataset& dataset, int n) {
    if (strategy == Strategy::Combined) {
        std::vector<Vec> seeds;
        for (const auto& s : risk_ranked_states(graph, result, dataset, n)) seeds.push_back(s.state);
        return seeds;
    }
    // Baselines rank raw dataset states by their own criterion.
    struct Scored {
        double score;
        std::size_t index;
    };
    std::vector<Scored> scored;
    scored.reserve(dataset.transitions.size());
    for (std::size_t i = 0; i < dataset.transitions.size(); ++i) {
        const Vec& s = dataset.transitions[i].s;
        const int arm = ctx.policy.greedy(s);
        const double score = strategy == Strategy::UncertaintyOnly
                                 ? ctx.ensemble.uncertainty(s, arm)
                                 : ctx.critic.risk(s, arm);
        scored.push_back({score, i});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.index < b.index;
    });
    std::vector<Vec> seeds;
    std::set<Vec> seen;
    for (const auto& sc : scored) {
        if (static_cast<int>(seeds.size()) >= n) break;
        const Vec& s = dataset.transitions[sc.index].s;
        if (seen.insert(s).second) seeds.push_back(s);
    }
    return seeds;
}

std::vector<StrategyRow> compare_strategies(const FalsifyContext& ctx, const PolicyGraph& graph,
                                            const CheckResult& result,
                                            const TrajectoryDataset& dataset,
                                            const std::vector<Strategy>& strategies, int repeats,
                                            const RunConfig& cfg, double delta,
                                            std::uint64_t base_seed) {
    std::vector<Vec> dataset_embeddings = dataset_latents(ctx.ensemble, dataset, ctx.env);
    std::vector<StrategyRow> rows;
    for (std::size_t si = 0; si < strategies.size(); ++si) {
        const Strategy strategy = strategies[si];
        const auto seeds = select_seeds(strategy, ctx, graph, result, dataset, cfg.n_seeds);
        for (int rep = 0; rep < repeats; ++rep) {
            const std::uint64_t seed =
                Rng(base_seed).fork(1000 * (si + 1) + static_cast<std::uint64_t>(rep)).next_u64();
            const CampaignResult campaign = run_campaign(ctx, seeds, cfg, delta, strategy, seed);
            StrategyRow row;
            row.strategy = strategy_name(strategy);
            row.repeat = rep;
            row.violations = static_cast<int>(campaign.violations.size());
            row.episodes_to_first = campaign.episodes_to_first;
            row.episodes_used = campaign.episodes_used;
            row.wall_time_seconds = campaign.wall_time_seconds;
            if (campaign.violations.size() >= 2) {
                std::vector<LatentPoint> pts;
                for (const auto& v : campaign.violations)
                    pts.push_back({static_cast<int>(pts.size()), v.latent});
                row.diversity = diversity(pts);
            }
            if (!campaign.violations.empty() &&
                dataset_embeddings.size() > static_cast<std::size_t>(ctx.ensemble.dim())) {
                std::vector<LatentPoint> pts;
                for (const auto& v : campaign.violations)
                    pts.push_back({static_cast<int>(pts.size()), v.latent});
                row.novelty = novelty(pts, dataset_embeddings);
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

nlohmann::ordered_json campaign_to_json(const CampaignResult& campaign, bool include_timings) {
    nlohmann::ordered_json j;
    j["episodes_used"] = campaign.episodes_used;
    if (campaign.episodes_to_first) j["episodes_to_first"] = *campaign.episodes_to_first;
    else j["episodes_to_first"] = nullptr;
    if (include_timings) j["wall_time_seconds"] = campaign.wall_time_seconds;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& v : campaign.violations) {
        nlohmann::ordered_json vj;
        vj["episode_index"] = v.episode_index;
        vj["seed_state"] = v.seed_state;
        vj["flagged_state"] = v.flagged_state;
        vj["flagged_arm"] = v.flagged_arm;
        vj["risk_value"] = v.risk_value;
        vj["mutation_count"] = v.mutation_count;
        vj["mutated_origin"] = v.mutated_origin;
        vj["source"] = v.source;
        vj["latent"] = v.latent;
        auto steps = nlohmann::ordered_json::array();
        for (const auto& st : v.trajectory) {
            nlohmann::ordered_json sj;
            sj["s"] = st.s;
            sj["arm"] = st.arm;
            sj["reward"] = st.reward;
            sj["cost"] = st.cost;
            sj["mutations"] = st.mutations;
            steps.push_back(sj);
        }
        vj["trajectory"] = steps;
        arr.push_back(vj);
    }
    j["violations"] = arr;
    return j;
}

CampaignResult campaign_from_json(const nlohmann::ordered_json& j) {
    CampaignResult c;
    c.episodes_used = j.at("episodes_used");
    if (!j.at("episodes_to_first").is_null()) c.episodes_to_first = j.at("episodes_to_first").get<int>();
    if (j.contains("wall_time_seconds")) c.wall_time_seconds = j.at("wall_time_seconds");
    for (const auto& vj : j.at("violations")) {
        ViolationReport v;
        v.episode_index = vj.at("episode_index");
        v.seed_state = vj.at("seed_state").get<Vec>();
        v.flagged_state = vj.at("flagged_state").get<Vec>();
        v.flagged_arm = vj.at("flagged_arm");
        v.risk_value = vj.at("risk_value");
        v.mutation_count = vj.at("mutation_count");
        v.mutated_origin = vj.at("mutated_origin");
        v.source = vj.at("source");
        v.latent = vj.at("latent").get<Vec>();
        for (const auto& sj : vj.at("trajectory")) {
            TrajStep st;
            st.s = sj.at("s").get<Vec>();
            st.arm = sj.at("arm");
            st.reward = sj.at("reward");
            st.cost = sj.at("cost");
            st.mutations = sj.at("mutations");
            v.trajectory.push_back(std::move(st));
        }
        c.violations.push_back(std::move(v));
    }
    return c;
}

}  // namespace vfrl
