#include "vfrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vfrl/kernels.hpp"

namespace vfrl {

double diversity(const std::vector<LatentPoint>& points) {
    if (points.size() < 2) throw Error("diversity: needs at least 2 points");
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            acc += std::sqrt(kernels::sq_dist(points[i].embedding.size(),
                                              points[i].embedding.data(),
                                              points[j].embedding.data()));
            ++pairs;
        }
    return acc / static_cast<double>(pairs);
}

namespace {

// Cholesky factorization; returns false when the matrix is not positive
// definite to working precision.
bool cholesky(std::vector<double>& a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) sum -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (sum <= 0.0) return false;
                a[i * n + i] = std::sqrt(sum);
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
    return true;
}

void forward_subst(const std::vector<double>& l, std::size_t n, Vec& y) {
    for (std::size_t i = 0; i < n; ++i) {
        double acc = y[i];
        for (std::size_t k = 0; k < i; ++k) acc -= l[i * n + k] * y[k];
        y[i] = acc / l[i * n + i];
    }
}

}  // namespace

double novelty(const std::vector<LatentPoint>& points, const std::vector<Vec>& dataset_embeddings) {
    if (points.empty()) throw Error("novelty: needs at least 1 point");
    const std::size_t d = points[0].embedding.size();
    if (dataset_embeddings.size() < d + 1)
        throw Error("novelty: insufficient data for covariance");

    Vec mean(d, 0.0);
    for (const Vec& x : dataset_embeddings) kernels::axpy(d, 1.0, x.data(), mean.data());
    for (double& v : mean) v /= static_cast<double>(dataset_embeddings.size());

    std::vector<double> cov(d * d, 0.0);
    Vec centered(d);
    for (const Vec& x : dataset_embeddings) {
        for (std::size_t i = 0; i < d; ++i) centered[i] = x[i] - mean[i];
        kernels::ger(d, d, 1.0 / static_cast<double>(dataset_embeddings.size()), centered.data(),
                     centered.data(), cov.data());
    }

    std::vector<double> chol = cov;
    if (!cholesky(chol, d)) {
        chol = cov;
        for (std::size_t i = 0; i < d; ++i) chol[i * d + i] += 1e-6;
        if (!cholesky(chol, d)) throw Error("novelty: covariance not invertible after ridge");
    }

    double acc = 0.0;
    for (const LatentPoint& p : points) {
        if (p.embedding.size() != d) throw Error("novelty: embedding dimension mismatch");
        Vec y(d);
        for (std::size_t i = 0; i < d; ++i) y[i] = p.embedding[i] - mean[i];
        forward_subst(chol, d, y);
        acc += std::sqrt(kernels::dot(d, y.data(), y.data()));
    }
    return acc / static_cast<double>(points.size());
}

std::vector<Vec> dataset_latents(const EncoderEnsemble& ens, const TrajectoryDataset& dataset,
                                 const Env& env) {
    std::vector<Vec> out;
    out.reserve(dataset.transitions.size());
    for (const Transition& t : dataset.transitions)
        out.push_back(ens.mean_embed(t.s, env.encode_action(t.a)));
    return out;
}

PacReport pac_check(const Env& env, const Policy& policy, const PolicyGraph& graph,
                    const CheckResult& check_result, const std::vector<Vec>& falsifier_flagged_states,
                    double delta_claim) {
    const auto states = env.enumerate_states();
    if (states.empty())
        throw Error("pac_check: environment is not exhaustively enumerable");

    // Nodes the pipeline flagged: unsafe nodes when the checker reported a
    // violation, plus the nodes of falsifier-flagged concrete states.
    std::set<int> flagged_nodes;
    if (!check_result.satisfied)
        for (const auto& nd : graph.nodes)
            if (nd.unsafe) flagged_nodes.insert(nd.id);
    for (const Vec& s : falsifier_flagged_states) flagged_nodes.insert(graph.assign_state(s));

    PacReport rep;
    for (const Vec& start : states) {
        if (env.goal(start)) continue;
        // Deterministic oracle rollout.
        bool unsafe_traj = env.unsafe(start);
        bool covered = flagged_nodes.count(graph.assign_state(start)) > 0;
        Vec s = start;
        for (int t = 0; t < env.spec().horizon; ++t) {
            const int arm = policy.greedy(s);
            const StepResult r = env.step_mean(s, arm);
            s = r.s_next;
            if (env.unsafe(s)) unsafe_traj = true;
            if (flagged_nodes.count(graph.assign_state(s))) covered = true;
            if (r.done) break;
        }
        if (unsafe_traj) {
            ++rep.unsafe_starts;
            if (covered) ++rep.covered;
        }
    }
    rep.miss_rate = rep.unsafe_starts == 0
                        ? 0.0
                        : 1.0 - static_cast<double>(rep.covered) /
                                    static_cast<double>(rep.unsafe_starts);
    rep.pass = rep.miss_rate <= delta_claim;
    return rep;
}

}  // namespace vfrl
