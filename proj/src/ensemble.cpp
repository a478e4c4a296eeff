#include "vfrl/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "vfrl/kernels.hpp"

namespace vfrl {

EncoderEnsemble::EncoderEnsemble(std::vector<Member> members, std::vector<Vec> arm_encodings)
    : members_(std::move(members)), arm_enc_(std::move(arm_encodings)) {
    if (members_.size() < 2) throw Error("K must be >= 2");
    const std::size_t d = members_[0].state_enc.output_dim();
    for (const auto& m : members_)
        if (m.state_enc.output_dim() != d || m.action_enc.output_dim() != d)
            throw Error("ensemble members must share the embedding dimension");
}

Vec EncoderEnsemble::embed(int k, const Vec& s, const Vec& action_enc) const {
    Vec z = members_.at(k).state_enc(s);
    const Vec za = members_[k].action_enc(action_enc);
    kernels::axpy(z.size(), 1.0, za.data(), z.data());
    return z;
}

Vec EncoderEnsemble::mean_embed(const Vec& s, const Vec& action_enc) const {
    Vec acc(dim(), 0.0);
    for (int k = 0; k < size(); ++k) {
        const Vec z = embed(k, s, action_enc);
        kernels::axpy(acc.size(), 1.0, z.data(), acc.data());
    }
    for (double& v : acc) v /= size();
    return acc;
}

double EncoderEnsemble::uncertainty(const Vec& s, int arm) const {
    return uncertainty_encoded(s, arm_enc_.at(arm));
}

double EncoderEnsemble::uncertainty_encoded(const Vec& s, const Vec& action_enc) const {
    std::vector<Vec> z(members_.size());
    for (int k = 0; k < size(); ++k) z[k] = embed(k, s, action_enc);
    double worst = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
        for (std::size_t j = i + 1; j < z.size(); ++j)
            worst = std::max(worst, kernels::sq_dist(z[i].size(), z[i].data(), z[j].data()));
    return worst;
}

void EncoderEnsemble::save(const std::string& path) const {
    ModelFile mf;
    mf.set_meta("kind", "encoder_ensemble");
    mf.set_meta("K", std::to_string(size()));
    mf.set_meta("d", std::to_string(dim()));
    for (int k = 0; k < size(); ++k) {
        mf.mlps.emplace_back("member" + std::to_string(k) + "_s", members_[k].state_enc);
        mf.mlps.emplace_back("member" + std::to_string(k) + "_a", members_[k].action_enc);
    }
    mf.save(path);
}

EncoderEnsemble EncoderEnsemble::load(const std::string& path, const Env& env) {
    const ModelFile mf = ModelFile::load(path);
    const int k = std::stoi(mf.meta_at("K"));
    std::vector<Member> members;
    for (int i = 0; i < k; ++i)
        members.push_back({mf.mlp("member" + std::to_string(i) + "_s"),
                           mf.mlp("member" + std::to_string(i) + "_a")});
    std::vector<Vec> encodings;
    for (int a = 0; a < env.arm_count(); ++a) encodings.push_back(env.arm_encoding(a));
    return EncoderEnsemble(std::move(members), std::move(encodings));
}

namespace {

void normalize(Vec& z, double& norm) {
    norm = std::sqrt(std::max(kernels::dot(z.size(), z.data(), z.data()), 1e-16));
    for (double& v : z) v /= norm;
}

struct ViewBatch {
    std::vector<Vec> s_in, a_in;   // jittered inputs
    std::vector<Vec> z;            // normalized joint embeddings
    std::vector<double> norms;
};

}  // namespace

EncoderEnsemble train_ensemble(const TrajectoryDataset& dataset, const Env& env, int k,
                               const RunConfig& cfg, Rng& rng, EnsembleTrainStats* stats) {
    if (k < 2) throw Error("K must be >= 2");
    const std::size_t n = dataset.transitions.size();
    if (n < 2) throw Error("train_ensemble: need at least 2 transitions");

    // Reject a dataset of identical (s, a) pairs: there is nothing to contrast.
    {
        const Transition& first = dataset.transitions.front();
        bool distinct = false;
        for (const Transition& t : dataset.transitions)
            if (t.s != first.s || t.a != first.a) {
                distinct = true;
                break;
            }
        if (!distinct) throw Error("train_ensemble: degenerate dataset (all (s,a) pairs identical)");
    }

    std::vector<Vec> states(n), encs(n);
    for (std::size_t i = 0; i < n; ++i) {
        states[i] = dataset.transitions[i].s;
        encs[i] = env.encode_action(dataset.transitions[i].a);
    }

    const std::size_t d = static_cast<std::size_t>(cfg.embed_dim);
    const int batch = std::min<int>(cfg.contrast_batch, static_cast<int>(n));
    const double temp = cfg.contrast_temp;
    const int steps = 200;

    std::vector<EncoderEnsemble::Member> members;
    if (stats) {
        stats->initial_loss.assign(k, 0.0);
        stats->final_loss.assign(k, 0.0);
    }

    for (int member = 0; member < k; ++member) {
        Rng mrng = rng.fork(1000 + member);
        std::vector<std::size_t> bootstrap(n);
        for (auto& id : bootstrap) id = static_cast<std::size_t>(mrng.uniform_int(static_cast<int>(n)));

        EncoderEnsemble::Member m{
            Mlp({states[0].size(), 32, d}, mrng),
            Mlp({encs[0].size(), 32, d}, mrng),
        };
        Adam opt_s(m.state_enc, 1e-3);
        Adam opt_a(m.action_enc, 1e-3);
        Mlp::ParamBuf grad_s = m.state_enc.make_param_buf();
        Mlp::ParamBuf grad_a = m.action_enc.make_param_buf();
        std::vector<Mlp::Workspace> ws_s1(batch), ws_a1(batch), ws_s2(batch), ws_a2(batch);
        for (int i = 0; i < batch; ++i) {
            ws_s1[i] = m.state_enc.make_workspace();
            ws_s2[i] = m.state_enc.make_workspace();
            ws_a1[i] = m.action_enc.make_workspace();
            ws_a2[i] = m.action_enc.make_workspace();
        }

        auto jitter = [&](const Vec& v) {
            Vec out = v;
            for (double& x : out) x += mrng.normal(0.0, cfg.sigma_aug);
            return out;
        };

        ViewBatch v1, v2;
        std::vector<double> logits(static_cast<std::size_t>(batch) * batch);
        std::vector<double> p_row(logits.size()), p_col(logits.size());

        for (int step = 0; step < steps; ++step) {
            v1.s_in.resize(batch); v1.a_in.resize(batch); v1.z.resize(batch); v1.norms.resize(batch);
            v2.s_in.resize(batch); v2.a_in.resize(batch); v2.z.resize(batch); v2.norms.resize(batch);
            for (int i = 0; i < batch; ++i) {
                const std::size_t id = bootstrap[static_cast<std::size_t>(
                    mrng.uniform_int(static_cast<int>(bootstrap.size())))];
                v1.s_in[i] = jitter(states[id]);
                v1.a_in[i] = jitter(encs[id]);
                v2.s_in[i] = jitter(states[id]);
                v2.a_in[i] = jitter(encs[id]);
                m.state_enc.forward(v1.s_in[i], ws_s1[i]);
                m.action_enc.forward(v1.a_in[i], ws_a1[i]);
                m.state_enc.forward(v2.s_in[i], ws_s2[i]);
                m.action_enc.forward(v2.a_in[i], ws_a2[i]);
                v1.z[i].assign(ws_s1[i].output().begin(), ws_s1[i].output().end());
                kernels::axpy(d, 1.0, ws_a1[i].output().data(), v1.z[i].data());
                v2.z[i].assign(ws_s2[i].output().begin(), ws_s2[i].output().end());
                kernels::axpy(d, 1.0, ws_a2[i].output().data(), v2.z[i].data());
                normalize(v1.z[i], v1.norms[i]);
                normalize(v2.z[i], v2.norms[i]);
            }

            for (int i = 0; i < batch; ++i)
                for (int j = 0; j < batch; ++j)
                    logits[static_cast<std::size_t>(i) * batch + j] =
                        kernels::dot(d, v1.z[i].data(), v2.z[j].data()) / temp;

            // Symmetric InfoNCE: rows match view 1 to view 2, columns the
            // other way round.
            double loss = 0.0;
            for (int i = 0; i < batch; ++i) {
                double mx = logits[static_cast<std::size_t>(i) * batch];
                for (int j = 1; j < batch; ++j)
                    mx = std::max(mx, logits[static_cast<std::size_t>(i) * batch + j]);
                double sum = 0.0;
                for (int j = 0; j < batch; ++j)
                    sum += std::exp(logits[static_cast<std::size_t>(i) * batch + j] - mx);
                for (int j = 0; j < batch; ++j)
                    p_row[static_cast<std::size_t>(i) * batch + j] =
                        std::exp(logits[static_cast<std::size_t>(i) * batch + j] - mx) / sum;
                loss -= 0.5 * (logits[static_cast<std::size_t>(i) * batch + i] - mx - std::log(sum));
            }
            for (int j = 0; j < batch; ++j) {
                double mx = logits[static_cast<std::size_t>(j)];
                for (int i = 1; i < batch; ++i)
                    mx = std::max(mx, logits[static_cast<std::size_t>(i) * batch + j]);
                double sum = 0.0;
                for (int i = 0; i < batch; ++i)
                    sum += std::exp(logits[static_cast<std::size_t>(i) * batch + j] - mx);
                for (int i = 0; i < batch; ++i)
                    p_col[static_cast<std::size_t>(i) * batch + j] =
                        std::exp(logits[static_cast<std::size_t>(i) * batch + j] - mx) / sum;
                loss -= 0.5 * (logits[static_cast<std::size_t>(j) * batch + j] - mx - std::log(sum));
            }
            loss /= batch;
            if (!std::isfinite(loss))
                throw Error("ensemble training diverged at step " + std::to_string(step));
            if (stats) {
                if (step == 0) stats->initial_loss[member] = loss;
                stats->final_loss[member] = loss;
            }

            grad_s.zero();
            grad_a.zero();
            const double inv_b = 1.0 / batch;
            for (int i = 0; i < batch; ++i) {
                // dloss/dz for both views, through the normalization.
                Vec g1(d, 0.0), g2(d, 0.0);
                for (int j = 0; j < batch; ++j) {
                    const double w =
                        0.5 * inv_b *
                        (p_row[static_cast<std::size_t>(i) * batch + j] - (i == j ? 1.0 : 0.0)) +
                        0.5 * inv_b *
                        (p_col[static_cast<std::size_t>(i) * batch + j] - (i == j ? 1.0 : 0.0));
                    kernels::axpy(d, w / temp, v2.z[j].data(), g1.data());
                }
                for (int j = 0; j < batch; ++j) {
                    const double w =
                        0.5 * inv_b *
                        (p_row[static_cast<std::size_t>(j) * batch + i] - (i == j ? 1.0 : 0.0)) +
                        0.5 * inv_b *
                        (p_col[static_cast<std::size_t>(j) * batch + i] - (i == j ? 1.0 : 0.0));
                    kernels::axpy(d, w / temp, v1.z[j].data(), g2.data());
                }
                auto through_norm = [&](Vec& g, const Vec& zhat, double norm) {
                    const double proj = kernels::dot(d, g.data(), zhat.data());
                    for (std::size_t c = 0; c < d; ++c) g[c] = (g[c] - proj * zhat[c]) / norm;
                };
                through_norm(g1, v1.z[i], v1.norms[i]);
                through_norm(g2, v2.z[i], v2.norms[i]);
                // The joint embedding is a sum, so the same gradient flows
                // into both encoders.
                m.state_enc.backward(ws_s1[i], g1, &grad_s, nullptr);
                m.action_enc.backward(ws_a1[i], g1, &grad_a, nullptr);
                m.state_enc.backward(ws_s2[i], g2, &grad_s, nullptr);
                m.action_enc.backward(ws_a2[i], g2, &grad_a, nullptr);
            }
            opt_s.step(m.state_enc, grad_s);
            opt_a.step(m.action_enc, grad_a);
        }
        members.push_back(std::move(m));
    }

    std::vector<Vec> encodings;
    for (int a = 0; a < env.arm_count(); ++a) encodings.push_back(env.arm_encoding(a));
    return EncoderEnsemble(std::move(members), std::move(encodings));
}

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

CoverageReport coverage_report(const EncoderEnsemble& ens,
                               const std::vector<std::pair<Vec, Vec>>& in_dist,
                               const std::vector<std::pair<Vec, Vec>>& out_dist) {
    if (in_dist.empty() || out_dist.empty()) throw Error("coverage_report: empty pair set");
    std::vector<double> in_scores, out_scores;
    in_scores.reserve(in_dist.size());
    out_scores.reserve(out_dist.size());
    for (const auto& [s, enc] : in_dist) in_scores.push_back(ens.uncertainty_encoded(s, enc));
    for (const auto& [s, enc] : out_dist) out_scores.push_back(ens.uncertainty_encoded(s, enc));

    CoverageReport rep;
    double acc = 0.0;
    for (double v : in_scores) acc += v;
    rep.in_mean = acc / in_scores.size();
    rep.in_median = median_of(in_scores);
    acc = 0.0;
    for (double v : out_scores) acc += v;
    rep.out_mean = acc / out_scores.size();
    rep.out_median = median_of(out_scores);

    std::vector<double> sorted_in = in_scores;
    std::sort(sorted_in.begin(), sorted_in.end());
    const std::size_t rank =
        std::min(sorted_in.size() - 1,
                 static_cast<std::size_t>(std::ceil(0.95 * sorted_in.size())) - 1);
    const double q95 = sorted_in[rank];
    std::size_t above = 0;
    for (double v : out_scores)
        if (v > q95) ++above;
    rep.separation = static_cast<double>(above) / out_scores.size();
    return rep;
}

double calibrate_delta(const EncoderEnsemble& ens, const TrajectoryDataset& dataset,
                       const Env& env, double quantile) {
    if (dataset.transitions.empty()) throw Error("calibrate_delta: empty dataset");
    std::vector<double> scores;
    scores.reserve(dataset.transitions.size());
    for (const Transition& t : dataset.transitions)
        scores.push_back(ens.uncertainty_encoded(t.s, env.encode_action(t.a)));
    std::sort(scores.begin(), scores.end());
    const std::size_t rank =
        std::min(scores.size() - 1,
                 static_cast<std::size_t>(std::ceil(quantile * scores.size())) - 1);
    return scores[rank];
}

}  // namespace vfrl
