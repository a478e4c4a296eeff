#include "vfrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vfrl {

QFunction::QFunction(Mlp net, const Env& env)
    : net_(std::move(net)), state_dim_(env.spec().state_dim) {
    arm_enc_.reserve(env.arm_count());
    for (int a = 0; a < env.arm_count(); ++a) arm_enc_.push_back(env.arm_encoding(a));
    if (net_.input_dim() != static_cast<std::size_t>(state_dim_) + arm_enc_.front().size())
        throw Error("QFunction: network input does not match state + action encoding");
}

Vec QFunction::assemble_input(const Vec& s, int arm) const {
    Vec x;
    x.reserve(s.size() + arm_enc_[arm].size());
    x.insert(x.end(), s.begin(), s.end());
    x.insert(x.end(), arm_enc_[arm].begin(), arm_enc_[arm].end());
    return x;
}

double QFunction::value(const Vec& s, int arm) const {
    if (arm < 0 || arm >= arm_count()) throw Error("QFunction: arm out of range");
    return net_.scalar(assemble_input(s, arm));
}

void QFunction::values(const Vec& s, std::vector<double>& out) const {
    out.resize(arm_enc_.size());
    Mlp::Workspace ws = net_.make_workspace();
    Vec x(net_.input_dim());
    std::copy(s.begin(), s.end(), x.begin());
    for (std::size_t a = 0; a < arm_enc_.size(); ++a) {
        std::copy(arm_enc_[a].begin(), arm_enc_[a].end(), x.begin() + s.size());
        net_.forward(x, ws);
        out[a] = ws.output()[0];
    }
}

double QFunction::max_value(const Vec& s) const {
    std::vector<double> v;
    values(s, v);
    return *std::max_element(v.begin(), v.end());
}

Vec QFunction::state_gradient(const Vec& s, int arm) const {
    const Vec full = net_.input_gradient(assemble_input(s, arm), 0);
    return Vec(full.begin(), full.begin() + state_dim_);
}

int Policy::greedy(const Vec& s) const {
    std::vector<double> p;
    dist(s, p);
    int best = 0;
    for (int a = 1; a < static_cast<int>(p.size()); ++a)
        if (p[a] > p[best]) best = a;
    return best;
}

int Policy::sample(const Vec& s, Rng& rng) const {
    std::vector<double> p;
    dist(s, p);
    const double u = rng.uniform01();
    double acc = 0.0;
    for (int a = 0; a < static_cast<int>(p.size()); ++a) {
        acc += p[a];
        if (u < acc) return a;
    }
    return static_cast<int>(p.size()) - 1;
}

namespace {

void softmax_into(std::vector<double>& v, double tau) {
    const double m = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp((x - m) / tau);
        sum += x;
    }
    for (double& x : v) x /= sum;
}

}  // namespace

void SoftmaxQPolicy::dist(const Vec& s, std::vector<double>& p) const {
    q_.values(s, p);
    softmax_into(p, tau_);
}

int SoftmaxQPolicy::greedy(const Vec& s) const {
    std::vector<double> v;
    q_.values(s, v);
    int best = 0;
    for (int a = 1; a < static_cast<int>(v.size()); ++a)
        if (v[a] > v[best]) best = a;
    return best;
}

void SoftmaxQPolicy::save_into(ModelFile& mf) const {
    mf.set_meta("policy.kind", "softmax_q");
    mf.set_meta("policy.tau", format_double(tau_));
    mf.mlps.emplace_back("policy_q", q_.net());
}

void GreedyQPolicy::dist(const Vec& s, std::vector<double>& p) const {
    p.assign(q_.arm_count(), 0.0);
    p[greedy(s)] = 1.0;
}

int GreedyQPolicy::greedy(const Vec& s) const {
    std::vector<double> v;
    q_.values(s, v);
    int best = 0;
    for (int a = 1; a < static_cast<int>(v.size()); ++a)
        if (v[a] > v[best]) best = a;
    return best;
}

void GreedyQPolicy::save_into(ModelFile& mf) const {
    mf.set_meta("policy.kind", "greedy_q");
    mf.mlps.emplace_back("policy_q", q_.net());
}

int TabularPolicy::cell_of(const Vec& s) const {
    const int row = std::min(n_ - 1, std::max(0, static_cast<int>(std::lround(s.at(0)))));
    const int col = std::min(n_ - 1, std::max(0, static_cast<int>(std::lround(s.at(1)))));
    return row * n_ + col;
}

void TabularPolicy::dist(const Vec& s, std::vector<double>& p) const {
    p.assign(arms_, 0.0);
    p[table_[cell_of(s)]] = 1.0;
}

int TabularPolicy::greedy(const Vec& s) const { return table_[cell_of(s)]; }

void TabularPolicy::save_into(ModelFile& mf) const {
    mf.set_meta("policy.kind", "tabular");
    mf.set_meta("policy.arms", std::to_string(arms_));
    mf.set_meta("policy.grid", std::to_string(n_));
    std::ostringstream table;
    for (std::size_t i = 0; i < table_.size(); ++i) {
        if (i) table << ",";
        table << table_[i];
    }
    mf.set_meta("policy.table", table.str());
}

void LogitsPolicy::dist(const Vec& s, std::vector<double>& p) const {
    const Vec logits = head_(s);
    p.assign(logits.begin(), logits.end());
    softmax_into(p, 1.0);
}

void LogitsPolicy::save_into(ModelFile& mf) const {
    mf.set_meta("policy.kind", "logits");
    mf.mlps.emplace_back("policy_head", head_);
}

void UniformPolicy::dist(const Vec& s, std::vector<double>& p) const {
    (void)s;
    p.assign(arms_, 1.0 / arms_);
}

void UniformPolicy::save_into(ModelFile& mf) const {
    mf.set_meta("policy.kind", "uniform");
    mf.set_meta("policy.arms", std::to_string(arms_));
}

std::unique_ptr<Policy> load_policy(const ModelFile& mf, const Env& env) {
    const std::string kind = mf.meta_at("policy.kind");
    if (kind == "softmax_q") {
        QFunction q(mf.mlp("policy_q"), env);
        return std::make_unique<SoftmaxQPolicy>(std::move(q), std::stod(mf.meta_at("policy.tau")));
    }
    if (kind == "greedy_q") return std::make_unique<GreedyQPolicy>(QFunction(mf.mlp("policy_q"), env));
    if (kind == "logits") return std::make_unique<LogitsPolicy>(mf.mlp("policy_head"));
    if (kind == "uniform") return std::make_unique<UniformPolicy>(std::stoi(mf.meta_at("policy.arms")));
    if (kind == "tabular") {
        std::vector<int> table;
        for (const auto& tok : split(mf.meta_at("policy.table"), ',')) table.push_back(std::stoi(tok));
        return std::make_unique<TabularPolicy>(std::move(table), std::stoi(mf.meta_at("policy.arms")),
                                               std::stoi(mf.meta_at("policy.grid")));
    }
    throw Error("unknown policy kind '" + kind + "'");
}

}  // namespace vfrl
