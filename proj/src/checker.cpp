#include "vfrl/checker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace vfrl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Dtmc {
    int n = 0;
    std::vector<double> p;  // dense row-major
    double at(int i, int j) const { return p[static_cast<std::size_t>(i) * n + j]; }
};

Dtmc build_matrix(const PolicyGraph& g) {
    Dtmc m;
    m.n = g.node_count();
    m.p.assign(static_cast<std::size_t>(m.n) * m.n, 0.0);
    for (const auto& e : g.edges) m.p[static_cast<std::size_t>(e.from) * m.n + e.to] += e.probability;
    return m;
}

// Gaussian elimination with partial pivoting on (I - A) x = b.
std::vector<double> solve_direct(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r * n + col]) > std::fabs(a[pivot * n + col])) pivot = r;
        if (std::fabs(a[pivot * n + col]) < 1e-14)
            throw Error("model check: singular linear system");
        if (pivot != col) {
            for (std::size_t c2 = 0; c2 < n; ++c2) std::swap(a[col * n + c2], a[pivot * n + c2]);
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (std::size_t c2 = col; c2 < n; ++c2) a[r * n + c2] -= f * a[col * n + c2];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t c2 = r + 1; c2 < n; ++c2) acc -= a[r * n + c2] * x[c2];
        x[r] = acc / a[r * n + r];
    }
    return x;
}

std::vector<double> solve_gauss_seidel(const std::vector<double>& coeff,
                                       const std::vector<double>& b) {
    const std::size_t n = b.size();
    std::vector<double> x(n, 0.0);
    for (long iter = 0; iter < 2000000; ++iter) {
        double residual = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            double acc = b[r];
            for (std::size_t c = 0; c < n; ++c)
                if (c != r) acc -= coeff[r * n + c] * x[c];
            const double nx = acc / coeff[r * n + r];
            residual = std::max(residual, std::fabs(nx - x[r]));
            x[r] = nx;
        }
        if (residual <= 1e-12) return x;
    }
    throw Error("model check: Gauss-Seidel did not converge");
}

class Evaluator {
public:
    Evaluator(const PolicyGraph& g) : g_(g), m_(build_matrix(g)) {}

    struct Result {
        std::vector<char> sat;
        std::vector<double> prob;  // meaningful when the formula is a P node
        bool has_prob = false;
    };

    Result eval(const pctl::Formula& f) {
        using Kind = pctl::Formula::Kind;
        Result out;
        out.sat.assign(m_.n, 0);
        switch (f.kind) {
            case Kind::True:
                std::fill(out.sat.begin(), out.sat.end(), 1);
                return out;
            case Kind::False: return out;
            case Kind::Atom: {
                if (!g_.has_atom(f.atom)) throw Error("model check: unknown atom '" + f.atom + "'");
                for (int v = 0; v < m_.n; ++v) out.sat[v] = g_.labels(v).count(f.atom) ? 1 : 0;
                return out;
            }
            case Kind::Not: {
                Result inner = eval(*f.lhs);
                for (int v = 0; v < m_.n; ++v) out.sat[v] = !inner.sat[v];
                return out;
            }
            case Kind::And: {
                Result a = eval(*f.lhs);
                Result b = eval(*f.rhs);
                for (int v = 0; v < m_.n; ++v) out.sat[v] = a.sat[v] && b.sat[v];
                return out;
            }
            case Kind::Prob: {
                out.prob = path_probabilities(f.path);
                out.has_prob = true;
                for (int v = 0; v < m_.n; ++v) out.sat[v] = f.bound.contains(out.prob[v]) ? 1 : 0;
                return out;
            }
        }
        throw Error("model check: malformed formula");
    }

    std::vector<double> path_probabilities(const pctl::PathFormula& path) {
        using PKind = pctl::PathFormula::Kind;
        switch (path.kind) {
            case PKind::Next: {
                const Result target = eval(*path.rhs);
                std::vector<double> p(m_.n, 0.0);
                for (int v = 0; v < m_.n; ++v) {
                    double acc = 0.0;
                    for (int u = 0; u < m_.n; ++u)
                        if (target.sat[u]) acc += m_.at(v, u);
                    p[v] = acc;
                }
                return p;
            }
            case PKind::BoundedUntil: {
                const Result hold = eval(*path.lhs);
                const Result target = eval(*path.rhs);
                std::vector<double> x(m_.n, 0.0), next(m_.n, 0.0);
                for (int v = 0; v < m_.n; ++v) x[v] = target.sat[v] ? 1.0 : 0.0;
                for (int step = 0; step < path.bound; ++step) {
                    for (int v = 0; v < m_.n; ++v) {
                        if (target.sat[v]) {
                            next[v] = 1.0;
                        } else if (hold.sat[v]) {
                            double acc = 0.0;
                            for (int u = 0; u < m_.n; ++u) acc += m_.at(v, u) * x[u];
                            next[v] = acc;
                        } else {
                            next[v] = 0.0;
                        }
                    }
                    std::swap(x, next);
                }
                return x;
            }
            case PKind::Until: return unbounded_until(*path.lhs, *path.rhs);
        }
        throw Error("model check: malformed path formula");
    }

    std::vector<double> unbounded_until(const pctl::Formula& lhs, const pctl::Formula& rhs) {
        const Result hold = eval(lhs);
        const Result target = eval(rhs);
        // Probability-0 precomputation: states that cannot reach a target
        // state through hold states keep probability 0.
        std::vector<char> reach(m_.n, 0);
        for (int v = 0; v < m_.n; ++v) reach[v] = target.sat[v];
        bool changed = true;
        while (changed) {
            changed = false;
            for (int v = 0; v < m_.n; ++v) {
                if (reach[v] || !hold.sat[v]) continue;
                for (int u = 0; u < m_.n; ++u)
                    if (m_.at(v, u) > 0.0 && reach[u]) {
                        reach[v] = 1;
                        changed = true;
                        break;
                    }
            }
        }
        std::vector<int> unknown;  // hold, not target, can reach target
        std::vector<int> index(m_.n, -1);
        for (int v = 0; v < m_.n; ++v)
            if (reach[v] && !target.sat[v]) {
                index[v] = static_cast<int>(unknown.size());
                unknown.push_back(v);
            }
        std::vector<double> prob(m_.n, 0.0);
        for (int v = 0; v < m_.n; ++v) prob[v] = target.sat[v] ? 1.0 : 0.0;
        if (unknown.empty()) return prob;

        const std::size_t k = unknown.size();
        std::vector<double> coeff(k * k, 0.0);
        std::vector<double> b(k, 0.0);
        for (std::size_t r = 0; r < k; ++r) {
            const int v = unknown[r];
            coeff[r * k + r] = 1.0;
            for (int u = 0; u < m_.n; ++u) {
                const double p = m_.at(v, u);
                if (p <= 0.0) continue;
                if (target.sat[u]) b[r] += p;
                else if (index[u] >= 0) coeff[r * k + static_cast<std::size_t>(index[u])] -= p;
            }
        }
        const std::vector<double> x =
            k <= 500 ? solve_direct(coeff, b) : solve_gauss_seidel(coeff, b);
        for (std::size_t r = 0; r < k; ++r) prob[unknown[r]] = x[r];
        return prob;
    }

    const PolicyGraph& g_;
    Dtmc m_;
};

}  // namespace

CheckResult check(const PolicyGraph& graph, const pctl::FormulaPtr& formula) {
    if (!formula) throw Error("model check: null formula");
    graph.check_stochastic();
    Evaluator ev(graph);
    const Evaluator::Result res = ev.eval(*formula);
    CheckResult out;
    out.formula_text = formula->to_string();
    out.satisfied = res.sat[graph.init_node] != 0;
    if (res.has_prob) {
        out.node_probabilities = res.prob;
    } else {
        out.node_probabilities.assign(graph.node_count(), 0.0);
        for (int v = 0; v < graph.node_count(); ++v)
            out.node_probabilities[v] = res.sat[v] ? 1.0 : 0.0;
    }
    return out;
}

CheckResult check(const PolicyGraph& graph, const std::string& formula_text) {
    return check(graph, pctl::parse(formula_text));
}

namespace {

struct PathSearch {
    const PolicyGraph& g;
    std::vector<char> allowed;  // may appear strictly inside the path
    std::vector<char> target;

    // Most probable INIT -> target path via Dijkstra on -log(probability),
    // with some edges banned (Yen's spur machinery).
    std::optional<std::vector<int>> shortest(const std::set<std::pair<int, int>>& banned_edges,
                                             const std::set<int>& banned_nodes, int source,
                                             double* out_cost) const {
        const int n = g.node_count();
        std::vector<double> dist(n, kInf);
        std::vector<int> prev(n, -1);
        std::vector<char> done(n, 0);
        dist[source] = 0.0;
        for (int it = 0; it < n; ++it) {
            int v = -1;
            double best = kInf;
            for (int u = 0; u < n; ++u)
                if (!done[u] && dist[u] < best) {
                    best = dist[u];
                    v = u;
                }
            if (v < 0) break;
            done[v] = 1;
            if (target[v]) continue;  // targets are endpoints only
            for (const auto& e : g.edges) {
                if (e.from != v || e.probability <= 0.0) continue;
                if (banned_edges.count({e.from, e.to})) continue;
                if (banned_nodes.count(e.to)) continue;
                if (!allowed[e.to] && !target[e.to]) continue;
                const double w = -std::log(e.probability);
                if (dist[v] + w < dist[e.to]) {
                    dist[e.to] = dist[v] + w;
                    prev[e.to] = v;
                }
            }
        }
        int best_target = -1;
        for (int v = 0; v < n; ++v)
            if (target[v] && dist[v] < (best_target < 0 ? kInf : dist[best_target])) best_target = v;
        if (best_target < 0 || dist[best_target] == kInf) return std::nullopt;
        std::vector<int> path;
        for (int v = best_target; v != -1; v = prev[v]) path.push_back(v);
        std::reverse(path.begin(), path.end());
        if (out_cost) *out_cost = dist[best_target];
        return path;
    }
};

double path_probability(const PolicyGraph& g, const std::vector<int>& path) {
    double p = 1.0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        double edge_p = 0.0;
        for (const auto& e : g.edges)
            if (e.from == path[i] && e.to == path[i + 1]) edge_p += e.probability;
        p *= edge_p;
    }
    return p;
}

CounterexampleTrace annotate(const PolicyGraph& g, const std::vector<int>& path) {
    CounterexampleTrace t;
    t.nodes = path;
    t.probability = path_probability(g, path);
    for (int v : path) {
        if (g.is_cluster(v)) {
            t.node_predicates.push_back(g.nodes[v].predicates);
            t.node_risk.push_back(g.nodes[v].risk_mean);
        } else {
            std::vector<std::string> special{v == g.init_node ? "init"
                                             : v == g.goal_node ? "goal"
                                                                : "sink"};
            t.node_predicates.push_back(std::move(special));
            t.node_risk.push_back(0.0);
        }
    }
    return t;
}

}  // namespace

CounterexampleResult extract_counterexample(const PolicyGraph& graph,
                                            const pctl::FormulaPtr& formula,
                                            const CheckResult& result, int k) {
    if (!formula || formula->kind != pctl::Formula::Kind::Prob ||
        formula->path.kind == pctl::PathFormula::Kind::Next)
        throw Error("extract_counterexample: formula must be a P-bounded until");
    if (result.satisfied)
        throw Error("extract_counterexample: requires a prior violating check");

    Evaluator ev(graph);
    const auto hold = ev.eval(*formula->path.lhs);
    const auto target = ev.eval(*formula->path.rhs);

    PathSearch search{graph, {}, {}};
    search.allowed.assign(graph.node_count(), 0);
    search.target.assign(graph.node_count(), 0);
    for (int v = 0; v < graph.node_count(); ++v) {
        // A counterexample path stays in hold states and ends where the hold
        // operand fails (an unsafe node under the Eq-3 shape); target states
        // of the until (goal) must not be crossed.
        search.allowed[v] = hold.sat[v] && !target.sat[v];
        search.target[v] = !hold.sat[v] && !target.sat[v];
    }

    CounterexampleResult out;
    double cost = 0.0;
    auto first = search.shortest({}, {}, graph.init_node, &cost);
    if (!first) {
        out.goal_unreachable = true;
        return out;
    }
    out.traces.push_back(annotate(graph, *first));

    // Yen's k-shortest extension for the configurable trace count.
    std::vector<std::vector<int>> accepted{*first};
    std::vector<std::pair<double, std::vector<int>>> candidates;
    while (static_cast<int>(accepted.size()) < k) {
        const auto& last = accepted.back();
        for (std::size_t spur = 0; spur + 1 < last.size(); ++spur) {
            std::set<std::pair<int, int>> banned_edges;
            for (const auto& p : accepted)
                if (p.size() > spur &&
                    std::equal(p.begin(), p.begin() + static_cast<long>(spur) + 1, last.begin()))
                    banned_edges.insert({p[spur], p[spur + 1]});
            std::set<int> banned_nodes(last.begin(), last.begin() + static_cast<long>(spur));
            double spur_cost = 0.0;
            const auto tail = search.shortest(banned_edges, banned_nodes, last[spur], &spur_cost);
            if (!tail) continue;
            std::vector<int> full(last.begin(), last.begin() + static_cast<long>(spur));
            full.insert(full.end(), tail->begin(), tail->end());
            if (std::find_if(candidates.begin(), candidates.end(), [&](const auto& c) {
                    return c.second == full;
                }) == candidates.end())
                candidates.push_back({-std::log(std::max(path_probability(graph, full), 1e-300)), full});
        }
        if (candidates.empty()) break;
        const auto best = std::min_element(candidates.begin(), candidates.end(),
                                           [](const auto& a, const auto& b) { return a.first < b.first; });
        accepted.push_back(best->second);
        out.traces.push_back(annotate(graph, best->second));
        candidates.erase(best);
    }
    return out;
}

std::vector<SeedState> risk_ranked_states(const PolicyGraph& graph, const CheckResult& result,
                                          const TrajectoryDataset& dataset, int n) {
    if (n < 0) throw Error("risk_ranked_states: N must be >= 0");
    if (n == 0) return {};
    std::size_t distinct_limit = dataset.transitions.size();
    if (static_cast<std::size_t>(n) > distinct_limit) {
        warn("risk_ranked_states: N exceeds dataset size; returning all states");
        n = static_cast<int>(distinct_limit);
    }

    struct NodeScore {
        int node;
        double score;
        double risk;
    };
    std::vector<NodeScore> order;
    for (const auto& nd : graph.nodes) {
        const double sat = result.node_probabilities.empty()
                               ? 1.0
                               : result.node_probabilities[nd.id];
        order.push_back({nd.id, 1.0 - sat, nd.risk_mean});
    }
    std::sort(order.begin(), order.end(), [](const NodeScore& a, const NodeScore& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.risk != b.risk) return a.risk > b.risk;
        return a.node < b.node;
    });

    long flagged = 0;
    for (const auto& s : order)
        if (s.score > 1e-9) ++flagged;
    // With a fully satisfied graph every node is a candidate, ranked by risk.
    if (flagged == 0) {
        flagged = static_cast<long>(order.size());
        std::sort(order.begin(), order.end(), [](const NodeScore& a, const NodeScore& b) {
            if (a.risk != b.risk) return a.risk > b.risk;
            return a.node < b.node;
        });
    }
    const long cap = (n + flagged - 1) / flagged;

    std::vector<SeedState> out;
    std::set<Vec> seen;
    auto take_from = [&](int node, long limit) {
        long taken = 0;
        for (std::size_t i : graph.nodes[node].members) {
            if (static_cast<int>(out.size()) >= n || taken >= limit) break;
            const Vec& s = dataset.transitions[i].s;
            if (!seen.insert(s).second) continue;
            const double sat = result.node_probabilities.empty()
                                   ? 1.0
                                   : result.node_probabilities[node];
            out.push_back({s, i, node, 1.0 - sat});
            ++taken;
        }
    };
    for (const auto& ns : order) {
        if (static_cast<int>(out.size()) >= n) break;
        take_from(ns.node, cap);
    }
    // Second pass without the per-node cap when quotas left seats unfilled.
    for (const auto& ns : order) {
        if (static_cast<int>(out.size()) >= n) break;
        take_from(ns.node, std::numeric_limits<long>::max());
    }
    return out;
}

}  // namespace vfrl
