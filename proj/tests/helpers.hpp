#pragma once

// Shared fixture builders and independent oracles for the test suites. The
// oracles deliberately recompute results by a different route than the
// library (path enumeration, value iteration, finite differences).

#include <cmath>
#include <map>
#include <vector>

#include "vfrl/checker.hpp"
#include "vfrl/graph.hpp"
#include "vfrl/rng.hpp"

namespace vfrl_test {

using vfrl::PolicyGraph;
using vfrl::Vec;

struct EdgeSpec {
    int from, to;
    double p;
};

// Builds a checkable graph from raw edges. Cluster nodes are 0..clusters-1;
// INIT/GOAL/SINK get appended automatically with absorbing self-loops on
// GOAL and SINK. `unsafe` flags cluster nodes.
inline PolicyGraph make_graph(int clusters, std::vector<EdgeSpec> edges,
                              std::vector<int> unsafe_nodes = {},
                              std::map<int, std::vector<std::string>> predicates = {}) {
    PolicyGraph g;
    g.nodes.resize(clusters);
    for (int i = 0; i < clusters; ++i) g.nodes[i].id = i;
    g.init_node = clusters;
    g.goal_node = clusters + 1;
    g.sink_node = clusters + 2;
    for (int u : unsafe_nodes) g.nodes[u].unsafe = true;
    for (auto& [node, preds] : predicates) {
        g.nodes[node].predicates = preds;
        for (const auto& p : preds) g.known_atoms.push_back(p);
    }
    for (const auto& e : edges) g.edges.push_back({e.from, e.to, e.p, 0, "task"});
    g.edges.push_back({g.goal_node, g.goal_node, 1.0, 0, "task"});
    g.edges.push_back({g.sink_node, g.sink_node, 1.0, 0, "task"});
    g.clustering_method = "fixture";
    return g;
}

// Dense transition matrix view of a graph.
inline std::vector<double> matrix_of(const PolicyGraph& g) {
    const int n = g.node_count();
    std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
    for (const auto& e : g.edges) m[static_cast<std::size_t>(e.from) * n + e.to] += e.probability;
    return m;
}

// Exhaustive path enumeration for P(phi1 U<=n phi2): a literal recursion over
// every outgoing branch with no memoization.
inline double enum_bounded_until(const std::vector<double>& m, int n_nodes,
                                 const std::vector<char>& sat1, const std::vector<char>& sat2,
                                 int v, int bound) {
    if (sat2[v]) return 1.0;
    if (!sat1[v] || bound == 0) return 0.0;
    double total = 0.0;
    for (int u = 0; u < n_nodes; ++u) {
        const double p = m[static_cast<std::size_t>(v) * n_nodes + u];
        if (p > 0.0) total += p * enum_bounded_until(m, n_nodes, sat1, sat2, u, bound - 1);
    }
    return total;
}

// Least-fixed-point value iteration for the unbounded until (independent of
// the library's linear-system solve).
inline std::vector<double> vi_until(const std::vector<double>& m, int n_nodes,
                                    const std::vector<char>& sat1, const std::vector<char>& sat2) {
    std::vector<double> x(n_nodes, 0.0), next(n_nodes, 0.0);
    for (int v = 0; v < n_nodes; ++v) x[v] = sat2[v] ? 1.0 : 0.0;
    for (long iter = 0; iter < 1000000; ++iter) {
        double change = 0.0;
        for (int v = 0; v < n_nodes; ++v) {
            if (sat2[v]) next[v] = 1.0;
            else if (!sat1[v]) next[v] = 0.0;
            else {
                double acc = 0.0;
                for (int u = 0; u < n_nodes; ++u)
                    acc += m[static_cast<std::size_t>(v) * n_nodes + u] * x[u];
                next[v] = acc;
            }
            change = std::max(change, std::fabs(next[v] - x[v]));
        }
        std::swap(x, next);
        if (change < 1e-15) break;
    }
    return x;
}

// Random stochastic graph over `clusters` cluster nodes plus the specials;
// every node gets 1..3 outgoing edges with normalized probabilities.
inline PolicyGraph random_dtmc(int clusters, vfrl::Rng& rng) {
    std::vector<EdgeSpec> edges;
    const int total = clusters + 3;
    const int init = clusters, goal = clusters + 1, sink = clusters + 2;
    for (int v = 0; v < total; ++v) {
        if (v == goal || v == sink) continue;
        const int fanout = 1 + rng.uniform_int(3);
        std::vector<double> w(fanout);
        double sum = 0.0;
        for (double& x : w) {
            x = rng.uniform(0.05, 1.0);
            sum += x;
        }
        for (int k = 0; k < fanout; ++k) {
            int to = rng.uniform_int(total);
            if (to == init) to = goal;  // INIT has no incoming edges
            edges.push_back({v, to, w[k] / sum});
        }
    }
    std::vector<int> unsafe;
    for (int v = 0; v < clusters; ++v)
        if (rng.uniform01() < 0.3) unsafe.push_back(v);
    return make_graph(clusters, std::move(edges), std::move(unsafe));
}

}  // namespace vfrl_test
