#include "vfrl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

namespace vfrl {

int PolicyGraph::assign_state(const Vec& s) const {
    if (!clusters) throw Error("graph has no clustering attached");
    const int cluster = clusters->assign(s);
    // Cluster ids map one-to-one onto node ids by construction; clusters with
    // no dataset members were compacted away, so fall back to the nearest
    // populated node centroid.
    if (cluster >= 0 && cluster < static_cast<int>(cluster_to_node.size()) &&
        cluster_to_node[cluster] >= 0)
        return cluster_to_node[cluster];
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& n : nodes) {
        double d = 0.0;
        for (std::size_t i = 0; i < s.size() && i < n.centroid.size(); ++i) {
            const double diff = s[i] - n.centroid[i];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = n.id;
        }
    }
    return best;
}

std::set<std::string> PolicyGraph::labels(int node) const {
    std::set<std::string> out;
    if (node == init_node) out.insert("init");
    else if (node == goal_node) out.insert("goal");
    else if (node == sink_node) out.insert("sink");
    else {
        const auto& n = nodes.at(node);
        out.insert(n.predicates.begin(), n.predicates.end());
        if (n.unsafe) out.insert("unsafe");
    }
    return out;
}

bool PolicyGraph::has_atom(const std::string& atom) const {
    if (atom == "init" || atom == "goal" || atom == "sink" || atom == "unsafe") return true;
    for (const auto& n : nodes) {
        const auto& preds = n.predicates;
        if (std::find(preds.begin(), preds.end(), atom) != preds.end()) return true;
    }
    // Predicates that are true nowhere still resolve if the environment
    // registered them; the caller records all names on construction.
    return std::find(known_atoms.begin(), known_atoms.end(), atom) != known_atoms.end();
}

std::vector<const GraphEdge*> PolicyGraph::outgoing(int node) const {
    std::vector<const GraphEdge*> out;
    for (const auto& e : edges)
        if (e.from == node) out.push_back(&e);
    return out;
}

void PolicyGraph::check_stochastic(double tol) const {
    std::vector<double> sums(node_count(), 0.0);
    for (const auto& e : edges) {
        if (!(e.probability > 0.0))
            throw Error("graph edge with non-positive probability");
        sums[e.from] += e.probability;
    }
    for (int v = 0; v < node_count(); ++v)
        if (std::fabs(sums[v] - 1.0) > tol)
            throw Error("outgoing probabilities of node " + std::to_string(v) +
                        " sum to " + format_double(sums[v]));
}

PolicyGraph build_graph(const TrajectoryDataset& dataset,
                        std::shared_ptr<const Clustering> clusters, const Policy& policy,
                        const RiskCritic& critic, const Env& env, double alpha_risk,
                        const std::vector<int>* deciders) {
    if (!clusters) throw Error("build_graph: no clustering");
    if (dataset.transitions.empty()) throw Error("build_graph: empty dataset");
    if (deciders && deciders->size() != dataset.transitions.size())
        throw Error("build_graph: decider labels do not match the dataset");

    const std::size_t n = dataset.transitions.size();
    std::vector<int> cluster_of(n);
    for (std::size_t i = 0; i < n; ++i) cluster_of[i] = clusters->assign(dataset.transitions[i].s);

    // Compact cluster ids to populated node ids.
    std::vector<int> cluster_to_node(clusters->cluster_count(), -1);
    PolicyGraph g;
    g.clusters = std::move(clusters);
    g.clustering_method = g.clusters->method();
    for (std::size_t i = 0; i < n; ++i) {
        int& node = cluster_to_node[cluster_of[i]];
        if (node < 0) {
            node = static_cast<int>(g.nodes.size());
            g.nodes.push_back({});
            g.nodes.back().id = node;
        }
        g.nodes[node].members.push_back(i);
    }
    const int c = g.cluster_count();
    g.init_node = c;
    g.goal_node = c + 1;
    g.sink_node = c + 2;
    g.cluster_to_node = cluster_to_node;

    // Node annotations.
    const auto predicates = env.predicates();
    for (auto& node : g.nodes) {
        const auto& members = node.members;
        node.centroid.assign(dataset.state_dim, 0.0);
        for (std::size_t i : members)
            for (int d = 0; d < dataset.state_dim; ++d) node.centroid[d] += dataset.transitions[i].s[d];
        for (double& v : node.centroid) v /= static_cast<double>(members.size());

        for (const auto& pred : predicates) {
            std::size_t holds = 0;
            for (std::size_t i : members)
                if (pred.holds(dataset.transitions[i].s)) ++holds;
            if (static_cast<double>(holds) >= 0.9 * static_cast<double>(members.size()))
                node.predicates.push_back(pred.name);
        }

        std::map<int, std::size_t> arm_votes;
        bool any_env_unsafe = false;
        double risk_sum = 0.0;
        double risk_max = -std::numeric_limits<double>::infinity();
        for (std::size_t i : members) {
            const Vec& s = dataset.transitions[i].s;
            const int arm = policy.greedy(s);
            ++arm_votes[arm];
            const double r = critic.risk(s, arm);
            risk_sum += r;
            risk_max = std::max(risk_max, r);
            if (env.unsafe(s)) any_env_unsafe = true;
        }
        node.majority_arm = arm_votes.begin()->first;
        for (const auto& [arm, votes] : arm_votes)
            if (votes > arm_votes.at(node.majority_arm)) node.majority_arm = arm;
        node.action_fidelity = static_cast<double>(arm_votes.at(node.majority_arm)) /
                               static_cast<double>(members.size());
        node.risk_mean = risk_sum / static_cast<double>(members.size());
        node.risk_max = risk_max;
        node.unsafe = node.risk_mean > alpha_risk || any_env_unsafe;
    }

    // Edge counts: consecutive in-episode pairs; episode-final transitions
    // route to GOAL or SINK; INIT feeds episode-start clusters.
    std::map<std::pair<int, int>, std::pair<long, long>> counts;  // -> (total, safety-decided)
    auto bump = [&](int from, int to, long safety) {
        auto& cell = counts[{from, to}];
        cell.first += 1;
        cell.second += safety;
    };
    for (std::size_t e = 0; e < dataset.episode_count(); ++e) {
        const auto [begin, end] = dataset.episode_range(e);
        bump(g.init_node, cluster_to_node[cluster_of[begin]], 0);
        for (std::size_t i = begin; i + 1 < end; ++i)
            bump(cluster_to_node[cluster_of[i]], cluster_to_node[cluster_of[i + 1]],
                 deciders ? (*deciders)[i] : 0);
        const std::size_t last = end - 1;
        const bool to_goal = env.goal(dataset.transitions[last].s_next);
        bump(cluster_to_node[cluster_of[last]], to_goal ? g.goal_node : g.sink_node,
             deciders ? (*deciders)[last] : 0);
    }

    std::vector<long> outgoing_total(g.node_count(), 0);
    for (const auto& [key, cell] : counts) outgoing_total[key.first] += cell.first;
    for (const auto& [key, cell] : counts) {
        GraphEdge edge;
        edge.from = key.first;
        edge.to = key.second;
        edge.count = cell.first;
        edge.probability = static_cast<double>(cell.first) /
                           static_cast<double>(outgoing_total[key.first]);
        edge.decider = 2 * cell.second > cell.first ? "safety" : "task";
        g.edges.push_back(edge);
    }
    // A populated cluster with no outgoing mass cannot occur when members are
    // from-states, but guard against it for externally loaded data.
    for (int v = 0; v < c; ++v)
        if (outgoing_total[v] == 0) {
            warn("node " + std::to_string(v) + " has no outgoing transitions; routed to SINK");
            g.edges.push_back({v, g.sink_node, 1.0, 0, "task"});
        }
    g.edges.push_back({g.goal_node, g.goal_node, 1.0, 0, "task"});
    g.edges.push_back({g.sink_node, g.sink_node, 1.0, 0, "task"});
    std::sort(g.edges.begin(), g.edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
        return a.from != b.from ? a.from < b.from : a.to < b.to;
    });

    for (const auto& pred : predicates) g.known_atoms.push_back(pred.name);
    g.check_stochastic();
    return g;
}

double action_fidelity(const PolicyGraph& graph) {
    double weighted = 0.0;
    std::size_t total = 0;
    for (const auto& n : graph.nodes) {
        weighted += n.action_fidelity * static_cast<double>(n.members.size());
        total += n.members.size();
    }
    if (total == 0) throw Error("action_fidelity: graph has no members");
    return weighted / static_cast<double>(total);
}

namespace {

std::string node_name(const PolicyGraph& g, int node) {
    if (node == g.init_node) return "INIT";
    if (node == g.goal_node) return "GOAL";
    if (node == g.sink_node) return "SINK";
    return "n" + std::to_string(node);
}

}  // namespace

void export_graph_dot(const PolicyGraph& graph, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write dot file '" + path + "'");
    double max_mean = 0.0;
    for (const auto& n : graph.nodes) max_mean = std::max(max_mean, n.risk_mean);

    std::set<int> ce_nodes;
    std::set<std::pair<int, int>> ce_edges;
    if (graph.counterexample) {
        const auto& path_nodes = *graph.counterexample;
        ce_nodes.insert(path_nodes.begin(), path_nodes.end());
        for (std::size_t i = 0; i + 1 < path_nodes.size(); ++i)
            ce_edges.insert({path_nodes[i], path_nodes[i + 1]});
    }

    out << "digraph policy {\n";
    out << "  rankdir=LR;\n";
    out << "  node [shape=box, style=rounded];\n";
    for (int v = 0; v < graph.node_count(); ++v) {
        out << "  " << node_name(graph, v) << " [label=\"" << node_name(graph, v);
        if (graph.is_cluster(v)) {
            const auto& n = graph.nodes[v];
            if (!n.predicates.empty()) {
                out << "\\n";
                for (std::size_t i = 0; i < n.predicates.size(); ++i)
                    out << (i ? ", " : "") << n.predicates[i];
            }
            const double norm = max_mean > 0.0 ? n.risk_mean / max_mean : 0.0;
            char buf[64];
            std::snprintf(buf, sizeof(buf), "\\nRE: %.3f (%.2f)", n.risk_mean, norm);
            out << buf;
        }
        out << "\"";
        if (graph.is_cluster(v) && graph.nodes[v].unsafe)
            out << ", style=\"rounded,filled\", fillcolor=\"#ff8888\"";
        if (ce_nodes.count(v)) out << ", color=red, penwidth=2.5";
        out << "];\n";
    }
    for (const auto& e : graph.edges) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.3f", e.probability);
        out << "  " << node_name(graph, e.from) << " -> " << node_name(graph, e.to)
            << " [label=\"" << buf << " [" << e.decider << "]\"";
        if (ce_edges.count({e.from, e.to})) out << ", color=red, penwidth=2.0";
        out << "];\n";
    }
    out << "}\n";
}

nlohmann::ordered_json graph_to_json(const PolicyGraph& graph) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["clustering_method"] = graph.clustering_method;
    j["init_node"] = graph.init_node;
    j["goal_node"] = graph.goal_node;
    j["sink_node"] = graph.sink_node;
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& n : graph.nodes) {
        nlohmann::ordered_json nj;
        nj["id"] = n.id;
        nj["members"] = n.members;
        nj["centroid"] = n.centroid;
        nj["predicates"] = n.predicates;
        nj["majority_arm"] = n.majority_arm;
        nj["action_fidelity"] = n.action_fidelity;
        nj["risk_mean"] = n.risk_mean;
        nj["risk_max"] = n.risk_max;
        nj["unsafe"] = n.unsafe;
        nodes.push_back(nj);
    }
    j["nodes"] = nodes;
    auto edges = nlohmann::ordered_json::array();
    for (const auto& e : graph.edges) {
        nlohmann::ordered_json ej;
        ej["from"] = e.from;
        ej["to"] = e.to;
        ej["probability"] = e.probability;
        ej["count"] = e.count;
        ej["decider"] = e.decider;
        edges.push_back(ej);
    }
    j["edges"] = edges;
    j["known_atoms"] = graph.known_atoms;
    j["cluster_to_node"] = graph.cluster_to_node;
    if (graph.clusters) j["clustering"] = graph.clusters->to_json();
    if (graph.counterexample) j["counterexample"] = *graph.counterexample;
    return j;
}

void export_graph_json(const PolicyGraph& graph, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write graph file '" + path + "'");
    out << graph_to_json(graph).dump(2) << "\n";
}

PolicyGraph graph_from_json(const nlohmann::ordered_json& j) {
    PolicyGraph g;
    g.clustering_method = j.at("clustering_method");
    g.init_node = j.at("init_node");
    g.goal_node = j.at("goal_node");
    g.sink_node = j.at("sink_node");
    for (const auto& nj : j.at("nodes")) {
        AbstractNode n;
        n.id = nj.at("id");
        n.members = nj.at("members").get<std::vector<std::size_t>>();
        n.centroid = nj.at("centroid").get<Vec>();
        n.predicates = nj.at("predicates").get<std::vector<std::string>>();
        n.majority_arm = nj.at("majority_arm");
        n.action_fidelity = nj.at("action_fidelity");
        n.risk_mean = nj.at("risk_mean");
        n.risk_max = nj.at("risk_max");
        n.unsafe = nj.at("unsafe");
        g.nodes.push_back(std::move(n));
    }
    for (const auto& ej : j.at("edges")) {
        GraphEdge e;
        e.from = ej.at("from");
        e.to = ej.at("to");
        e.probability = ej.at("probability");
        e.count = ej.at("count");
        e.decider = ej.at("decider");
        g.edges.push_back(std::move(e));
    }
    if (j.contains("known_atoms"))
        g.known_atoms = j.at("known_atoms").get<std::vector<std::string>>();
    if (j.contains("cluster_to_node"))
        g.cluster_to_node = j.at("cluster_to_node").get<std::vector<int>>();
    if (j.contains("clustering"))
        g.clusters = std::shared_ptr<const Clustering>(Clustering::from_json(j.at("clustering")));
    if (j.contains("counterexample"))
        g.counterexample = j.at("counterexample").get<std::vector<int>>();
    return g;
}

PolicyGraph load_graph_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open graph file '" + path + "'");
    nlohmann::ordered_json j;
    in >> j;
    return graph_from_json(j);
}

}  // namespace vfrl
