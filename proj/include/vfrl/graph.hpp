#pragma once

#include <optional>
#include <set>

#include "vfrl/cluster.hpp"
#include "vfrl/critic.hpp"
#include "vfrl/env.hpp"
#include "vfrl/policy.hpp"

namespace vfrl {

struct AbstractNode {
    int id = 0;
    std::vector<std::size_t> members;  // dataset transition indices (their from-states)
    Vec centroid;
    std::vector<std::string> predicates;  // names true for >= 90% of members
    int majority_arm = -1;
    double action_fidelity = 0.0;  // members whose policy action equals the majority
    double risk_mean = 0.0;
    double risk_max = 0.0;
    bool unsafe = false;
};

struct GraphEdge {
    int from = 0, to = 0;
    double probability = 0.0;
    long count = 0;
    std::string decider = "task";  // majority decider among aggregated transitions
};

// The DTMC the checker analyses: cluster nodes plus distinguished INIT, GOAL
// and SINK nodes. Outgoing probabilities of every node sum to 1 (GOAL and
// SINK are absorbing self-loops).
struct PolicyGraph {
    std::vector<AbstractNode> nodes;
    int init_node = -1, goal_node = -1, sink_node = -1;
    std::vector<GraphEdge> edges;
    std::string clustering_method;
    std::shared_ptr<const Clustering> clusters;
    std::vector<int> cluster_to_node;          // raw cluster id -> node id (-1 = unpopulated)
    std::vector<std::string> known_atoms;      // predicate names registered by the env
    std::optional<std::vector<int>> counterexample;  // node path attached for export

    int node_count() const { return static_cast<int>(nodes.size()) + 3; }
    int cluster_count() const { return static_cast<int>(nodes.size()); }
    bool is_cluster(int node) const { return node >= 0 && node < cluster_count(); }
    // Cluster node id of an arbitrary state.
    int assign_state(const Vec& s) const;

    // Atom labels used by the checker: per-node predicate names plus the
    // built-ins unsafe / goal / sink / init.
    std::set<std::string> labels(int node) const;
    bool has_atom(const std::string& atom) const;
    std::vector<const GraphEdge*> outgoing(int node) const;

    void check_stochastic(double tol = 1e-9) const;
};

// Edge probabilities are empirical counts over consecutive in-episode cluster
// pairs; episode-final transitions route to GOAL when the successor satisfies
// the goal predicate and to SINK otherwise. `deciders` (one label per dataset
// transition, 0 = task, 1 = safety) feeds the edge decider annotation.
PolicyGraph build_graph(const TrajectoryDataset& dataset,
                        std::shared_ptr<const Clustering> clusters, const Policy& policy,
                        const RiskCritic& critic, const Env& env, double alpha_risk,
                        const std::vector<int>* deciders = nullptr);

// Member-count-weighted mean of node action fidelities.
double action_fidelity(const PolicyGraph& graph);

void export_graph_dot(const PolicyGraph& graph, const std::string& path);
void export_graph_json(const PolicyGraph& graph, const std::string& path);
nlohmann::ordered_json graph_to_json(const PolicyGraph& graph);
PolicyGraph graph_from_json(const nlohmann::ordered_json& j);
PolicyGraph load_graph_json(const std::string& path);

}  // namespace vfrl
