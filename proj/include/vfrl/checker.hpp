#pragma once

#include <optional>

#include "vfrl/graph.hpp"
#include "vfrl/pctl.hpp"

namespace vfrl {

struct CheckResult {
    bool satisfied = false;       // at the INIT node
    std::vector<double> node_probabilities;  // outermost path probability per node
    std::string formula_text;
};

struct CounterexampleTrace {
    std::vector<int> nodes;  // v0 .. vT, edge-connected, containing an unsafe node
    double probability = 0.0;  // product of the edge probabilities along the path
    std::vector<std::vector<std::string>> node_predicates;
    std::vector<double> node_risk;
};

struct CounterexampleResult {
    std::vector<CounterexampleTrace> traces;  // most probable first
    // Set when the violation stems from insufficient goal mass with no unsafe
    // node reachable at all; traces is empty in that case.
    bool goal_unreachable = false;
};

// Evaluates the formula over the graph DTMC. Bounded until runs n backward
// sweeps; unbounded until solves the linear system over the uncertain node
// set (direct elimination up to 500 nodes, Gauss-Seidel to 1e-12 beyond);
// nested P operators evaluate bottom-up.
CheckResult check(const PolicyGraph& graph, const pctl::FormulaPtr& formula);
CheckResult check(const PolicyGraph& graph, const std::string& formula_text);

// Requires a prior violating check of a P-bounded until formula (the Eq-3
// shape P>=p [ safe U goal ]). Returns up to k most probable paths from INIT
// to a state violating the until's left operand, found by shortest-path
// search under -log(probability) edge weights.
CounterexampleResult extract_counterexample(const PolicyGraph& graph,
                                            const pctl::FormulaPtr& formula,
                                            const CheckResult& result, int k = 1);

struct SeedState {
    Vec state;
    std::size_t dataset_index = 0;
    int node = -1;
    double score = 0.0;  // node (1 - satisfaction probability)
};

// Top-N falsification seed states: dataset states ranked by their node's
// violation mass with mean risk as tie-breaker, spread over flagged nodes.
std::vector<SeedState> risk_ranked_states(const PolicyGraph& graph, const CheckResult& result,
                                          const TrajectoryDataset& dataset, int n);

}  // namespace vfrl
