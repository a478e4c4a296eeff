#pragma once

#include "vfrl/checker.hpp"
#include "vfrl/ensemble.hpp"
#include "vfrl/policy.hpp"

namespace vfrl {

struct LatentPoint {
    int violation_id = 0;
    Vec embedding;
};

// Mean Euclidean distance over all unordered point pairs. Needs >= 2 points.
double diversity(const std::vector<LatentPoint>& points);

// Mean Mahalanobis distance of the points from the dataset embedding
// distribution. The covariance gets a 1e-6 ridge only when it is not
// invertible as-is, which keeps the distance exactly affine-invariant on
// well-conditioned data. Needs more dataset embeddings than dimensions.
double novelty(const std::vector<LatentPoint>& points, const std::vector<Vec>& dataset_embeddings);

// Ensemble-mean embeddings of every dataset (s, a) pair.
std::vector<Vec> dataset_latents(const EncoderEnsemble& ens, const TrajectoryDataset& dataset,
                                 const Env& env);

struct PacReport {
    long unsafe_starts = 0;
    long covered = 0;
    double miss_rate = 0.0;
    bool pass = true;  // miss_rate <= delta_claim (vacuously true with no unsafe starts)
};

// Empirical completeness check on an exhaustively enumerable environment:
// enumerate every start state, roll the (deterministic) policy out to the
// horizon, and count unsafe trajectories whose node path intersects the set
// of nodes flagged by the checker or hit by falsifier violations.
PacReport pac_check(const Env& env, const Policy& policy, const PolicyGraph& graph,
                    const CheckResult& check_result, const std::vector<Vec>& falsifier_flagged_states,
                    double delta_claim);

}  // namespace vfrl
