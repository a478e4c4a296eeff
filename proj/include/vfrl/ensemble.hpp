#pragma once

#include "vfrl/env.hpp"
#include "vfrl/mlp.hpp"
#include "vfrl/model_io.hpp"

namespace vfrl {

// Ensemble of contrastively trained state/action encoder pairs. Disagreement
// across members (max pairwise squared distance of the joint embeddings)
// serves as the epistemic-uncertainty score for dataset coverage.
class EncoderEnsemble {
public:
    struct Member {
        Mlp state_enc;
        Mlp action_enc;
    };

    EncoderEnsemble() = default;
    EncoderEnsemble(std::vector<Member> members, std::vector<Vec> arm_encodings);

    int size() const { return static_cast<int>(members_.size()); }
    int dim() const { return members_.empty() ? 0 : static_cast<int>(members_[0].state_enc.output_dim()); }

    // Joint embedding of member k: state encoder plus action encoder output.
    Vec embed(int k, const Vec& s, const Vec& action_enc) const;
    Vec mean_embed(const Vec& s, const Vec& action_enc) const;

    // Max over member pairs of the squared Euclidean embedding distance.
    double uncertainty(const Vec& s, int arm) const;
    double uncertainty_encoded(const Vec& s, const Vec& action_enc) const;

    const Vec& arm_encoding(int arm) const { return arm_enc_.at(arm); }

    void save(const std::string& path) const;
    static EncoderEnsemble load(const std::string& path, const Env& env);

private:
    std::vector<Member> members_;
    std::vector<Vec> arm_enc_;
};

struct EnsembleTrainStats {
    std::vector<double> initial_loss;  // per member
    std::vector<double> final_loss;
};

// Trains K members, each on its own bootstrap resample of the dataset with an
// InfoNCE-style objective (positives are two jittered views of the same
// (s, a) pair; other batch elements act as negatives).
EncoderEnsemble train_ensemble(const TrajectoryDataset& dataset, const Env& env, int k,
                               const RunConfig& cfg, Rng& rng, EnsembleTrainStats* stats = nullptr);

struct CoverageReport {
    double in_mean = 0.0, in_median = 0.0;
    double out_mean = 0.0, out_median = 0.0;
    // Fraction of out-of-distribution pairs scoring above the in-distribution
    // 95th percentile.
    double separation = 0.0;
};

// Both sets are (state, action-encoding) pairs.
CoverageReport coverage_report(const EncoderEnsemble& ens,
                               const std::vector<std::pair<Vec, Vec>>& in_dist,
                               const std::vector<std::pair<Vec, Vec>>& out_dist);

// The in-distribution uncertainty quantile used when delta=auto.
double calibrate_delta(const EncoderEnsemble& ens, const TrajectoryDataset& dataset,
                       const Env& env, double quantile = 0.95);

}  // namespace vfrl
