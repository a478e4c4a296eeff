#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfrl/rng.hpp"
#include "vfrl/types.hpp"

namespace vfrl {

// State-space partition backing the abstract policy graph. Every state maps
// to exactly one cluster id in [0, cluster_count()).
class Clustering {
public:
    virtual ~Clustering() = default;
    virtual int assign(const Vec& s) const = 0;
    virtual int cluster_count() const = 0;
    virtual std::string method() const = 0;
    virtual nlohmann::ordered_json to_json() const = 0;
    virtual std::unique_ptr<Clustering> clone() const = 0;

    static std::unique_ptr<Clustering> from_json(const nlohmann::ordered_json& j);
};

// Binary tree of axis-aligned splits grown greedily: at each step the leaf
// split with the largest within-cluster variance (SSE) reduction is applied,
// subject to min_points_per_leaf, until max_leaves is reached.
class ClusterTree : public Clustering {
public:
    struct Node {
        int feature = -1;      // -1 marks a leaf
        double threshold = 0.0;
        int left = -1, right = -1;
        int leaf_id = -1;
    };

    ClusterTree(std::vector<Node> nodes, int leaves) : nodes_(std::move(nodes)), leaves_(leaves) {}

    int assign(const Vec& s) const override;
    int cluster_count() const override { return leaves_; }
    std::string method() const override { return "tree"; }
    nlohmann::ordered_json to_json() const override;
    std::unique_ptr<Clustering> clone() const override { return std::make_unique<ClusterTree>(*this); }
    const std::vector<Node>& nodes() const { return nodes_; }

private:
    std::vector<Node> nodes_;
    int leaves_;
};

class KMeansClusters : public Clustering {
public:
    explicit KMeansClusters(std::vector<Vec> centroids) : centroids_(std::move(centroids)) {}

    int assign(const Vec& s) const override;
    int cluster_count() const override { return static_cast<int>(centroids_.size()); }
    std::string method() const override { return "kmeans"; }
    nlohmann::ordered_json to_json() const override;
    std::unique_ptr<Clustering> clone() const override {
        return std::make_unique<KMeansClusters>(*this);
    }
    const std::vector<Vec>& centroids() const { return centroids_; }

private:
    std::vector<Vec> centroids_;
};

// method is "tree" or "kmeans" (Lloyd's with k = max_leaves, 10 restarts,
// best inertia kept).
std::unique_ptr<Clustering> fit_clusters(const std::vector<Vec>& states, const std::string& method,
                                         const RunConfig& cfg, Rng& rng);
std::unique_ptr<Clustering> fit_clusters(const TrajectoryDataset& dataset, const std::string& method,
                                         const RunConfig& cfg, Rng& rng);

}  // namespace vfrl
