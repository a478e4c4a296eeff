#include "vfrl/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vfrl/kernels.hpp"

namespace vfrl {

int ClusterTree::assign(const Vec& s) const {
    int node = 0;
    while (nodes_[node].feature >= 0) {
        const auto& nd = nodes_[node];
        node = s.at(nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    return nodes_[node].leaf_id;
}

nlohmann::ordered_json ClusterTree::to_json() const {
    nlohmann::ordered_json j;
    j["method"] = "tree";
    j["leaves"] = leaves_;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& nd : nodes_) {
        nlohmann::ordered_json n;
        n["feature"] = nd.feature;
        n["threshold"] = nd.threshold;
        n["left"] = nd.left;
        n["right"] = nd.right;
        n["leaf_id"] = nd.leaf_id;
        arr.push_back(n);
    }
    j["nodes"] = arr;
    return j;
}

int KMeansClusters::assign(const Vec& s) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < cluster_count(); ++c) {
        const double d = kernels::sq_dist(s.size(), s.data(), centroids_[c].data());
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

nlohmann::ordered_json KMeansClusters::to_json() const {
    nlohmann::ordered_json j;
    j["method"] = "kmeans";
    j["centroids"] = centroids_;
    return j;
}

std::unique_ptr<Clustering> Clustering::from_json(const nlohmann::ordered_json& j) {
    const std::string method = j.at("method");
    if (method == "tree") {
        std::vector<ClusterTree::Node> nodes;
        for (const auto& n : j.at("nodes")) {
            ClusterTree::Node nd;
            nd.feature = n.at("feature");
            nd.threshold = n.at("threshold");
            nd.left = n.at("left");
            nd.right = n.at("right");
            nd.leaf_id = n.at("leaf_id");
            nodes.push_back(nd);
        }
        return std::make_unique<ClusterTree>(std::move(nodes), j.at("leaves").get<int>());
    }
    if (method == "kmeans") {
        std::vector<Vec> centroids;
        for (const auto& c : j.at("centroids")) centroids.push_back(c.get<Vec>());
        return std::make_unique<KMeansClusters>(std::move(centroids));
    }
    throw Error("unknown clustering method '" + method + "'");
}

namespace {

struct TreeBuilder {
    const std::vector<Vec>& states;
    int dims;
    int min_points;

    struct Split {
        double reduction = -1.0;
        int feature = -1;
        double threshold = 0.0;
    };

    double sse(const std::vector<std::size_t>& ids) const {
        double total = 0.0;
        for (int d = 0; d < dims; ++d) {
            double sum = 0.0, sum2 = 0.0;
            for (std::size_t i : ids) {
                const double v = states[i][d];
                sum += v;
                sum2 += v * v;
            }
            total += sum2 - sum * sum / static_cast<double>(ids.size());
        }
        return total;
    }

    Split best_split(const std::vector<std::size_t>& ids) const {
        Split best;
        if (ids.size() < 2 * static_cast<std::size_t>(min_points)) return best;
        const std::size_t n = ids.size();
        std::vector<std::size_t> order(ids);
        std::vector<double> pre_sum(dims), pre_sum2(dims), tot_sum(dims), tot_sum2(dims);
        for (int f = 0; f < dims; ++f) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return states[a][f] < states[b][f] || (states[a][f] == states[b][f] && a < b);
            });
            std::fill(pre_sum.begin(), pre_sum.end(), 0.0);
            std::fill(pre_sum2.begin(), pre_sum2.end(), 0.0);
            for (int d = 0; d < dims; ++d) {
                double s = 0.0, s2 = 0.0;
                for (std::size_t i : order) {
                    s += states[i][d];
                    s2 += states[i][d] * states[i][d];
                }
                tot_sum[d] = s;
                tot_sum2[d] = s2;
            }
            const double parent = [&] {
                double t = 0.0;
                for (int d = 0; d < dims; ++d)
                    t += tot_sum2[d] - tot_sum[d] * tot_sum[d] / static_cast<double>(n);
                return t;
            }();
            for (std::size_t cut = 1; cut < n; ++cut) {
                const std::size_t i = order[cut - 1];
                for (int d = 0; d < dims; ++d) {
                    pre_sum[d] += states[i][d];
                    pre_sum2[d] += states[i][d] * states[i][d];
                }
                if (cut < static_cast<std::size_t>(min_points) ||
                    n - cut < static_cast<std::size_t>(min_points))
                    continue;
                const double lo = states[order[cut - 1]][f];
                const double hi = states[order[cut]][f];
                if (lo == hi) continue;  // cannot separate identical values
                double child = 0.0;
                for (int d = 0; d < dims; ++d) {
                    const double ls = pre_sum[d], ls2 = pre_sum2[d];
                    const double rs = tot_sum[d] - ls, rs2 = tot_sum2[d] - ls2;
                    child += ls2 - ls * ls / static_cast<double>(cut);
                    child += rs2 - rs * rs / static_cast<double>(n - cut);
                }
                const double reduction = parent - child;
                if (reduction > best.reduction + 1e-12) {
                    best.reduction = reduction;
                    best.feature = f;
                    best.threshold = 0.5 * (lo + hi);
                }
            }
        }
        return best;
    }
};

}  // namespace

std::unique_ptr<Clustering> fit_clusters(const std::vector<Vec>& states, const std::string& method,
                                         const RunConfig& cfg, Rng& rng) {
    if (states.size() < static_cast<std::size_t>(cfg.min_points_per_leaf))
        throw Error("fit_clusters: fewer states than min_points_per_leaf");
    const int dims = static_cast<int>(states[0].size());

    if (method == "tree") {
        TreeBuilder builder{states, dims, cfg.min_points_per_leaf};
        std::vector<ClusterTree::Node> nodes;
        std::vector<std::vector<std::size_t>> node_members;
        nodes.push_back({});
        node_members.emplace_back(states.size());
        std::iota(node_members[0].begin(), node_members[0].end(), 0);

        struct Candidate {
            double reduction;
            int node;
            TreeBuilder::Split split;
        };
        auto cmp = [](const Candidate& a, const Candidate& b) {
            if (a.reduction != b.reduction) return a.reduction < b.reduction;
            return a.node > b.node;  // lower node id wins ties
        };
        std::vector<Candidate> heap;
        auto consider = [&](int node) {
            const auto split = builder.best_split(node_members[node]);
            if (split.feature >= 0 && split.reduction > 0.0) {
                heap.push_back({split.reduction, node, split});
                std::push_heap(heap.begin(), heap.end(), cmp);
            }
        };
        consider(0);
        int leaves = 1;
        while (leaves < cfg.max_leaves && !heap.empty()) {
            std::pop_heap(heap.begin(), heap.end(), cmp);
            const Candidate cand = heap.back();
            heap.pop_back();
            auto& nd = nodes[cand.node];
            nd.feature = cand.split.feature;
            nd.threshold = cand.split.threshold;
            nd.left = static_cast<int>(nodes.size());
            nd.right = nd.left + 1;
            nodes.push_back({});
            nodes.push_back({});
            node_members.emplace_back();
            node_members.emplace_back();
            for (std::size_t i : node_members[cand.node])
                (states[i][cand.split.feature] <= cand.split.threshold
                     ? node_members[nd.left]
                     : node_members[nd.right])
                    .push_back(i);
            node_members[cand.node].clear();
            ++leaves;
            consider(nd.left);
            consider(nd.right);
        }
        // Leaf ids in node order keeps assignments stable across runs.
        int leaf_id = 0;
        for (auto& nd : nodes)
            if (nd.feature < 0) nd.leaf_id = leaf_id++;
        return std::make_unique<ClusterTree>(std::move(nodes), leaf_id);
    }

    if (method == "kmeans") {
        const int k = std::min<int>(cfg.max_leaves, static_cast<int>(states.size()));
        std::vector<Vec> best_centroids;
        double best_inertia = std::numeric_limits<double>::infinity();
        for (int restart = 0; restart < 10; ++restart) {
            // k-means++ seeding.
            std::vector<Vec> centroids;
            centroids.push_back(states[static_cast<std::size_t>(
                rng.uniform_int(static_cast<int>(states.size())))]);
            std::vector<double> d2(states.size());
            while (static_cast<int>(centroids.size()) < k) {
                double total = 0.0;
                for (std::size_t i = 0; i < states.size(); ++i) {
                    double best_d = std::numeric_limits<double>::infinity();
                    for (const auto& c : centroids)
                        best_d = std::min(best_d,
                                          kernels::sq_dist(states[i].size(), states[i].data(), c.data()));
                    d2[i] = best_d;
                    total += best_d;
                }
                if (total <= 0.0) {
                    centroids.push_back(states[static_cast<std::size_t>(
                        rng.uniform_int(static_cast<int>(states.size())))]);
                    continue;
                }
                double pick = rng.uniform01() * total;
                std::size_t chosen = states.size() - 1;
                for (std::size_t i = 0; i < states.size(); ++i) {
                    pick -= d2[i];
                    if (pick <= 0.0) {
                        chosen = i;
                        break;
                    }
                }
                centroids.push_back(states[chosen]);
            }

            std::vector<int> assign(states.size(), -1);
            for (int iter = 0; iter < 100; ++iter) {
                bool changed = false;
                for (std::size_t i = 0; i < states.size(); ++i) {
                    int best = 0;
                    double best_d = std::numeric_limits<double>::infinity();
                    for (int c = 0; c < k; ++c) {
                        const double d =
                            kernels::sq_dist(states[i].size(), states[i].data(), centroids[c].data());
                        if (d < best_d) {
                            best_d = d;
                            best = c;
                        }
                    }
                    if (assign[i] != best) {
                        assign[i] = best;
                        changed = true;
                    }
                }
                std::vector<Vec> sums(k, Vec(dims, 0.0));
                std::vector<int> counts(k, 0);
                for (std::size_t i = 0; i < states.size(); ++i) {
                    kernels::axpy(states[i].size(), 1.0, states[i].data(), sums[assign[i]].data());
                    ++counts[assign[i]];
                }
                for (int c = 0; c < k; ++c) {
                    if (counts[c] == 0) continue;  // empty clusters are compacted away below
                    for (int d = 0; d < dims; ++d) centroids[c][d] = sums[c][d] / counts[c];
                }
                if (!changed) break;
            }
            double inertia = 0.0;
            for (std::size_t i = 0; i < states.size(); ++i)
                inertia += kernels::sq_dist(states[i].size(), states[i].data(),
                                            centroids[assign[i]].data());
            if (inertia < best_inertia) {
                best_inertia = inertia;
                // Drop centroids that own no points.
                std::vector<int> counts(k, 0);
                for (int a : assign) ++counts[a];
                best_centroids.clear();
                for (int c = 0; c < k; ++c)
                    if (counts[c] > 0) best_centroids.push_back(centroids[c]);
            }
        }
        return std::make_unique<KMeansClusters>(std::move(best_centroids));
    }

    throw Error("fit_clusters: unknown method '" + method + "'");
}

std::unique_ptr<Clustering> fit_clusters(const TrajectoryDataset& dataset, const std::string& method,
                                         const RunConfig& cfg, Rng& rng) {
    std::vector<Vec> states;
    states.reserve(dataset.transitions.size());
    for (const Transition& t : dataset.transitions) states.push_back(t.s);
    return fit_clusters(states, method, cfg, rng);
}

}  // namespace vfrl
