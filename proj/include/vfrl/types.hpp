#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vfrl/util.hpp"

namespace vfrl {

using Vec = std::vector<double>;

struct BoxBounds {
    Vec lo;
    Vec hi;
};

// Either a discrete arm set or a per-dimension box of continuous controls.
struct ActionSpaceSpec {
    bool discrete = true;
    int arms = 0;     // discrete only
    BoxBounds box;    // continuous only
    int dim() const { return discrete ? 1 : static_cast<int>(box.lo.size()); }
};

struct CmdpSpec {
    int state_dim = 0;
    ActionSpaceSpec action_space;
    double gamma = 0.98;
    double gamma_risk = 0.99;
    int horizon = 1;
    std::vector<std::string> cost_names;

    int cost_dim() const { return static_cast<int>(cost_names.size()); }
    void validate() const;
};

struct Transition {
    Vec s;
    Vec a;  // executed control; single element (the arm index) for discrete spaces
    Vec s_next;
    double r = 0.0;
    Vec c;
    bool done = false;
};

struct TrajectoryDataset {
    int state_dim = 0;
    int action_dim = 0;
    bool discrete_actions = true;
    int cost_dim = 1;
    std::uint64_t seed = 0;
    std::string source_policy_id;
    std::vector<Transition> transitions;
    std::vector<std::size_t> episode_starts;  // index of each episode's first transition

    std::size_t episode_count() const { return episode_starts.size(); }
    // [begin, end) transition indices of episode e.
    std::pair<std::size_t, std::size_t> episode_range(std::size_t e) const;
    void append_episode(std::vector<Transition> episode);
    // Checks record shapes, cost non-negativity and the episode-boundary
    // invariant (each episode ends with done or runs the full horizon).
    void validate(int horizon) const;
};

// How the k cost channels enter verification and falsification: their sum by
// default, or one selected channel.
struct CostChannel {
    bool sum = true;
    int index = 0;
    double scalar(const Vec& c) const;
    static CostChannel parse(const std::string& text);
    std::string to_string() const;
};

struct RunConfig {
    std::uint64_t seed = 1;

    std::string env = "nav2";  // nav2 | maze | dose | grid
    double env_noise_sigma = 0.01;
    bool env_planted_hazard = false;
    bool env_obstacles = true;

    int n_seeds = 20;       // N: falsification seed states
    int depth_limit = 10;   // L: mutation depth limit
    double delta = 0.0;     // uncertainty threshold (when not auto-calibrated)
    bool delta_auto = true;
    double alpha_mut = 0.01;
    double alpha_risk = 0.5;
    double shield_epsilon = 0.5;
    double shield_lambda = 0.1;
    double pctl_p = 0.9;
    int ensemble_k = 5;
    int budget = 100;

    double gamma = 0.98;
    double gamma_risk = 0.99;
    double tau = 0.05;
    int embed_dim = 16;
    double sigma_aug = 0.01;
    double contrast_temp = 0.1;
    int contrast_batch = 128;
    int max_leaves = 40;
    int min_points_per_leaf = 20;
    int train_episodes = 300;
    int dataset_episodes = 150;
    double critic_tol = 1e-2;
    std::string strategy = "combined";     // combined | uncertainty | fuzz
    std::string cluster_method = "tree";   // tree | kmeans
    CostChannel cost_channel;
    int workers = 1;
    int counterexample_k = 1;
    bool force_falsify = false;
    bool shield_enabled = true;
    bool timings = false;
    std::string run_id = "run";
    std::string out_dir = "runs";

    void validate() const;
    // The resolved flat key=value snapshot, in canonical key order.
    std::string snapshot() const;
};

RunConfig load_config(const std::string& path);
// Parses config text; `origin` names the source in error messages.
RunConfig parse_config(const std::string& text, const std::string& origin);
// Applies one key=value pair (used for CLI flag overrides).
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

void write_dataset(const TrajectoryDataset& ds, const std::string& path);
TrajectoryDataset read_dataset(const std::string& path);

}  // namespace vfrl
