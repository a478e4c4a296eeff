#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "vfrl/types.hpp"

namespace vfrl {

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error(key + " must be true or false");
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw Error("");
        return d;
    } catch (const std::exception&) {
        throw Error(key + " must be a number");
    }
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const int i = std::stoi(v, &pos);
        if (pos != v.size()) throw Error("");
        return i;
    } catch (const std::exception&) {
        throw Error(key + " must be an integer");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const std::uint64_t u = std::stoull(v, &pos);
        if (pos != v.size()) throw Error("");
        return u;
    } catch (const std::exception&) {
        throw Error(key + " must be a non-negative integer");
    }
}

}  // namespace

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "env") cfg.env = value;
    else if (key == "env.noise_sigma") cfg.env_noise_sigma = parse_double(key, value);
    else if (key == "env.planted_hazard") cfg.env_planted_hazard = parse_bool(key, value);
    else if (key == "env.obstacles") cfg.env_obstacles = parse_bool(key, value);
    else if (key == "N") cfg.n_seeds = parse_int(key, value);
    else if (key == "L") cfg.depth_limit = parse_int(key, value);
    else if (key == "delta") {
        if (value == "auto") {
            cfg.delta_auto = true;
        } else {
            cfg.delta = parse_double(key, value);
            cfg.delta_auto = false;
        }
    } else if (key == "alpha_mut") cfg.alpha_mut = parse_double(key, value);
    else if (key == "alpha_risk") cfg.alpha_risk = parse_double(key, value);
    else if (key == "epsilon") {
        cfg.shield_epsilon = value == "inf" ? std::numeric_limits<double>::infinity()
                                            : parse_double(key, value);
    } else if (key == "lambda") cfg.shield_lambda = parse_double(key, value);
    else if (key == "p") cfg.pctl_p = parse_double(key, value);
    else if (key == "K") cfg.ensemble_k = parse_int(key, value);
    else if (key == "budget") cfg.budget = parse_int(key, value);
    else if (key == "gamma") cfg.gamma = parse_double(key, value);
    else if (key == "gamma_risk") cfg.gamma_risk = parse_double(key, value);
    else if (key == "tau") cfg.tau = parse_double(key, value);
    else if (key == "embed_dim") cfg.embed_dim = parse_int(key, value);
    else if (key == "sigma_aug") cfg.sigma_aug = parse_double(key, value);
    else if (key == "contrast_temp") cfg.contrast_temp = parse_double(key, value);
    else if (key == "contrast_batch") cfg.contrast_batch = parse_int(key, value);
    else if (key == "max_leaves") cfg.max_leaves = parse_int(key, value);
    else if (key == "min_points_per_leaf") cfg.min_points_per_leaf = parse_int(key, value);
    else if (key == "train_episodes") cfg.train_episodes = parse_int(key, value);
    else if (key == "dataset_episodes") cfg.dataset_episodes = parse_int(key, value);
    else if (key == "critic_tol") cfg.critic_tol = parse_double(key, value);
    else if (key == "strategy") cfg.strategy = value;
    else if (key == "cluster_method") cfg.cluster_method = value;
    else if (key == "cost_channel") cfg.cost_channel = CostChannel::parse(value);
    else if (key == "workers") cfg.workers = parse_int(key, value);
    else if (key == "counterexample_k") cfg.counterexample_k = parse_int(key, value);
    else if (key == "force_falsify") cfg.force_falsify = parse_bool(key, value);
    else if (key == "shield.enabled") cfg.shield_enabled = parse_bool(key, value);
    else if (key == "timings") cfg.timings = parse_bool(key, value);
    else if (key == "run_id") cfg.run_id = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else throw Error("unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(origin + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw Error(origin + ":" + std::to_string(lineno) + ": empty key");
        try {
            apply_config_kv(cfg, key, value);
        } catch (const Error& e) {
            throw Error(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

void RunConfig::validate() const {
    if (n_seeds < 1) throw Error("N must be >= 1");
    if (depth_limit < 1) throw Error("L must be >= 1");
    if (!delta_auto && !(delta >= 0.0)) throw Error("delta must be >= 0");
    if (!(alpha_mut > 0.0)) throw Error("alpha_mut must be > 0");
    if (!(alpha_risk >= 0.0)) throw Error("alpha_risk must be >= 0");
    if (!(shield_lambda > 0.0)) throw Error("lambda must be > 0");
    if (budget < n_seeds) throw Error("budget must be >= N");
    if (!(pctl_p >= 0.0 && pctl_p <= 1.0)) throw Error("p must be in [0,1]");
    if (ensemble_k < 2) throw Error("K must be >= 2");
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error("gamma must be in (0,1)");
    if (!(gamma_risk > 0.0 && gamma_risk < 1.0)) throw Error("gamma_risk must be in (0,1)");
    if (!(tau > 0.0)) throw Error("tau must be > 0");
    if (embed_dim < 1) throw Error("embed_dim must be >= 1");
    if (!(sigma_aug >= 0.0)) throw Error("sigma_aug must be >= 0");
    if (!(contrast_temp > 0.0)) throw Error("contrast_temp must be > 0");
    if (contrast_batch < 2) throw Error("contrast_batch must be >= 2");
    if (max_leaves < 1) throw Error("max_leaves must be >= 1");
    if (min_points_per_leaf < 1) throw Error("min_points_per_leaf must be >= 1");
    if (train_episodes < 1) throw Error("train_episodes must be >= 1");
    if (dataset_episodes < 1) throw Error("dataset_episodes must be >= 1");
    if (!(critic_tol > 0.0)) throw Error("critic_tol must be > 0");
    if (strategy != "combined" && strategy != "uncertainty" && strategy != "fuzz")
        throw Error("strategy must be combined, uncertainty or fuzz");
    if (cluster_method != "tree" && cluster_method != "kmeans")
        throw Error("cluster_method must be tree or kmeans");
    if (env != "nav2" && env != "maze" && env != "dose" && env != "grid")
        throw Error("env must be nav2, maze, dose or grid");
    if (workers < 1) throw Error("workers must be >= 1");
    if (counterexample_k < 1) throw Error("counterexample_k must be >= 1");
}

std::string RunConfig::snapshot() const {
    std::ostringstream out;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%" PRIu64, static_cast<std::uint64_t>(seed));
    out << "seed=" << buf << "\n";
    out << "env=" << env << "\n";
    out << "env.noise_sigma=" << format_double(env_noise_sigma) << "\n";
    out << "env.planted_hazard=" << (env_planted_hazard ? "true" : "false") << "\n";
    out << "env.obstacles=" << (env_obstacles ? "true" : "false") << "\n";
    out << "N=" << n_seeds << "\n";
    out << "L=" << depth_limit << "\n";
    out << "delta=" << (delta_auto ? std::string("auto") : format_double(delta)) << "\n";
    out << "alpha_mut=" << format_double(alpha_mut) << "\n";
    out << "alpha_risk=" << format_double(alpha_risk) << "\n";
    out << "epsilon="
        << (std::isinf(shield_epsilon) ? std::string("inf") : format_double(shield_epsilon)) << "\n";
    out << "lambda=" << format_double(shield_lambda) << "\n";
    out << "p=" << format_double(pctl_p) << "\n";
    out << "K=" << ensemble_k << "\n";
    out << "budget=" << budget << "\n";
    out << "gamma=" << format_double(gamma) << "\n";
    out << "gamma_risk=" << format_double(gamma_risk) << "\n";
    out << "tau=" << format_double(tau) << "\n";
    out << "embed_dim=" << embed_dim << "\n";
    out << "sigma_aug=" << format_double(sigma_aug) << "\n";
    out << "contrast_temp=" << format_double(contrast_temp) << "\n";
    out << "contrast_batch=" << contrast_batch << "\n";
    out << "max_leaves=" << max_leaves << "\n";
    out << "min_points_per_leaf=" << min_points_per_leaf << "\n";
    out << "train_episodes=" << train_episodes << "\n";
    out << "dataset_episodes=" << dataset_episodes << "\n";
    out << "critic_tol=" << format_double(critic_tol) << "\n";
    out << "strategy=" << strategy << "\n";
    out << "cluster_method=" << cluster_method << "\n";
    out << "cost_channel=" << cost_channel.to_string() << "\n";
    out << "workers=" << workers << "\n";
    out << "counterexample_k=" << counterexample_k << "\n";
    out << "force_falsify=" << (force_falsify ? "true" : "false") << "\n";
    out << "shield.enabled=" << (shield_enabled ? "true" : "false") << "\n";
    out << "timings=" << (timings ? "true" : "false") << "\n";
    out << "run_id=" << run_id << "\n";
    out << "out_dir=" << out_dir << "\n";
    return out.str();
}

}  // namespace vfrl
