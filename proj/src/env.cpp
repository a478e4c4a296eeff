#include "vfrl/env.hpp"

#include <cmath>

namespace vfrl {

void Env::check_state(const Vec& s) const {
    if (static_cast<int>(s.size()) != spec().state_dim)
        throw Error(name() + ": state has " + std::to_string(s.size()) + " dimensions, expected " +
                    std::to_string(spec().state_dim));
    for (std::size_t d = 0; d < s.size(); ++d)
        if (!std::isfinite(s[d]))
            throw Error(name() + ": non-finite state component in dimension " + std::to_string(d));
}

void Env::check_arm(int arm) const {
    if (arm < 0 || arm >= arm_count())
        throw Error(name() + ": action arm " + std::to_string(arm) + " outside [0, " +
                    std::to_string(arm_count()) + ")");
}

std::unique_ptr<Env> make_env(const RunConfig& cfg) {
    if (cfg.env == "nav2")
        return std::make_unique<NavEnv>(NavEnv::Variant::Nav, cfg.env_noise_sigma,
                                        cfg.env_planted_hazard, cfg.env_obstacles);
    if (cfg.env == "maze")
        return std::make_unique<NavEnv>(NavEnv::Variant::Maze, cfg.env_noise_sigma,
                                        cfg.env_planted_hazard, cfg.env_obstacles);
    if (cfg.env == "dose") return std::make_unique<DoseEnv>(cfg.env_noise_sigma, cfg.env_planted_hazard);
    if (cfg.env == "grid") return std::make_unique<GridEnv>(cfg.env_planted_hazard);
    throw Error("unknown env '" + cfg.env + "'");
}

Vec EnvSession::reset(Rng& rng) {
    state_ = env_->sample_init(rng);
    steps_ = 0;
    done_ = false;
    return state_;
}

Vec EnvSession::reset_dataset(Rng& rng) {
    state_ = env_->sample_dataset_init(rng);
    steps_ = 0;
    done_ = false;
    return state_;
}

void EnvSession::set_state(const Vec& s) {
    env_->check_state(s);
    state_ = s;
    steps_ = 0;
    done_ = false;
}

void EnvSession::override_state(const Vec& s) {
    env_->check_state(s);
    state_ = s;
}

StepResult EnvSession::step(int arm, Rng& rng) {
    if (done_) throw Error(env_->name() + ": step on a finished episode");
    env_->check_arm(arm);
    StepResult r = env_->step(state_, arm, rng);
    ++steps_;
    if (steps_ >= env_->spec().horizon) r.done = true;
    state_ = r.s_next;
    done_ = r.done;
    return r;
}

}  // namespace vfrl
