#include <cmath>

#include "vfrl/env.hpp"

namespace vfrl {

namespace {

// Hazard cells sit on the down-then-right shortest paths the reward-greedy
// policy takes, so some start cells produce unsafe trajectories.
constexpr int kHazards[][2] = {{5, 2}, {3, 4}};
constexpr int kPlantedHazard[2] = {2, 7};
constexpr int kGoal[2] = {7, 7};

}  // namespace

GridEnv::GridEnv(bool planted_hazard) : planted_(planted_hazard) {
    spec_.state_dim = 2;
    spec_.action_space.discrete = true;
    spec_.action_space.arms = 4;
    spec_.gamma = 0.98;
    spec_.gamma_risk = 0.99;
    spec_.horizon = 20;
    spec_.cost_names = {"hazard"};
}

bool GridEnv::hazard_at(int row, int col) const {
    for (const auto& h : kHazards)
        if (row == h[0] && col == h[1]) return true;
    if (planted_ && row == kPlantedHazard[0] && col == kPlantedHazard[1]) return true;
    return false;
}

Vec GridEnv::encode_action(const Vec& a) const {
    Vec enc(4, 0.0);
    const int arm = static_cast<int>(std::lround(a.at(0)));
    if (arm < 0 || arm >= 4) throw Error("grid: stored action outside the 4-arm set");
    enc[arm] = 1.0;
    return enc;
}

Vec GridEnv::sample_init(Rng& rng) const {
    while (true) {
        const int row = rng.uniform_int(kSize);
        const int col = rng.uniform_int(kSize);
        if (row == kGoal[0] && col == kGoal[1]) continue;
        return {static_cast<double>(row), static_cast<double>(col)};
    }
}

Vec GridEnv::sample_dataset_init(Rng& rng) const {
    while (true) {
        const int row = rng.uniform_int(kSize);
        const int col = rng.uniform_int(planted_ ? 6 : kSize);  // planted: right columns held out
        if (row == kGoal[0] && col == kGoal[1]) continue;
        return {static_cast<double>(row), static_cast<double>(col)};
    }
}

StepResult GridEnv::step(const Vec& s, int arm, Rng& rng) const {
    (void)rng;  // deterministic dynamics
    return step_mean(s, arm);
}

StepResult GridEnv::step_mean(const Vec& s, int arm) const {
    check_state(s);
    check_arm(arm);
    int row = static_cast<int>(std::lround(s[0]));
    int col = static_cast<int>(std::lround(s[1]));
    int nrow = row, ncol = col;
    switch (arm) {
        case 0: nrow = row - 1; break;
        case 1: nrow = row + 1; break;
        case 2: ncol = col - 1; break;
        case 3: ncol = col + 1; break;
        default: break;
    }
    if (nrow < 0 || nrow >= kSize || ncol < 0 || ncol >= kSize) {
        nrow = row;
        ncol = col;
    }
    StepResult out;
    out.s_next = {static_cast<double>(nrow), static_cast<double>(ncol)};
    out.cost = {hazard_at(nrow, ncol) ? 1.0 : 0.0};
    const bool at_goal = nrow == kGoal[0] && ncol == kGoal[1];
    out.reward = (at_goal ? 1.0 : 0.0) - 0.02;
    out.done = at_goal;
    return out;
}

bool GridEnv::goal(const Vec& s) const {
    return static_cast<int>(std::lround(s[0])) == kGoal[0] &&
           static_cast<int>(std::lround(s[1])) == kGoal[1];
}

bool GridEnv::unsafe(const Vec& s) const {
    return hazard_at(static_cast<int>(std::lround(s[0])), static_cast<int>(std::lround(s[1])));
}

Vec GridEnv::clip_state(Vec s) const {
    s.resize(2, 0.0);
    for (double& v : s) {
        v = std::lround(v);
        if (v < 0.0) v = 0.0;
        if (v > kSize - 1) v = kSize - 1;
    }
    return s;
}

std::vector<Predicate> GridEnv::predicates() const {
    const GridEnv copy = *this;
    std::vector<Predicate> out;
    out.push_back({"on_hazard", [copy](const Vec& s) { return copy.unsafe(s); }});
    out.push_back({"right_half", [](const Vec& s) { return s[1] >= kSize / 2; }});
    out.push_back({"bottom_half", [](const Vec& s) { return s[0] >= kSize / 2; }});
    return out;
}

std::vector<Vec> GridEnv::enumerate_states() const {
    std::vector<Vec> out;
    out.reserve(kSize * kSize);
    for (int r = 0; r < kSize; ++r)
        for (int c = 0; c < kSize; ++c)
            out.push_back({static_cast<double>(r), static_cast<double>(c)});
    return out;
}

}  // namespace vfrl
