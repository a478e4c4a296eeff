#include <algorithm>
#include <cmath>

#include "vfrl/env.hpp"

namespace vfrl {

namespace {

constexpr double kAbsorptionGain = 0.30;
constexpr double kInsulinSensitivity = 2.5;  // mg/dL drop per dose unit per tick
constexpr double kDrift = 2.0;               // mg/dL per tick
constexpr double kGutDecay = 0.25;
constexpr int kMealTicks[3] = {12, 42, 78};

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

DoseEnv::DoseEnv(double noise_sigma, bool planted_hazard)
    : noise_sigma_(noise_sigma), planted_(planted_hazard) {
    spec_.state_dim = 5;  // glucose, gut, prev glucose, meal flag, time
    spec_.action_space.discrete = true;
    spec_.action_space.arms = 21;
    spec_.gamma = 0.98;
    spec_.gamma_risk = 0.99;
    spec_.horizon = kTicks;
    spec_.cost_names = {"hypo", "hyper"};
}

Vec DoseEnv::arm_action(int arm) const {
    check_arm(arm);
    return {static_cast<double>(arm)};
}

Vec DoseEnv::encode_action(const Vec& a) const {
    Vec enc(21, 0.0);
    const int arm = static_cast<int>(std::lround(a.at(0)));
    if (arm < 0 || arm >= 21) throw Error("dose: stored action outside the 21-arm set");
    enc[arm] = 1.0;
    return enc;
}

Vec DoseEnv::sample_init(Rng& rng) const {
    return {rng.uniform(85.0, 95.0), 0.0, rng.uniform(85.0, 95.0), 0.0, 0.0};
}

Vec DoseEnv::sample_dataset_init(Rng& rng) const { return sample_init(rng); }

Vec DoseEnv::sample_explore(Rng& rng) const {
    const double glucose = rng.uniform(55.0, 220.0);
    const int tick = rng.uniform_int(kTicks);
    return {glucose, rng.uniform(0.0, 60.0), glucose + rng.uniform(-10.0, 10.0), 0.0,
            static_cast<double>(tick) / kTicks};
}

double DoseEnv::meal_carbs(int tick, Rng& rng, bool planted_scale) const {
    for (int m : kMealTicks)
        if (tick == m) return planted_scale ? rng.uniform(25.0, 70.0) : rng.uniform(25.0, 45.0);
    return 0.0;
}

StepResult DoseEnv::step(const Vec& s, int arm, Rng& rng) const {
    check_state(s);
    check_arm(arm);
    const int tick = static_cast<int>(std::lround(s[4] * kTicks));
    const double carbs = meal_carbs(tick, rng, planted_);
    const double noise = noise_sigma_ > 0.0 ? rng.normal(0.0, noise_sigma_ * 100.0) : 0.0;
    StepResult r = advance(s, arm, noise);
    // Meals land in the gut compartment after the deterministic core update.
    if (carbs > 0.0) {
        r.s_next[1] += carbs;
        r.s_next[3] = 1.0;
    }
    return r;
}

StepResult DoseEnv::step_mean(const Vec& s, int arm) const {
    check_state(s);
    check_arm(arm);
    return advance(s, arm, 0.0);
}

StepResult DoseEnv::advance(const Vec& s, int arm, double noise) const {
    const double glucose = s[0];
    const double gut = s[1];
    const double dose = 0.5 * arm;
    const int tick = static_cast<int>(std::lround(s[4] * kTicks));

    const double next_gut = gut * (1.0 - kGutDecay);
    const double next_glucose = clampd(
        glucose + kAbsorptionGain * gut - kInsulinSensitivity * dose + kDrift + noise, 10.0, 600.0);

    StepResult out;
    out.s_next = {next_glucose, next_gut, glucose, 0.0,
                  static_cast<double>(tick + 1) / kTicks};
    const bool hypo = next_glucose < kRangeLo;
    const bool hyper = next_glucose > kRangeHi;
    out.cost = {hypo ? 1.0 : 0.0, hyper ? 1.0 : 0.0};
    out.reward = (hypo || hyper) ? -std::fabs(next_glucose - clampd(next_glucose, kRangeLo, kRangeHi)) / 10.0
                                 : 1.0;
    out.done = false;  // violations are non-terminal; the day runs to its end
    return out;
}

bool DoseEnv::goal(const Vec& s) const {
    return s[4] >= 1.0 - 0.5 / kTicks && s[0] >= kRangeLo && s[0] <= kRangeHi;
}

bool DoseEnv::unsafe(const Vec& s) const { return s[0] <= 50.0 || s[0] >= 250.0; }

Vec DoseEnv::clip_state(Vec s) const {
    s.resize(5, 0.0);
    s[0] = clampd(s[0], 10.0, 600.0);
    s[1] = clampd(s[1], 0.0, 300.0);
    s[2] = clampd(s[2], 10.0, 600.0);
    s[3] = clampd(s[3], 0.0, 1.0);
    s[4] = clampd(s[4], 0.0, 1.0);
    return s;
}

std::vector<Predicate> DoseEnv::predicates() const {
    std::vector<Predicate> out;
    out.push_back({"glucose_low", [](const Vec& s) { return s[0] < kRangeLo; }});
    out.push_back({"glucose_high", [](const Vec& s) { return s[0] > kRangeHi; }});
    out.push_back({"in_range", [](const Vec& s) { return s[0] >= kRangeLo && s[0] <= kRangeHi; }});
    out.push_back({"meal_active", [](const Vec& s) { return s[1] > 5.0; }});
    out.push_back({"morning", [](const Vec& s) { return s[4] < 1.0 / 3.0; }});
    return out;
}

}  // namespace vfrl
