#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vfrl/env.hpp"

using namespace vfrl;

namespace {

RunConfig cfg_for(const std::string& env, double sigma = 0.01, bool planted = false) {
    RunConfig cfg;
    cfg.env = env;
    cfg.env_noise_sigma = sigma;
    cfg.env_planted_hazard = planted;
    return cfg;
}

}  // namespace

TEST_CASE("point-mass init distribution reproduces exactly") {
    NavEnv env(NavEnv::Variant::Nav, 0.0, false);
    NavLayout layout = env.layout();
    layout.deploy_start = {0.1, 0.1, 0.1, 0.1};
    env.set_layout(layout);
    Rng rng(3);
    const Vec s = env.sample_init(rng);
    CHECK(s == Vec{0.1, 0.1, 0.0, 0.0});
}

TEST_CASE("same seed gives identical resets") {
    for (const auto& name : {"nav2", "maze", "dose", "grid"}) {
        const auto env = make_env(cfg_for(name));
        Rng a(11), b(11);
        CHECK(env->sample_init(a) == env->sample_init(b));
    }
}

TEST_CASE("dose init glucose respects the configured range") {
    DoseEnv env(0.01, false);
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const Vec s = env.sample_init(rng);
        CHECK(s[0] >= 85.0);
        CHECK(s[0] <= 95.0);
    }
}

TEST_CASE("nav zero action from rest with zero noise keeps the position") {
    NavEnv env(NavEnv::Variant::Nav, 0.0, false);
    const Vec s{0.3, 0.3, 0.0, 0.0};
    // Arm 24 is the center bin of the 7x7 grid: zero acceleration.
    const Vec a = env.arm_action(24);
    CHECK(a[0] == doctest::Approx(0.0));
    CHECK(a[1] == doctest::Approx(0.0));
    const StepResult r = env.step_mean(s, 24);
    CHECK(r.s_next[0] == doctest::Approx(0.3));
    CHECK(r.s_next[1] == doctest::Approx(0.3));
}

TEST_CASE("nav hazard radius emits unit cost") {
    NavEnv env(NavEnv::Variant::Nav, 0.0, false);
    const auto& d = env.layout().obstacles.front();
    const Vec inside{d.cx + 0.8 * d.hazard_r, d.cy, 0.0, 0.0};
    const StepResult r = env.step_mean(inside, 24);
    CHECK(r.cost[0] == doctest::Approx(1.0));
}

TEST_CASE("dose euler update: glucose 80, dose 0, no meal, drift +2") {
    DoseEnv env(0.0, false);
    // Start mid-day, away from meal ticks: tick 30 of 144.
    const Vec s{80.0, 0.0, 80.0, 0.0, 30.0 / 144.0};
    const StepResult r = env.step_mean(s, 0);
    // gut = 0 and dose = 0 leave only the +2 drift; 82 is inside [65, 105].
    CHECK(r.s_next[0] == doctest::Approx(82.0));
    CHECK(r.cost[0] == doctest::Approx(0.0));
    CHECK(r.cost[1] == doctest::Approx(0.0));
}

TEST_CASE("dose cost flags exactly the out-of-range states") {
    DoseEnv env(0.0, false);
    const Vec low{60.0, 0.0, 60.0, 0.0, 0.2};
    StepResult r = env.step_mean(low, 0);  // 60 + 2 = 62 < 65
    CHECK(r.cost[0] == doctest::Approx(1.0));
    CHECK(r.cost[1] == doctest::Approx(0.0));
    const Vec high{120.0, 0.0, 120.0, 0.0, 0.2};
    r = env.step_mean(high, 0);  // 122 > 105
    CHECK(r.cost[0] == doctest::Approx(0.0));
    CHECK(r.cost[1] == doctest::Approx(1.0));
}

TEST_CASE("set_state then a zero-noise step applies the documented dynamics") {
    NavEnv env(NavEnv::Variant::Nav, 0.0, false);
    EnvSession session(env);
    session.set_state({0.2, 0.2, 0.05, 0.0});
    Rng rng(1);
    const StepResult r = session.step(24, rng);  // zero acceleration
    // Velocity decays by the documented drag factor, then moves the point.
    CHECK(r.s_next[2] == doctest::Approx(0.8 * 0.05));
    CHECK(r.s_next[0] == doctest::Approx(0.2 + 0.8 * 0.05));
    CHECK(r.s_next[1] == doctest::Approx(0.2));
    CHECK(session.steps() == 1);
}

TEST_CASE("off-dataset states are accepted when in bounds, NaN rejected") {
    NavEnv env(NavEnv::Variant::Nav, 0.01, true);
    EnvSession session(env);
    session.set_state({0.9, 0.1, 0.0, 0.0});  // nowhere near the start strip
    CHECK_FALSE(session.done());
    CHECK_THROWS_WITH_AS(session.set_state({0.1, std::nan(""), 0.0, 0.0}),
                         doctest::Contains("dimension 1"), Error);
    CHECK_THROWS_AS(session.set_state({0.1, 0.1}), Error);
}

TEST_CASE("invalid arm is rejected with its index") {
    NavEnv env(NavEnv::Variant::Nav, 0.0, false);
    EnvSession session(env);
    session.set_state({0.5, 0.1, 0.0, 0.0});
    Rng rng(1);
    CHECK_THROWS_WITH_AS(session.step(49, rng), doctest::Contains("49"), Error);
}

TEST_CASE("horizon terminates every environment") {
    for (const auto& name : {"nav2", "maze", "dose", "grid"}) {
        const auto env = make_env(cfg_for(name));
        EnvSession session(*env);
        Rng rng(9);
        session.reset(rng);
        int steps = 0;
        while (!session.done()) {
            session.step(0, rng);
            ++steps;
            REQUIRE(steps <= env->spec().horizon);
        }
        CHECK(steps <= env->spec().horizon);
    }
}

TEST_CASE("property: costs non-negative, states clamped, goal and unsafe disjoint") {
    for (const auto& name : {"nav2", "maze", "dose", "grid"}) {
        const auto env = make_env(cfg_for(name, 0.02, true));
        Rng rng(31);
        EnvSession session(*env);
        session.reset(rng);
        for (int i = 0; i < 10000; ++i) {
            if (session.done()) session.reset(rng);
            const int arm = rng.uniform_int(env->arm_count());
            const StepResult r = session.step(arm, rng);
            for (double c : r.cost) REQUIRE(c >= 0.0);
            REQUIRE(env->clip_state(r.s_next) == r.s_next);
            const bool both = env->goal(r.s_next) && env->unsafe(r.s_next);
            REQUIRE_FALSE(both);
        }
    }
}

TEST_CASE("maze walls block instead of teleporting") {
    NavEnv env(NavEnv::Variant::Maze, 0.0, false);
    const auto& w = env.layout().walls.front();
    // Below the wall, moving straight up at full speed.
    const Vec s{0.7, w.y0 - 0.02, 0.0, env.max_speed()};
    const StepResult r = env.step_mean(s, 24);
    CHECK(r.s_next[1] < w.y0);          // stopped at the contact face
    CHECK(r.s_next[1] >= w.y0 - 0.021);  // no teleport backwards either
    CHECK(r.cost[1] == doctest::Approx(1.0));
    CHECK_FALSE(env.unsafe(r.s_next));
}

TEST_CASE("planted variants hold the hazard out of the dataset start strip") {
    NavEnv env(NavEnv::Variant::Nav, 0.01, true);
    REQUIRE(env.layout().obstacles.size() == 2);
    Rng rng(13);
    for (int i = 0; i < 200; ++i) {
        const Vec s = env.sample_dataset_init(rng);
        CHECK(s[0] <= 0.25);  // the deployment strip extends to 0.60
    }
}

TEST_CASE("grid enumerates all states and moves deterministically") {
    GridEnv env(false);
    CHECK(env.enumerate_states().size() == 64);
    const Vec s{3.0, 3.0};
    CHECK(env.step_mean(s, 0).s_next == Vec{2.0, 3.0});
    CHECK(env.step_mean(s, 1).s_next == Vec{4.0, 3.0});
    CHECK(env.step_mean(s, 2).s_next == Vec{3.0, 2.0});
    CHECK(env.step_mean(s, 3).s_next == Vec{3.0, 4.0});
    // Bumping the edge stays put.
    CHECK(env.step_mean({0.0, 0.0}, 0).s_next == Vec{0.0, 0.0});
    CHECK(env.goal({7.0, 7.0}));
    CHECK(env.unsafe({5.0, 2.0}));
}
