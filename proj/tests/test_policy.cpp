#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vfrl/policy.hpp"

using namespace vfrl;

namespace {

RunConfig base_cfg() {
    RunConfig cfg;
    cfg.train_episodes = 240;
    return cfg;
}

}  // namespace

TEST_CASE("obstacle-free nav reaches the goal almost always") {
    NavEnv env(NavEnv::Variant::Nav, 0.01, false, /*obstacles=*/false);
    Rng rng(1);
    const auto tp = train_task_policy(env, 240, base_cfg(), rng);
    Rng eval_rng(100);
    const double rate = evaluate_goal_rate(env, *tp.policy, 100, eval_rng);
    MESSAGE("obstacle-free goal rate: ", rate);
    CHECK(rate >= 0.95);
}

TEST_CASE("default nav and maze layouts clear the 70 percent bar") {
    for (const char* name : {"nav2", "maze"}) {
        RunConfig cfg = base_cfg();
        cfg.env = name;
        const auto env = make_env(cfg);
        Rng rng(2);
        const auto tp = train_task_policy(*env, cfg.train_episodes, cfg, rng);
        Rng eval_rng(101);
        const double rate = evaluate_goal_rate(*env, *tp.policy, 100, eval_rng);
        MESSAGE(name, " goal rate: ", rate);
        CHECK(rate >= 0.7);
    }
}

TEST_CASE("zero training episodes is an error") {
    NavEnv env(NavEnv::Variant::Nav, 0.01, false);
    Rng rng(3);
    CHECK_THROWS_AS(train_task_policy(env, 0, base_cfg(), rng), Error);
}

TEST_CASE("same seed trains identical weights") {
    NavEnv env(NavEnv::Variant::Nav, 0.01, false);
    RunConfig cfg = base_cfg();
    cfg.train_episodes = 40;
    Rng a(9), b(9);
    const auto t1 = train_task_policy(env, 40, cfg, a);
    const auto t2 = train_task_policy(env, 40, cfg, b);
    const auto& l1 = t1.q.net().layers();
    const auto& l2 = t2.q.net().layers();
    REQUIRE(l1.size() == l2.size());
    for (std::size_t l = 0; l < l1.size(); ++l) {
        CHECK(l1[l].w == l2[l].w);
        CHECK(l1[l].b == l2[l].b);
    }
}

TEST_CASE("policy distribution normalizes and greedy has positive mass") {
    NavEnv env(NavEnv::Variant::Nav, 0.01, false);
    RunConfig cfg = base_cfg();
    cfg.train_episodes = 40;
    Rng rng(5);
    const auto tp = train_task_policy(env, 40, cfg, rng);
    Rng srng(6);
    std::vector<double> p;
    for (int i = 0; i < 50; ++i) {
        const Vec s{srng.uniform01(), srng.uniform01(), 0.0, 0.0};
        tp.policy->dist(s, p);
        double sum = 0.0;
        for (double v : p) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(p[tp.policy->greedy(s)] > 0.0);
    }
}

TEST_CASE("dataset generation: episode counts, invariants, determinism") {
    NavEnv env(NavEnv::Variant::Nav, 0.01, false);
    RunConfig cfg = base_cfg();
    cfg.train_episodes = 40;
    Rng rng(11);
    const auto tp = train_task_policy(env, 40, cfg, rng);

    Rng d1(21), d2(21);
    const TrajectoryDataset ds1 = generate_dataset(env, *tp.policy, 7, d1);
    const TrajectoryDataset ds2 = generate_dataset(env, *tp.policy, 7, d2);
    CHECK(ds1.episode_count() == 7);
    ds1.validate(env.spec().horizon);
    REQUIRE(ds1.transitions.size() == ds2.transitions.size());
    for (std::size_t i = 0; i < ds1.transitions.size(); ++i) {
        CHECK(ds1.transitions[i].s == ds2.transitions[i].s);
        CHECK(ds1.transitions[i].a == ds2.transitions[i].a);
    }
}

TEST_CASE("one-episode dataset on a short-horizon env stays within bounds") {
    GridEnv env(false);
    RunConfig cfg = base_cfg();
    Rng rng(31);
    const auto tp = train_task_policy(env, 1, cfg, rng);
    Rng drng(32);
    const TrajectoryDataset ds = generate_dataset(env, *tp.policy, 1, drng);
    CHECK(ds.episode_count() == 1);
    CHECK(ds.transitions.size() <= static_cast<std::size_t>(env.spec().horizon));
}

TEST_CASE("planted-hazard dataset generation avoids the excluded region") {
    NavEnv env(NavEnv::Variant::Nav, 0.01, true);
    RunConfig cfg = base_cfg();
    cfg.train_episodes = 40;
    Rng rng(41);
    const auto tp = train_task_policy(env, 40, cfg, rng);
    Rng drng(42);
    const TrajectoryDataset ds = generate_dataset(env, *tp.policy, 10, drng);
    for (std::size_t e = 0; e < ds.episode_count(); ++e) {
        const auto [begin, end] = ds.episode_range(e);
        CHECK(ds.transitions[begin].s[0] <= 0.25);
    }
}

TEST_CASE("task policy save and load round trips behavior") {
    NavEnv env(NavEnv::Variant::Nav, 0.01, false);
    RunConfig cfg = base_cfg();
    cfg.train_episodes = 40;
    Rng rng(51);
    const auto tp = train_task_policy(env, 40, cfg, rng);
    const std::string path = "/tmp/vfrl_task_policy.model";
    save_task_policy(tp, env, path);
    const auto back = load_task_policy(path, env);
    Rng srng(52);
    for (int i = 0; i < 20; ++i) {
        const Vec s{srng.uniform01(), srng.uniform01(), 0.0, 0.0};
        CHECK(back.policy->greedy(s) == tp.policy->greedy(s));
        CHECK(back.q.value(s, 3) == tp.q.value(s, 3));
    }
    std::remove(path.c_str());
}

TEST_CASE("grid policy is the value-iteration greedy table") {
    GridEnv env(false);
    RunConfig cfg = base_cfg();
    Rng rng(61);
    const auto tp = train_task_policy(env, 1, cfg, rng);
    Rng eval(62);
    const double rate = evaluate_goal_rate(env, *tp.policy, 100, eval);
    CHECK(rate == doctest::Approx(1.0));
    std::vector<double> p;
    tp.policy->dist({3.0, 3.0}, p);
    int positive = 0;
    for (double v : p)
        if (v > 0.0) ++positive;
    CHECK(positive == 1);
}
