#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "vfrl/rng.hpp"
#include "vfrl/types.hpp"

using namespace vfrl;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

TrajectoryDataset small_dataset() {
    TrajectoryDataset ds;
    ds.state_dim = 2;
    ds.action_dim = 1;
    ds.discrete_actions = true;
    ds.cost_dim = 1;
    ds.seed = 42;
    ds.source_policy_id = "fixture";
    std::vector<Transition> ep;
    ep.push_back({{0.1, 0.2}, {0.0}, {0.3, 0.4}, 1.0, {0.0}, false});
    ep.push_back({{0.3, 0.4}, {1.0}, {0.5, 0.6}, -0.5, {1.0}, false});
    ep.push_back({{0.5, 0.6}, {0.0}, {0.7, 0.8}, 0.25, {0.0}, true});
    ds.append_episode(std::move(ep));
    return ds;
}

}  // namespace

TEST_CASE("config file maps keys onto the run configuration") {
    const RunConfig cfg = parse_config("N=10\nL=20\ndelta=0.5\n", "test");
    CHECK(cfg.n_seeds == 10);
    CHECK(cfg.depth_limit == 20);
    CHECK(cfg.delta == doctest::Approx(0.5));
    CHECK_FALSE(cfg.delta_auto);
}

TEST_CASE("omitted keys take documented defaults") {
    const RunConfig cfg = parse_config("N=5\n", "test");
    CHECK(cfg.gamma_risk == doctest::Approx(0.99));
    CHECK(cfg.ensemble_k == 5);
    CHECK(cfg.delta_auto);
}

TEST_CASE("config range violations name the key") {
    CHECK_THROWS_WITH_AS(parse_config("L=0\n", "test"), doctest::Contains("L must be >= 1"),
                         Error);
    CHECK_THROWS_WITH_AS(parse_config("p=1.5\n", "test"), doctest::Contains("p must be in [0,1]"),
                         Error);
    CHECK_THROWS_WITH_AS(parse_config("budget=3\nN=5\n", "test"),
                         doctest::Contains("budget must be >= N"), Error);
}

TEST_CASE("config parse errors carry the line number") {
    CHECK_THROWS_WITH_AS(parse_config("N=5\nnot a pair\n", "cfg"), doctest::Contains("cfg:2"),
                         Error);
    CHECK_THROWS_WITH_AS(parse_config("mystery=1\n", "cfg"),
                         doctest::Contains("unknown config key"), Error);
}

TEST_CASE("comments and the snapshot round-trip") {
    const RunConfig cfg = parse_config("# comment\nN=7  # trailing\n", "test");
    CHECK(cfg.n_seeds == 7);
    const RunConfig again = parse_config(cfg.snapshot(), "snapshot");
    CHECK(again.snapshot() == cfg.snapshot());
}

TEST_CASE("dataset io round trip is the identity") {
    const TrajectoryDataset ds = small_dataset();
    const std::string path = temp_path("vfrl_ds_roundtrip.txt");
    write_dataset(ds, path);
    const TrajectoryDataset back = read_dataset(path);
    REQUIRE(back.transitions.size() == ds.transitions.size());
    CHECK(back.episode_starts == ds.episode_starts);
    CHECK(back.state_dim == ds.state_dim);
    CHECK(back.seed == ds.seed);
    CHECK(back.source_policy_id == ds.source_policy_id);
    for (std::size_t i = 0; i < ds.transitions.size(); ++i) {
        CHECK(back.transitions[i].s == ds.transitions[i].s);
        CHECK(back.transitions[i].a == ds.transitions[i].a);
        CHECK(back.transitions[i].s_next == ds.transitions[i].s_next);
        CHECK(back.transitions[i].r == ds.transitions[i].r);
        CHECK(back.transitions[i].c == ds.transitions[i].c);
        CHECK(back.transitions[i].done == ds.transitions[i].done);
    }
    std::filesystem::remove(path);
}

TEST_CASE("awkward doubles round trip bit-exactly") {
    TrajectoryDataset ds = small_dataset();
    ds.transitions[0].s[0] = 0.1 + 0.2;                 // 0.30000000000000004
    ds.transitions[0].r = 1.0 / 3.0;
    ds.transitions[1].r = -2.2250738585072014e-308;     // smallest normal
    ds.transitions[2].r = 1.7976931348623157e308;       // largest finite
    const std::string path = temp_path("vfrl_ds_doubles.txt");
    write_dataset(ds, path);
    const TrajectoryDataset back = read_dataset(path);
    CHECK(back.transitions[0].s[0] == ds.transitions[0].s[0]);
    CHECK(back.transitions[0].r == ds.transitions[0].r);
    CHECK(back.transitions[1].r == ds.transitions[1].r);
    CHECK(back.transitions[2].r == ds.transitions[2].r);
    std::filesystem::remove(path);
}

TEST_CASE("empty dataset round trips through a header-only file") {
    TrajectoryDataset ds;
    ds.state_dim = 3;
    ds.action_dim = 2;
    ds.discrete_actions = false;
    ds.cost_dim = 1;
    const std::string path = temp_path("vfrl_ds_empty.txt");
    write_dataset(ds, path);
    const TrajectoryDataset back = read_dataset(path);
    CHECK(back.transitions.empty());
    CHECK(back.episode_count() == 0);
    CHECK(back.state_dim == 3);
    std::filesystem::remove(path);
}

TEST_CASE("malformed records are rejected with their index") {
    const std::string path = temp_path("vfrl_ds_bad.txt");
    {
        TrajectoryDataset ds = small_dataset();
        write_dataset(ds, path);
    }
    // Append a record with a wrong field count (cost column dropped).
    {
        FILE* f = std::fopen(path.c_str(), "a");
        std::fputs("1,0,0.1,0.2,0,0.3,0.4,1\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_WITH_AS(read_dataset(path), doctest::Contains("record 3"), Error);
    std::filesystem::remove(path);
}

TEST_CASE("dataset validation enforces episode boundaries and cost sign") {
    TrajectoryDataset ds = small_dataset();
    ds.validate(5);
    TrajectoryDataset bad = small_dataset();
    bad.transitions[2].done = false;  // neither terminal nor full horizon
    CHECK_THROWS_AS(bad.validate(5), Error);
    TrajectoryDataset negative = small_dataset();
    negative.transitions[1].c[0] = -1.0;
    CHECK_THROWS_AS(negative.validate(3), Error);
}

TEST_CASE("cost channel selects sum or one component") {
    const Vec c{1.0, 2.5};
    CHECK(CostChannel::parse("sum").scalar(c) == doctest::Approx(3.5));
    CHECK(CostChannel::parse("1").scalar(c) == doctest::Approx(2.5));
    CHECK_THROWS_AS(CostChannel::parse("-2"), Error);
}

TEST_CASE("rng streams are deterministic and fork-independent") {
    Rng a(123);
    Rng b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    // Forks depend only on the seed chain, not on consumption.
    Rng c(5);
    Rng d(5);
    c.uniform01();
    c.normal();
    Rng cf = c.fork(9);
    Rng df = d.fork(9);
    for (int i = 0; i < 10; ++i) CHECK(cf.next_u64() == df.next_u64());
    Rng other = d.fork(10);
    CHECK(other.next_u64() != df.next_u64());
}

TEST_CASE("rng uniform and normal look sane") {
    Rng rng(77);
    double sum = 0.0, sumsq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double g = rng.normal();
        sum += g;
        sumsq += g * g;
    }
    CHECK(std::fabs(sum / n) < 0.03);
    CHECK(std::fabs(sumsq / n - 1.0) < 0.05);
}
