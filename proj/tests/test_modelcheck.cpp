#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "vfrl/checker.hpp"

using namespace vfrl;
using namespace vfrl_test;

TEST_CASE("parser: bounded until with probability cap") {
    const auto f = pctl::parse("P<=0.01 [ true U<=100 unsafe ]");
    REQUIRE(f->kind == pctl::Formula::Kind::Prob);
    CHECK(f->bound.hi == doctest::Approx(0.01));
    CHECK(f->bound.lo == doctest::Approx(0.0));
    REQUIRE(f->path.kind == pctl::PathFormula::Kind::BoundedUntil);
    CHECK(f->path.bound == 100);
    CHECK(f->path.lhs->kind == pctl::Formula::Kind::True);
    CHECK(f->path.rhs->atom == "unsafe");
}

TEST_CASE("parser: reach-goal safety shape") {
    const auto f = pctl::parse("P>=0.95 [ !unsafe U goal ]");
    REQUIRE(f->kind == pctl::Formula::Kind::Prob);
    CHECK(f->bound.lo == doctest::Approx(0.95));
    REQUIRE(f->path.kind == pctl::PathFormula::Kind::Until);
    CHECK(f->path.lhs->kind == pctl::Formula::Kind::Not);
    CHECK(f->path.lhs->lhs->atom == "unsafe");
}

TEST_CASE("parser: precedence, parentheses, next, intervals") {
    const auto f = pctl::parse("P[0.2,0.4] [ X (a & !b) ]");
    REQUIRE(f->path.kind == pctl::PathFormula::Kind::Next);
    CHECK(f->path.rhs->kind == pctl::Formula::Kind::And);
    const auto g = pctl::parse("P>=0.5 [ !a & b U goal ]");
    CHECK(g->path.lhs->kind == pctl::Formula::Kind::And);
    CHECK(g->path.lhs->lhs->kind == pctl::Formula::Kind::Not);
    const auto h = pctl::parse("P>=0.9 [ P>=0.5 [ X a ] U b ]");
    CHECK(h->path.lhs->kind == pctl::Formula::Kind::Prob);
}

TEST_CASE("parser rejects bad input with positions and range checks") {
    CHECK_THROWS_WITH_AS(pctl::parse("P>=1.5 [ X a ]"), doctest::Contains("out of range"), Error);
    CHECK_THROWS_WITH_AS(pctl::parse("P>=0.5 [ a U"), doctest::Contains("syntax error"), Error);
    CHECK_THROWS_WITH_AS(pctl::parse("P>=0.5 [ a ]"), doctest::Contains("expected 'U'"), Error);
    CHECK_THROWS_AS(pctl::parse("(a & b"), Error);
    CHECK_THROWS_AS(pctl::parse("a b"), Error);
}

TEST_CASE("hand-solved chain: INIT -> 0.9 GOAL / 0.1 unsafe") {
    PolicyGraph g = make_graph(1,
                               {{1 /*INIT*/, 2 /*GOAL*/, 0.9}, {1, 0, 0.1}, {0, 0, 1.0}},
                               {0});
    const CheckResult ok = check(g, "P>=0.85 [ !unsafe U goal ]");
    CHECK(ok.satisfied);
    CHECK(ok.node_probabilities[g.init_node] == doctest::Approx(0.9).epsilon(1e-12));

    const CheckResult bad = check(g, "P>=0.95 [ !unsafe U goal ]");
    CHECK_FALSE(bad.satisfied);

    const auto ce = extract_counterexample(g, pctl::parse("P>=0.95 [ !unsafe U goal ]"), bad);
    REQUIRE(ce.traces.size() == 1);
    CHECK(ce.traces[0].nodes == std::vector<int>{g.init_node, 0});
    CHECK(ce.traces[0].probability == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("vacuous bound P>=0 [X true] is satisfied on any graph") {
    Rng rng(4);
    for (int i = 0; i < 10; ++i) {
        const PolicyGraph g = random_dtmc(3 + rng.uniform_int(3), rng);
        CHECK(check(g, "P>=0 [ X true ]").satisfied);
    }
}

TEST_CASE("oracle equivalence: bounded until matches exhaustive enumeration") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int clusters = 1 + rng.uniform_int(3);  // total nodes <= 6
        const PolicyGraph g = random_dtmc(clusters, rng);
        const int n = g.node_count();
        const auto m = matrix_of(g);
        std::vector<char> sat1(n, 0), sat2(n, 0);
        for (int v = 0; v < n; ++v) {
            const auto labels = g.labels(v);
            sat1[v] = labels.count("unsafe") ? 0 : 1;
            sat2[v] = labels.count("goal") ? 1 : 0;
        }
        const int bound = 1 + rng.uniform_int(5);
        const CheckResult res =
            check(g, "P>=0.5 [ !unsafe U<=" + std::to_string(bound) + " goal ]");
        for (int v = 0; v < n; ++v) {
            const double expect = enum_bounded_until(m, n, sat1, sat2, v, bound);
            CHECK(res.node_probabilities[v] == doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("oracle equivalence: unbounded until matches value iteration") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const int clusters = 1 + rng.uniform_int(3);
        const PolicyGraph g = random_dtmc(clusters, rng);
        const int n = g.node_count();
        const auto m = matrix_of(g);
        std::vector<char> sat1(n, 0), sat2(n, 0);
        for (int v = 0; v < n; ++v) {
            const auto labels = g.labels(v);
            sat1[v] = labels.count("unsafe") ? 0 : 1;
            sat2[v] = labels.count("goal") ? 1 : 0;
        }
        const CheckResult res = check(g, "P>=0.5 [ !unsafe U goal ]");
        const auto expect = vi_until(m, n, sat1, sat2);
        for (int v = 0; v < n; ++v)
            CHECK(res.node_probabilities[v] == doctest::Approx(expect[v]).epsilon(1e-9));
    }
}

TEST_CASE("monotonicity: larger bounds never lower the until probability") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const PolicyGraph g = random_dtmc(3, rng);
        std::vector<double> prev(g.node_count(), -1.0);
        for (int bound = 0; bound <= 6; ++bound) {
            const CheckResult res =
                check(g, "P>=0 [ !unsafe U<=" + std::to_string(bound) + " goal ]");
            for (int v = 0; v < g.node_count(); ++v)
                CHECK(res.node_probabilities[v] >= prev[v] - 1e-12);
            prev = res.node_probabilities;
        }
    }
}

TEST_CASE("duality on an absorbing-unsafe fixture") {
    // Nodes: 0 unsafe (absorbing), 1 safe; INIT=2, GOAL=3, SINK=4.
    const PolicyGraph g = make_graph(2,
                                     {{2, 1, 0.7},
                                      {2, 0, 0.3},
                                      {1, 1, 0.6},
                                      {1, 0, 0.4},
                                      {0, 0, 1.0}},
                                     {0});
    const auto m = matrix_of(g);
    const int n = g.node_count();
    for (int bound = 0; bound <= 5; ++bound) {
        const CheckResult reach =
            check(g, "P>=0 [ true U<=" + std::to_string(bound) + " unsafe ]");
        std::vector<char> sat1(n, 1), sat2(n, 0);
        for (int v = 0; v < n; ++v) sat2[v] = g.labels(v).count("unsafe") ? 1 : 0;
        for (int v = 0; v < n; ++v) {
            const double hit = enum_bounded_until(m, n, sat1, sat2, v, bound);
            const double survive = 1.0 - hit;
            CHECK(reach.node_probabilities[v] + survive == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("counterexample picks the most probable of two unsafe paths") {
    // Nodes: 0 unsafe, 1 unsafe, 2 and 3 transit; INIT=4, GOAL=5, SINK=6.
    const PolicyGraph g = make_graph(4,
                                     {{4, 2, 0.5},
                                      {4, 3, 0.25},
                                      {4, 5, 0.25},
                                      {2, 0, 0.4},
                                      {2, 5, 0.6},
                                      {3, 1, 0.2},
                                      {3, 5, 0.8},
                                      {0, 0, 1.0},
                                      {1, 1, 1.0}},
                                     {0, 1});
    const auto formula = pctl::parse("P>=0.9 [ !unsafe U goal ]");
    const CheckResult res = check(g, formula);
    CHECK_FALSE(res.satisfied);
    CHECK(res.node_probabilities[g.init_node] == doctest::Approx(0.75).epsilon(1e-12));
    const auto ce = extract_counterexample(g, formula, res, 2);
    REQUIRE(ce.traces.size() == 2);
    CHECK(ce.traces[0].nodes == std::vector<int>{4, 2, 0});
    CHECK(ce.traces[0].probability == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(ce.traces[1].nodes == std::vector<int>{4, 3, 1});
    CHECK(ce.traces[1].probability == doctest::Approx(0.05).epsilon(1e-12));
    for (const auto& t : ce.traces) {
        bool has_unsafe = false;
        for (int v : t.nodes)
            if (g.is_cluster(v) && g.nodes[v].unsafe) has_unsafe = true;
        CHECK(has_unsafe);
    }
}

TEST_CASE("goal-unreachability verdict when no unsafe node is reachable") {
    const PolicyGraph g = make_graph(1, {{1, 2, 0.9}, {1, 3, 0.1}, {0, 0, 1.0}}, {0});
    const auto formula = pctl::parse("P>=0.95 [ !unsafe U goal ]");
    const CheckResult res = check(g, formula);
    CHECK_FALSE(res.satisfied);
    const auto ce = extract_counterexample(g, formula, res);
    CHECK(ce.traces.empty());
    CHECK(ce.goal_unreachable);
}

TEST_CASE("extraction without a violating check is an error") {
    const PolicyGraph g = make_graph(1, {{1, 2, 1.0}, {0, 0, 1.0}}, {0});
    const auto formula = pctl::parse("P>=0.5 [ !unsafe U goal ]");
    const CheckResult res = check(g, formula);
    REQUIRE(res.satisfied);
    CHECK_THROWS_WITH_AS(extract_counterexample(g, formula, res),
                         doctest::Contains("violating check"), Error);
}

TEST_CASE("unknown atom and non-stochastic graph are rejected") {
    const PolicyGraph g = make_graph(1, {{1, 0, 1.0}, {0, 0, 1.0}});
    CHECK_THROWS_WITH_AS(check(g, "P>=0.5 [ mystery U goal ]"),
                         doctest::Contains("unknown atom"), Error);
    const PolicyGraph broken = make_graph(1, {{1, 0, 0.5}, {0, 0, 1.0}});
    CHECK_THROWS_AS(check(broken, "P>=0.5 [ !unsafe U goal ]"), Error);
}

TEST_CASE("nested P operators evaluate bottom-up") {
    // Node 0 reaches GOAL in one step w.p. 0.8, node 1 w.p. 0.1; the inner
    // operator therefore holds at node 0 and at GOAL itself.
    const PolicyGraph g = make_graph(2,
                                     {{2, 0, 0.5},
                                      {2, 1, 0.5},
                                      {0, 3, 0.8},
                                      {0, 4, 0.2},
                                      {1, 3, 0.1},
                                      {1, 4, 0.9}});
    const CheckResult res = check(g, "P>=0.4 [ X P>=0.5 [ X goal ] ]");
    CHECK(res.node_probabilities[g.init_node] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(res.satisfied);
}

namespace {

TrajectoryDataset line_dataset(int n) {
    TrajectoryDataset ds;
    ds.state_dim = 1;
    ds.action_dim = 1;
    ds.cost_dim = 1;
    std::vector<Transition> ep;
    for (int i = 0; i < n; ++i)
        ep.push_back({{static_cast<double>(i)},
                      {0.0},
                      {static_cast<double>(i + 1)},
                      0.0,
                      {0.0},
                      i == n - 1});
    ds.append_episode(std::move(ep));
    return ds;
}

}  // namespace

TEST_CASE("risk-ranked seeds order by violation mass, cap per node") {
    PolicyGraph g = make_graph(2,
                               {{2, 0, 0.5}, {2, 1, 0.5}, {0, 3, 0.5}, {0, 4, 0.5}, {1, 3, 1.0}});
    TrajectoryDataset ds = line_dataset(10);
    for (int i = 0; i < 5; ++i) g.nodes[0].members.push_back(i);
    for (int i = 5; i < 10; ++i) g.nodes[1].members.push_back(i);

    const CheckResult res = check(g, "P>=0.9 [ !unsafe U goal ]");
    // Node 0 satisfaction is 0.5, node 1 is 1.0: all seeds from node 0 first.
    const auto seeds = risk_ranked_states(g, res, ds, 4);
    REQUIRE(seeds.size() == 4);
    for (const auto& s : seeds) CHECK(s.node == 0);

    SUBCASE("N=0 yields an empty list") { CHECK(risk_ranked_states(g, res, ds, 0).empty()); }
    SUBCASE("N larger than the dataset returns everything") {
        CHECK(risk_ranked_states(g, res, ds, 50).size() == 10);
    }
    SUBCASE("seeds spread over flagged nodes up to the per-node cap") {
        PolicyGraph g2 = make_graph(2,
                                    {{2, 0, 0.5},
                                     {2, 1, 0.5},
                                     {0, 3, 0.5},
                                     {0, 4, 0.5},
                                     {1, 3, 0.5},
                                     {1, 4, 0.5}});
        for (int i = 0; i < 5; ++i) g2.nodes[0].members.push_back(i);
        for (int i = 5; i < 10; ++i) g2.nodes[1].members.push_back(i);
        const CheckResult res2 = check(g2, "P>=0.9 [ !unsafe U goal ]");
        const auto seeds2 = risk_ranked_states(g2, res2, ds, 4);
        REQUIRE(seeds2.size() == 4);
        int node0 = 0, node1 = 0;
        for (const auto& s : seeds2) (s.node == 0 ? node0 : node1)++;
        CHECK(node0 == 2);  // ceil(4 / 2 flagged nodes)
        CHECK(node1 == 2);
    }
}

TEST_CASE("single-node graphs source every seed from that node") {
    PolicyGraph g = make_graph(1, {{1, 0, 1.0}, {0, 2, 0.5}, {0, 3, 0.5}});
    TrajectoryDataset ds = line_dataset(6);
    for (int i = 0; i < 6; ++i) g.nodes[0].members.push_back(i);
    const CheckResult res = check(g, "P>=0.9 [ !unsafe U goal ]");
    const auto seeds = risk_ranked_states(g, res, ds, 3);
    REQUIRE(seeds.size() == 3);
    for (const auto& s : seeds) CHECK(s.node == 0);
}
