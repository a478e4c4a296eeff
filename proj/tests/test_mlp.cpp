#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "vfrl/mlp.hpp"
#include "vfrl/model_io.hpp"

using namespace vfrl;

namespace {

// Central finite differences of output coordinate `out` w.r.t. the input.
Vec fd_input_gradient(const Mlp& net, const Vec& x, std::size_t out, double h = 1e-5) {
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        Vec hi = x, lo = x;
        hi[i] += h;
        lo[i] -= h;
        g[i] = (net(hi)[out] - net(lo)[out]) / (2.0 * h);
    }
    return g;
}

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace

TEST_CASE("single linear layer gradient equals the weight row") {
    Rng rng(1);
    Mlp net({3, 1}, rng);
    const Vec x{0.4, -0.2, 0.9};
    const Vec g = net.input_gradient(x, 0);
    const auto& w = net.layers()[0].w;
    CHECK(g[0] == doctest::Approx(w[0]));
    CHECK(g[1] == doctest::Approx(w[1]));
    CHECK(g[2] == doctest::Approx(w[2]));
}

TEST_CASE("analytic input gradients match central differences on random nets") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        Mlp net({4, 16, 8, 2}, rng);
        Vec x(4);
        for (double& v : x) v = rng.uniform(-1.5, 1.5);
        const std::size_t out = trial % 2;
        const Vec analytic = net.input_gradient(x, out);
        const Vec fd = fd_input_gradient(net, x, out);
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(rel_err(analytic[i], fd[i]) < 1e-4);
    }
}

TEST_CASE("constant output network has zero input gradient") {
    Rng rng(5);
    Mlp net({3, 8, 1}, rng);
    // Zero the output layer: the network is constant in x.
    auto& out = net.mutable_layers().back();
    std::fill(out.w.begin(), out.w.end(), 0.0);
    out.b[0] = 3.25;
    const Vec g = net.input_gradient({0.1, 0.2, 0.3}, 0);
    for (double v : g) CHECK(v == doctest::Approx(0.0));
    CHECK(net.scalar({9.0, -9.0, 0.0}) == doctest::Approx(3.25));
}

TEST_CASE("parameter gradients match finite differences") {
    Rng rng(9);
    Mlp net({2, 6, 1}, rng);
    const Vec x{0.3, -0.7};
    Mlp::Workspace ws = net.make_workspace();
    Mlp::ParamBuf grad = net.make_param_buf();
    grad.zero();
    net.forward(x, ws);
    const double g0[1] = {1.0};
    net.backward(ws, std::span<const double>(g0, 1), &grad, nullptr);

    const double h = 1e-6;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        for (std::size_t i = 0; i < net.layers()[l].w.size(); i += 3) {
            Mlp plus = net, minus = net;
            plus.mutable_layers()[l].w[i] += h;
            minus.mutable_layers()[l].w[i] -= h;
            const double fd = (plus.scalar(x) - minus.scalar(x)) / (2.0 * h);
            CHECK(rel_err(grad.w[l][i], fd) < 1e-5);
        }
    }
}

TEST_CASE("same seed builds identical networks, forward is deterministic") {
    Rng a(7), b(7);
    Mlp m1({3, 8, 1}, a);
    Mlp m2({3, 8, 1}, b);
    const Vec x{0.1, 0.5, -0.4};
    CHECK(m1.scalar(x) == m2.scalar(x));
    CHECK(m1.scalar(x) == m1.scalar(x));
}

TEST_CASE("model container round trips networks and metadata") {
    Rng rng(21);
    ModelFile mf;
    mf.set_meta("kind", "test");
    mf.set_meta("note", "two words");
    mf.mlps.emplace_back("net", Mlp({3, 5, 2}, rng));
    const std::string path =
        (std::filesystem::temp_directory_path() / "vfrl_model_roundtrip.model").string();
    mf.save(path);
    const ModelFile back = ModelFile::load(path);
    CHECK(back.meta_at("kind") == "test");
    CHECK(back.meta_at("note") == "two words");
    const Vec x{0.2, -0.3, 0.8};
    CHECK(back.mlp("net")(x) == mf.mlp("net")(x));
    std::filesystem::remove(path);
}

TEST_CASE("adam reduces a simple regression loss") {
    Rng rng(3);
    Mlp net({1, 8, 1}, rng);
    Adam opt(net, 1e-2);
    Mlp::Workspace ws = net.make_workspace();
    Mlp::ParamBuf grad = net.make_param_buf();
    auto loss_of = [&]() {
        double loss = 0.0;
        for (double x = -1.0; x <= 1.0; x += 0.1) {
            const double err = net.scalar({x}) - std::sin(2.0 * x);
            loss += err * err;
        }
        return loss;
    };
    const double before = loss_of();
    for (int it = 0; it < 300; ++it) {
        grad.zero();
        for (double x = -1.0; x <= 1.0; x += 0.1) {
            net.forward(Vec{x}, ws);
            const double err = ws.output()[0] - std::sin(2.0 * x);
            const double g[1] = {2.0 * err};
            net.backward(ws, std::span<const double>(g, 1), &grad, nullptr);
        }
        opt.step(net, grad);
    }
    CHECK(loss_of() < 0.05 * before);
}
