#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vfrl/rng.hpp"
#include "vfrl/types.hpp"

namespace vfrl {

// Dense feed-forward network: tanh hidden layers, linear output. Forward and
// backward passes run on the dispatched kernels; the analytic input gradient
// is what the TD-error mutation and its finite-difference oracle exercise.
class Mlp {
public:
    struct Layer {
        std::size_t in = 0, out = 0;
        std::vector<double> w;  // row-major out x in
        std::vector<double> b;
    };

    // Mirrors the parameter shapes; used for gradients and Adam moments.
    struct ParamBuf {
        std::vector<std::vector<double>> w;
        std::vector<std::vector<double>> b;
        void zero();
    };

    struct Workspace {
        std::vector<std::vector<double>> act;    // act[0] = input copy
        std::vector<std::vector<double>> delta;  // backprop scratch
        std::span<const double> output() const { return act.back(); }
    };

    Mlp() = default;
    Mlp(const std::vector<std::size_t>& sizes, Rng& rng);
    explicit Mlp(std::vector<Layer> layers);

    std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
    std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& mutable_layers() { return layers_; }
    std::vector<std::size_t> sizes() const;

    ParamBuf make_param_buf() const;
    Workspace make_workspace() const;

    void forward(std::span<const double> x, Workspace& ws) const;
    Vec operator()(const Vec& x) const;
    double scalar(const Vec& x) const;  // single-output convenience

    // Backpropagates dL/d(output); accumulates parameter gradients into
    // `grad` (when non-null) and writes dL/d(input) into `grad_input`
    // (when non-null). Requires a workspace filled by forward().
    void backward(Workspace& ws, std::span<const double> grad_out, ParamBuf* grad,
                  std::vector<double>* grad_input) const;

    // Analytic gradient of output coordinate `out_index` w.r.t. the input.
    Vec input_gradient(const Vec& x, std::size_t out_index = 0) const;

    void apply_update(const ParamBuf& delta, double scale);
    std::size_t param_count() const;

private:
    std::vector<Layer> layers_;
};

// Adam with the usual defaults; owns its moment buffers.
class Adam {
public:
    Adam(const Mlp& net, double lr) : lr_(lr), m_(net.make_param_buf()), v_(net.make_param_buf()) {
        m_.zero();
        v_.zero();
    }
    void step(Mlp& net, const Mlp::ParamBuf& grad);
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

private:
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
    Mlp::ParamBuf m_, v_;
};

}  // namespace vfrl
