#include "vfrl/mlp.hpp"

#include <cmath>

#include "vfrl/kernels.hpp"

namespace vfrl {

void Mlp::ParamBuf::zero() {
    for (auto& m : w) std::fill(m.begin(), m.end(), 0.0);
    for (auto& m : b) std::fill(m.begin(), m.end(), 0.0);
}

Mlp::Mlp(const std::vector<std::size_t>& sizes, Rng& rng) {
    if (sizes.size() < 2) throw Error("Mlp needs at least input and output sizes");
    layers_.resize(sizes.size() - 1);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Layer& layer = layers_[l];
        layer.in = sizes[l];
        layer.out = sizes[l + 1];
        layer.w.resize(layer.in * layer.out);
        layer.b.assign(layer.out, 0.0);
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
        for (double& v : layer.w) v = rng.uniform(-bound, bound);
    }
}

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
        if (layers_[l].out != layers_[l + 1].in) throw Error("Mlp layer sizes do not chain");
}

std::vector<std::size_t> Mlp::sizes() const {
    std::vector<std::size_t> out;
    if (layers_.empty()) return out;
    out.push_back(layers_.front().in);
    for (const auto& l : layers_) out.push_back(l.out);
    return out;
}

Mlp::ParamBuf Mlp::make_param_buf() const {
    ParamBuf buf;
    for (const auto& l : layers_) {
        buf.w.emplace_back(l.w.size(), 0.0);
        buf.b.emplace_back(l.b.size(), 0.0);
    }
    return buf;
}

Mlp::Workspace Mlp::make_workspace() const {
    Workspace ws;
    ws.act.resize(layers_.size() + 1);
    ws.delta.resize(layers_.size());
    ws.act[0].resize(input_dim());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        ws.act[l + 1].resize(layers_[l].out);
        ws.delta[l].resize(layers_[l].out);
    }
    return ws;
}

void Mlp::forward(std::span<const double> x, Workspace& ws) const {
    if (x.size() != input_dim()) throw Error("Mlp forward: input size mismatch");
    if (ws.act.size() != layers_.size() + 1) ws = make_workspace();
    std::copy(x.begin(), x.end(), ws.act[0].begin());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        auto& out = ws.act[l + 1];
        kernels::gemv(layer.out, layer.in, layer.w.data(), ws.act[l].data(), out.data());
        const bool last = l + 1 == layers_.size();
        for (std::size_t i = 0; i < layer.out; ++i) {
            out[i] += layer.b[i];
            if (!last) out[i] = std::tanh(out[i]);
        }
    }
}

Vec Mlp::operator()(const Vec& x) const {
    Workspace ws = make_workspace();
    forward(x, ws);
    return Vec(ws.output().begin(), ws.output().end());
}

double Mlp::scalar(const Vec& x) const {
    if (output_dim() != 1) throw Error("Mlp::scalar needs a single-output network");
    return (*this)(x)[0];
}

void Mlp::backward(Workspace& ws, std::span<const double> grad_out, ParamBuf* grad,
                   std::vector<double>* grad_input) const {
    const std::size_t L = layers_.size();
    if (grad_out.size() != output_dim()) throw Error("Mlp backward: gradient size mismatch");
    std::copy(grad_out.begin(), grad_out.end(), ws.delta[L - 1].begin());
    for (std::size_t l = L; l-- > 0;) {
        const Layer& layer = layers_[l];
        auto& delta = ws.delta[l];
        // Output layer is linear; hidden activations need the tanh factor.
        if (l + 1 != L) {
            const auto& a = ws.act[l + 1];
            for (std::size_t i = 0; i < layer.out; ++i) delta[i] *= 1.0 - a[i] * a[i];
        }
        if (grad) {
            kernels::ger(layer.out, layer.in, 1.0, delta.data(), ws.act[l].data(),
                         grad->w[l].data());
            kernels::axpy(layer.out, 1.0, delta.data(), grad->b[l].data());
        }
        if (l > 0) {
            kernels::gemv_t(layer.out, layer.in, layer.w.data(), delta.data(),
                            ws.delta[l - 1].data());
        } else if (grad_input) {
            grad_input->assign(layer.in, 0.0);
            kernels::gemv_t(layer.out, layer.in, layer.w.data(), delta.data(), grad_input->data());
        }
    }
}

Vec Mlp::input_gradient(const Vec& x, std::size_t out_index) const {
    if (out_index >= output_dim()) throw Error("Mlp input_gradient: output index out of range");
    Workspace ws = make_workspace();
    forward(x, ws);
    std::vector<double> grad_out(output_dim(), 0.0);
    grad_out[out_index] = 1.0;
    Vec gx;
    backward(ws, grad_out, nullptr, &gx);
    return gx;
}

void Mlp::apply_update(const ParamBuf& delta, double scale) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        kernels::axpy(layers_[l].w.size(), scale, delta.w[l].data(), layers_[l].w.data());
        kernels::axpy(layers_[l].b.size(), scale, delta.b[l].data(), layers_[l].b.data());
    }
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.w.size() + l.b.size();
    return n;
}

void Adam::step(Mlp& net, const Mlp::ParamBuf& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    };
    auto& layers = net.mutable_layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].w, grad.w[l], m_.w[l], v_.w[l]);
        update(layers[l].b, grad.b[l], m_.b[l], v_.b[l]);
    }
}

}  // namespace vfrl
