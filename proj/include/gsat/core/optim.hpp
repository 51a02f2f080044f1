#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "gsat/core/matrix.hpp"
#include "gsat/core/rng.hpp"

namespace gsat {

/// Glorot/Xavier uniform: entries in [-L, L], L = sqrt(6 / (rows + cols)).
inline DenseMatrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("glorot_init: dimensions must be >= 1");
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    DenseMatrix m(rows, cols);
    for (auto& v : m.data()) v = rng.uniform(-limit, limit);
    return m;
}

struct AdamHyper {
    double lr = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // coupled L2: added to the gradient before the moment update
};

class AdamState {
public:
    AdamState() = default;
    AdamState(std::size_t rows, std::size_t cols, AdamHyper hyper = {})
        : m_(rows, cols), v_(rows, cols), hyper_(hyper) {}

    const DenseMatrix& first_moment() const noexcept { return m_; }
    const DenseMatrix& second_moment() const noexcept { return v_; }
    std::uint64_t step_count() const noexcept { return step_; }
    const AdamHyper& hyper() const noexcept { return hyper_; }

    friend DenseMatrix adam_step(const DenseMatrix& param, const DenseMatrix& grad, AdamState& state);

private:
    DenseMatrix m_, v_;
    std::uint64_t step_ = 0;
    AdamHyper hyper_;
};

/// One bias-corrected Adam update. Returns the new parameter value.
inline DenseMatrix adam_step(const DenseMatrix& param, const DenseMatrix& grad, AdamState& state) {
    param.require_same_shape(grad, "adam_step(param, grad)");
    param.require_same_shape(state.m_, "adam_step(param, state)");
    const auto& hp = state.hyper_;
    state.step_ += 1;
    const double t = static_cast<double>(state.step_);
    const double bc1 = 1.0 - std::pow(hp.beta1, t);
    const double bc2 = 1.0 - std::pow(hp.beta2, t);

    DenseMatrix out = param;
    auto p = out.data();
    auto g = grad.data();
    auto m = state.m_.data();
    auto v = state.v_.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i] + hp.weight_decay * p[i];
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * gi;
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
    }
    return out;
}

}  // namespace gsat
