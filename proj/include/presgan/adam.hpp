#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "presgan/param_vector.hpp"
#include "presgan/tensor.hpp"

namespace presgan {

// Bias-corrected Adam. One state covers one parameter block; t counts steps.
struct AdamState {
    std::vector<double> m, v;
    std::size_t t = 0;

    void ensure_size(std::size_t n) {
        if (m.empty()) {
            m.assign(n, 0.0);
            v.assign(n, 0.0);
        }
        if (m.size() != n || v.size() != n)
            throw config_error("adam: state size does not match parameter size");
    }
};

namespace detail {

inline void adam_update(AdamState& state, double* params, const double* grads, std::size_t n,
                        double lr, double beta1, double beta2, double eps_hat) {
    state.ensure_size(n);
    state.t += 1;
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < n; ++i) {
        double g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + eps_hat);
    }
}

}  // namespace detail

inline void adam_step(AdamState& state, Tensor& params, const Tensor& grads, double lr, double beta1,
                      double beta2, double eps_hat) {
    if (!params.same_shape(grads)) throw config_error("adam: gradient shape mismatch");
    detail::adam_update(state, params.data(), grads.data(), params.size(), lr, beta1, beta2, eps_hat);
}

inline void adam_step(AdamState& state, ParamVector& params, const ParamVector& grads, double lr,
                      double beta1, double beta2, double eps_hat) {
    params.ensure_same_layout(grads, "adam");
    std::vector<double> flat = params.flatten();
    std::vector<double> g = grads.flatten();
    detail::adam_update(state, flat.data(), g.data(), flat.size(), lr, beta1, beta2, eps_hat);
    params.assign_flat(flat);
}

}  // namespace presgan
