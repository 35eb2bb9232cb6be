#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "presgan/errors.hpp"
#include "presgan/param_vector.hpp"
#include "presgan/rng.hpp"
#include "presgan/tensor.hpp"

namespace presgan {

enum class Activation { identity, tanh, sigmoid, leaky_relu };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::leaky_relu: return "leaky_relu";
    }
    return "identity";
}

inline Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "tanh") return Activation::tanh;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "leaky_relu") return Activation::leaky_relu;
    throw config_error("unknown activation '" + name + "'");
}

// Fully connected network: layers[0] inputs, layers.back() outputs, the same
// hidden activation between all intermediate layers, one output activation.
struct MlpSpec {
    std::vector<std::size_t> layers;
    Activation hidden = Activation::tanh;
    Activation output = Activation::identity;
    double leaky_slope = 0.01;

    std::size_t input_dim() const { return layers.front(); }
    std::size_t output_dim() const { return layers.back(); }
    std::size_t layer_count() const { return layers.size() - 1; }

    void validate() const {
        if (layers.size() < 2) throw config_error("mlp: need at least input and output sizes");
        for (std::size_t n : layers)
            if (n == 0) throw config_error("mlp: zero-width layer");
        if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
            throw config_error("mlp: leaky slope must lie in (0, 1)");
    }

    bool operator==(const MlpSpec&) const = default;
};

namespace detail {

inline void apply_activation(Activation act, double slope, Tensor& t) {
    switch (act) {
        case Activation::identity:
            return;
        case Activation::tanh:
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::tanh(t[i]);
            return;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = 1.0 / (1.0 + std::exp(-t[i]));
            return;
        case Activation::leaky_relu:
            for (std::size_t i = 0; i < t.size(); ++i)
                if (t[i] < 0.0) t[i] *= slope;
            return;
    }
}

// Derivative written in terms of the activation value itself (all four
// activations allow this; leaky_relu keeps the sign of its input).
inline double activation_grad(Activation act, double slope, double value) {
    switch (act) {
        case Activation::identity: return 1.0;
        case Activation::tanh: return 1.0 - value * value;
        case Activation::sigmoid: return value * (1.0 - value);
        case Activation::leaky_relu: return value > 0.0 ? 1.0 : slope;
    }
    return 1.0;
}

}  // namespace detail

inline void validate_mlp_params(const MlpSpec& spec, const ParamVector& params, const char* what) {
    spec.validate();
    if (params.segment_count() != 2 * spec.layer_count())
        throw config_error(std::string(what) + ": expected " + std::to_string(2 * spec.layer_count()) +
                           " segments, got " + std::to_string(params.segment_count()));
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const Tensor& w = params.at("W" + std::to_string(l));
        const Tensor& b = params.at("b" + std::to_string(l));
        if (w.shape() != std::vector<std::size_t>{spec.layers[l], spec.layers[l + 1]})
            throw config_error(std::string(what) + ": W" + std::to_string(l) + " has shape " +
                               shape_string(w));
        if (b.shape() != std::vector<std::size_t>{spec.layers[l + 1]})
            throw config_error(std::string(what) + ": b" + std::to_string(l) + " has shape " +
                               shape_string(b));
    }
}

// Glorot-uniform weights, zero biases.
inline ParamVector init_mlp_params(const MlpSpec& spec, RngStream& rng) {
    spec.validate();
    ParamVector params;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        std::size_t fan_in = spec.layers[l], fan_out = spec.layers[l + 1];
        double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Tensor w = Tensor::matrix(fan_in, fan_out);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = bound * (2.0 * rng.uniform() - 1.0);
        params.add("W" + std::to_string(l), std::move(w));
        params.add("b" + std::to_string(l), Tensor::vector(fan_out));
    }
    return params;
}

// Post-activation values per layer; acts[0] is the input, acts.back() the output.
struct MlpCache {
    std::vector<Tensor> acts;
};

inline Tensor mlp_forward(const MlpSpec& spec, const ParamVector& params, const Tensor& input,
                          MlpCache* cache = nullptr) {
    validate_mlp_params(spec, params, "mlp forward");
    if (input.rank() != 2 || input.cols() != spec.input_dim())
        throw config_error("mlp forward: input shape " + shape_string(input) + " for input dim " +
                           std::to_string(spec.input_dim()));
    if (cache) {
        cache->acts.clear();
        cache->acts.push_back(input);
    }
    Tensor current = input;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const Tensor& w = params.at("W" + std::to_string(l));
        const Tensor& b = params.at("b" + std::to_string(l));
        Tensor next = Tensor::matrix(current.rows(), spec.layers[l + 1]);
        as_matrix(next).noalias() = as_matrix(current) * as_matrix(w);
        as_matrix(next).rowwise() += as_vector(b).transpose();
        detail::apply_activation(l + 1 == spec.layer_count() ? spec.output : spec.hidden,
                                 spec.leaky_slope, next);
        current = std::move(next);
        if (cache) cache->acts.push_back(current);
    }
    current.ensure_finite("mlp forward");
    return current;
}

struct MlpGrads {
    ParamVector params;
    Tensor input;
};

namespace detail {

// Shared backward sweep. upstream holds dL/d(output); param gradients are
// summed over the batch. Cache must come from mlp_forward over `params`.
inline MlpGrads mlp_backward_impl(const MlpSpec& spec, const ParamVector& params,
                                  const MlpCache& cache, const Tensor& upstream,
                                  bool want_param_grads) {
    if (cache.acts.size() != spec.layer_count() + 1)
        throw config_error("mlp backward: cache does not match network depth");
    if (!upstream.same_shape(cache.acts.back()))
        throw config_error("mlp backward: upstream shape " + shape_string(upstream));

    MlpGrads out;
    if (want_param_grads) out.params = ParamVector::zeros_like(params);

    Tensor delta = upstream;  // becomes dL/d(pre-activation) layer by layer
    for (std::size_t l = spec.layer_count(); l-- > 0;) {
        const Tensor& act = cache.acts[l + 1];
        Activation a = (l + 1 == spec.layer_count()) ? spec.output : spec.hidden;
        if (a != Activation::identity)
            for (std::size_t i = 0; i < delta.size(); ++i)
                delta[i] *= activation_grad(a, spec.leaky_slope, act[i]);

        const Tensor& w = params.at("W" + std::to_string(l));
        if (want_param_grads) {
            Tensor& gw = out.params.at("W" + std::to_string(l));
            Tensor& gb = out.params.at("b" + std::to_string(l));
            as_matrix(gw).noalias() = as_matrix(cache.acts[l]).transpose() * as_matrix(delta);
            as_vector(gb).noalias() = as_matrix(delta).colwise().sum().transpose();
        }
        Tensor prev = Tensor::matrix(delta.rows(), spec.layers[l]);
        as_matrix(prev).noalias() = as_matrix(delta) * as_matrix(w).transpose();
        delta = std::move(prev);
    }
    out.input = std::move(delta);
    out.input.ensure_finite("mlp backward");
    if (want_param_grads) out.params.ensure_finite("mlp backward");
    return out;
}

}  // namespace detail

inline MlpGrads mlp_backward(const MlpSpec& spec, const ParamVector& params, const MlpCache& cache,
                             const Tensor& upstream) {
    return detail::mlp_backward_impl(spec, params, cache, upstream, true);
}

inline MlpGrads mlp_backward(const MlpSpec& spec, const ParamVector& params, const Tensor& input,
                             const Tensor& upstream) {
    MlpCache cache;
    mlp_forward(spec, params, input, &cache);
    return detail::mlp_backward_impl(spec, params, cache, upstream, true);
}

inline Tensor mlp_backward_input(const MlpSpec& spec, const ParamVector& params,
                                 const MlpCache& cache, const Tensor& upstream) {
    return detail::mlp_backward_impl(spec, params, cache, upstream, false).input;
}

// Central-difference gradient of a scalar function of the parameters.
// Deliberately naive: this is the oracle the analytic backward pass is
// checked against.
template <typename F>
ParamVector finite_diff_grad(F&& fn, const ParamVector& params, double step) {
    ParamVector work = params;
    ParamVector grad = ParamVector::zeros_like(params);
    for (std::size_t s = 0; s < work.segments().size(); ++s) {
        Tensor& t = work.segments()[s].value;
        Tensor& g = grad.segments()[s].value;
        for (std::size_t i = 0; i < t.size(); ++i) {
            double saved = t[i];
            t[i] = saved + step;
            double up = fn(static_cast<const ParamVector&>(work));
            t[i] = saved - step;
            double down = fn(static_cast<const ParamVector&>(work));
            t[i] = saved;
            g[i] = (up - down) / (2.0 * step);
        }
    }
    return grad;
}

template <typename F>
Tensor finite_diff_tensor_grad(F&& fn, const Tensor& point, double step) {
    Tensor work = point;
    Tensor grad(point.shape());
    for (std::size_t i = 0; i < work.size(); ++i) {
        double saved = work[i];
        work[i] = saved + step;
        double up = fn(static_cast<const Tensor&>(work));
        work[i] = saved - step;
        double down = fn(static_cast<const Tensor&>(work));
        work[i] = saved;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

}  // namespace presgan
