#pragma once

#include <cmath>
#include <vector>

#include "presgan/errors.hpp"
#include "presgan/mlp.hpp"

namespace presgan {

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
inline constexpr double kProbClamp = 1e-7;

struct NoiseBounds {
    double sigma_low = 0.01;
    double sigma_high = 0.3;

    void validate() const {
        if (!(sigma_low > 0.0) || !(sigma_high >= sigma_low))
            throw config_error("noise bounds: need 0 < sigma_low <= sigma_high");
    }
};

// Generator with an explicit observation density: x | z ~ N(mu_eta(z), diag(sigma^2))
// with z ~ N(0, I). sigma is stored as log_sigma, one entry per data dimension.
struct GeneratorParams {
    MlpSpec spec;
    ParamVector eta;
    Tensor log_sigma;

    std::size_t latent_dim() const { return spec.input_dim(); }
    std::size_t data_dim() const { return spec.output_dim(); }

    Tensor sigma() const {
        Tensor s(log_sigma.shape());
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(log_sigma[i]);
        return s;
    }
};

struct DiscriminatorParams {
    MlpSpec spec;
    ParamVector phi;

    std::size_t data_dim() const { return spec.input_dim(); }
};

// Amortized Gaussian posterior approximation; the network emits
// [mean, log_var] stacked along the feature axis.
struct EncoderParams {
    MlpSpec spec;
    ParamVector gamma;

    std::size_t data_dim() const { return spec.input_dim(); }
    std::size_t latent_dim() const { return spec.output_dim() / 2; }
};

inline void validate_generator(const GeneratorParams& gen, const char* what) {
    validate_mlp_params(gen.spec, gen.eta, what);
    if (gen.log_sigma.shape() != std::vector<std::size_t>{gen.data_dim()})
        throw config_error(std::string(what) + ": log_sigma shape " + shape_string(gen.log_sigma) +
                           " for data dim " + std::to_string(gen.data_dim()));
}

inline GeneratorParams make_generator(std::size_t latent_dim, std::size_t data_dim,
                                      const std::vector<std::size_t>& hidden, Activation hidden_act,
                                      Activation output_act, double log_variance_init,
                                      RngStream& rng) {
    GeneratorParams gen;
    gen.spec.layers.push_back(latent_dim);
    gen.spec.layers.insert(gen.spec.layers.end(), hidden.begin(), hidden.end());
    gen.spec.layers.push_back(data_dim);
    gen.spec.hidden = hidden_act;
    gen.spec.output = output_act;
    gen.spec.validate();
    gen.eta = init_mlp_params(gen.spec, rng);
    gen.log_sigma = Tensor::full({data_dim}, 0.5 * log_variance_init);
    return gen;
}

inline DiscriminatorParams make_discriminator(std::size_t data_dim,
                                              const std::vector<std::size_t>& hidden,
                                              Activation hidden_act, RngStream& rng) {
    DiscriminatorParams disc;
    disc.spec.layers.push_back(data_dim);
    disc.spec.layers.insert(disc.spec.layers.end(), hidden.begin(), hidden.end());
    disc.spec.layers.push_back(1);
    disc.spec.hidden = hidden_act;
    disc.spec.output = Activation::sigmoid;
    disc.spec.validate();
    disc.phi = init_mlp_params(disc.spec, rng);
    return disc;
}

inline EncoderParams make_encoder(std::size_t data_dim, std::size_t latent_dim,
                                  const std::vector<std::size_t>& hidden, Activation hidden_act,
                                  RngStream& rng) {
    EncoderParams enc;
    enc.spec.layers.push_back(data_dim);
    enc.spec.layers.insert(enc.spec.layers.end(), hidden.begin(), hidden.end());
    enc.spec.layers.push_back(2 * latent_dim);
    enc.spec.hidden = hidden_act;
    enc.spec.output = Activation::identity;
    enc.spec.validate();
    enc.gamma = init_mlp_params(enc.spec, rng);
    return enc;
}

inline Tensor generator_mean(const GeneratorParams& gen, const Tensor& z, MlpCache* cache = nullptr) {
    return mlp_forward(gen.spec, gen.eta, z, cache);
}

// x(z, eps) = mu_eta(z) + sigma * eps, the reparameterized draw from the
// generator's observation density.
inline Tensor reparam_sample(const GeneratorParams& gen, const Tensor& z, const Tensor& eps) {
    Tensor mu = generator_mean(gen, z);
    if (!eps.same_shape(mu))
        throw config_error("reparam sample: eps shape " + shape_string(eps) + " vs mean " +
                           shape_string(mu));
    Tensor s = gen.sigma();
    for (std::size_t i = 0; i < mu.rows(); ++i)
        for (std::size_t j = 0; j < mu.cols(); ++j) mu(i, j) += s[j] * eps(i, j);
    mu.ensure_finite("reparam sample");
    return mu;
}

// Real data gets the same noise treatment as generated data so the
// discriminator compares like with like.
inline Tensor noise_real_data(const Tensor& x, const Tensor& log_sigma, const Tensor& eps) {
    if (!eps.same_shape(x))
        throw config_error("noise data: eps shape " + shape_string(eps) + " vs x " + shape_string(x));
    if (log_sigma.size() != x.cols()) throw config_error("noise data: log_sigma length mismatch");
    Tensor out = x;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out(i, j) += std::exp(log_sigma[j]) * eps(i, j);
    out.ensure_finite("noise data");
    return out;
}

inline void truncate_sigma(Tensor& log_sigma, const NoiseBounds& bounds) {
    bounds.validate();
    double lo = std::log(bounds.sigma_low), hi = std::log(bounds.sigma_high);
    for (std::size_t i = 0; i < log_sigma.size(); ++i)
        log_sigma[i] = std::min(hi, std::max(lo, log_sigma[i]));
}

// Row-wise gradient of log N(x; mu(z), diag(sigma^2)) with respect to x,
// i.e. -(x - mu(z)) / sigma^2.
inline Tensor conditional_score_x(const GeneratorParams& gen, const Tensor& x, const Tensor& z) {
    Tensor mu = generator_mean(gen, z);
    if (!x.same_shape(mu))
        throw config_error("conditional score: x shape " + shape_string(x) + " vs mean " +
                           shape_string(mu));
    Tensor s = gen.sigma();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            out(i, j) = -(x(i, j) - mu(i, j)) / (s[j] * s[j]);
    out.ensure_finite("conditional score");
    return out;
}

// log N(z; 0, I) per row.
inline std::vector<double> log_prior_rows(const Tensor& z) {
    std::vector<double> out(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        double q = 0.0;
        for (std::size_t j = 0; j < z.cols(); ++j) q += z(i, j) * z(i, j);
        out[i] = -0.5 * q - 0.5 * static_cast<double>(z.cols()) * kLogTwoPi;
    }
    return out;
}

// log N(x; mu, diag(sigma^2)) per row, with mu already computed.
inline std::vector<double> conditional_loglik_rows(const Tensor& x, const Tensor& mu,
                                                   const Tensor& log_sigma) {
    if (!x.same_shape(mu)) throw config_error("conditional loglik: x/mu shape mismatch");
    std::vector<double> out(x.rows());
    double log_norm = 0.0;
    for (std::size_t j = 0; j < log_sigma.size(); ++j) log_norm += log_sigma[j];
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double q = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            double r = (x(i, j) - mu(i, j)) / std::exp(log_sigma[j]);
            q += r * r;
        }
        out[i] = -0.5 * q - log_norm - 0.5 * static_cast<double>(x.cols()) * kLogTwoPi;
    }
    return out;
}

// Discriminator output probability, clamped away from {0, 1} so the losses
// stay finite. The cache (when requested) holds the raw network pass.
inline Tensor discriminator_prob(const DiscriminatorParams& disc, const Tensor& x,
                                 MlpCache* cache = nullptr) {
    Tensor p = mlp_forward(disc.spec, disc.phi, x, cache);
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = std::min(1.0 - kProbClamp, std::max(kProbClamp, p[i]));
    return p;
}

struct EncoderOutput {
    Tensor mean;
    Tensor log_var;
};

inline EncoderOutput encode(const EncoderParams& enc, const Tensor& x, MlpCache* cache = nullptr) {
    Tensor raw = mlp_forward(enc.spec, enc.gamma, x, cache);
    std::size_t k = enc.latent_dim();
    EncoderOutput out{Tensor::matrix(x.rows(), k), Tensor::matrix(x.rows(), k)};
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < k; ++j) {
            out.mean(i, j) = raw(i, j);
            out.log_var(i, j) = raw(i, j + k);
        }
    return out;
}

}  // namespace presgan
