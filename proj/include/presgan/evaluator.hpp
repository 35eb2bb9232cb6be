#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "presgan/adam.hpp"
#include "presgan/hmc.hpp"
#include "presgan/models.hpp"
#include "presgan/trainer.hpp"

namespace presgan {

// ---------------------------------------------------------------------------
// Encoder fitting (amortized Gaussian posterior, trained on the ELBO)
// ---------------------------------------------------------------------------

struct EncoderFitOptions {
    std::size_t epochs = 50;
    double lr = 1e-3;
    std::size_t batch_size = 100;
    std::vector<std::size_t> hidden = {128, 128};
    Activation activation = Activation::tanh;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(lr > 0.0)) throw config_error("encoder fit: lr must be > 0");
        if (batch_size == 0) throw config_error("encoder fit: batch_size must be >= 1");
    }
};

// One-sample ELBO per row: log p(x, z) - log q(z|x) at z = mean + s*xi.
inline std::vector<double> elbo_batch(const GeneratorParams& gen, const EncoderParams& enc,
                                      const Tensor& x, RngStream& rng) {
    EncoderOutput q = encode(enc, x);
    const std::size_t batch = x.rows(), k = enc.latent_dim();
    Tensor z = Tensor::matrix(batch, k);
    std::vector<double> log_q(batch, 0.0);
    for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            double xi = rng.normal();
            double s = std::exp(0.5 * q.log_var(i, j));
            z(i, j) = q.mean(i, j) + s * xi;
            log_q[i] += -0.5 * (kLogTwoPi + q.log_var(i, j) + xi * xi);
        }
    PosteriorLogpGrad joint = posterior_logp_grad_batch(gen, x, z);
    std::vector<double> out(batch);
    for (std::size_t i = 0; i < batch; ++i) out[i] = joint.logp[i] - log_q[i];
    return out;
}

// Fits a fresh encoder to maximize the per-datapoint ELBO with one-sample
// reparameterized gradients; the generator stays frozen. The log-variance
// gradient uses the analytic Gaussian entropy of q, so for each coordinate:
// d/dmean = g_z, d/dlogvar = g_z * (s*xi)/2 + 1/2, with g_z the joint
// log-density gradient at the sampled z.
inline EncoderParams fit_encoder(const GeneratorParams& gen, const Tensor& points,
                                 const EncoderFitOptions& opts = {}) {
    opts.validate();
    validate_generator(gen, "encoder fit");
    if (points.rank() != 2 || points.rows() == 0) throw config_error("encoder fit: empty dataset");
    if (points.cols() != gen.data_dim()) throw config_error("encoder fit: dataset width mismatch");

    RngStream init_rng = RngStream::derive(opts.seed, {stream_tag::model_init, 0});
    EncoderParams enc =
        make_encoder(gen.data_dim(), gen.latent_dim(), opts.hidden, opts.activation, init_rng);

    const std::size_t n = points.rows();
    const std::size_t batch = std::min<std::size_t>(opts.batch_size, n);
    const std::size_t iters = std::max<std::size_t>(1, n / opts.batch_size);
    const std::size_t k = gen.latent_dim();
    AdamState opt;
    std::vector<std::size_t> indices(n);

    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        RngStream shuffle_rng = RngStream::derive(opts.seed, {stream_tag::encoder_fit, epoch});
        shuffle_rng.shuffle(indices);
        for (std::size_t it = 0; it < iters; ++it) {
            Tensor x = Tensor::matrix(batch, points.cols());
            for (std::size_t i = 0; i < batch; ++i)
                for (std::size_t j = 0; j < points.cols(); ++j)
                    x(i, j) = points(indices[it * batch + i], j);

            RngStream r = RngStream::derive(opts.seed, {stream_tag::encoder_fit, epoch, it, 1});
            MlpCache cache;
            EncoderOutput q = encode(enc, x, &cache);
            Tensor xi = r.normal_tensor({batch, k});
            Tensor z = Tensor::matrix(batch, k);
            Tensor half_s_xi = Tensor::matrix(batch, k);
            for (std::size_t i = 0; i < batch; ++i)
                for (std::size_t j = 0; j < k; ++j) {
                    double s = std::exp(0.5 * q.log_var(i, j));
                    z(i, j) = q.mean(i, j) + s * xi(i, j);
                    half_s_xi(i, j) = 0.5 * s * xi(i, j);
                }
            PosteriorLogpGrad joint = posterior_logp_grad_batch(gen, x, z);
            for (double v : joint.logp)
                if (!std::isfinite(v)) throw numeric_error("encoder fit: non-finite elbo");

            // minimize -mean(ELBO): raw output columns are [mean | log_var]
            Tensor upstream = Tensor::matrix(batch, 2 * k);
            double scale = -1.0 / static_cast<double>(batch);
            for (std::size_t i = 0; i < batch; ++i)
                for (std::size_t j = 0; j < k; ++j) {
                    double g = joint.grad(i, j);
                    upstream(i, j) = scale * g;
                    upstream(i, j + k) = scale * (g * half_s_xi(i, j) + 0.5);
                }
            ParamVector grads = mlp_backward(enc.spec, enc.gamma, cache, upstream).params;
            adam_step(opt, enc.gamma, grads, opts.lr, opts.beta1, opts.beta2, opts.adam_eps);
            enc.gamma.ensure_finite("encoder fit");
        }
    }
    return enc;
}

// ---------------------------------------------------------------------------
// Importance-sampling log-likelihood
// ---------------------------------------------------------------------------

struct ProposalParams {
    Tensor mean;      // latent_dim
    Tensor diag_var;  // latent_dim, positive
    double overdispersion_factor = 1.2;
    bool map_diverged = false;

    void validate() const {
        if (mean.rank() != 1 || !diag_var.same_shape(mean))
            throw config_error("proposal: mean and diag_var must be equal-length vectors");
        for (std::size_t j = 0; j < diag_var.size(); ++j)
            if (!(diag_var[j] > 0.0)) throw config_error("proposal: variance must be positive");
        if (!(overdispersion_factor >= 1.0)) throw config_error("proposal: factor must be >= 1");
    }
};

// Proposal construction: mean = MAP of log p(x*|z) + log p(z), found by Adam
// ascent started from the encoder mean; variance = factor times the encoder
// variance. A non-finite ascent falls back to the encoder mean.
inline ProposalParams map_proposal(const GeneratorParams& gen, const EncoderParams& enc,
                                   const Tensor& x_star, std::size_t map_steps, double map_lr,
                                   double factor, double beta1 = 0.5, double beta2 = 0.999,
                                   double adam_eps = 1e-8) {
    if (x_star.rank() != 1) throw config_error("map proposal: x_star must be a vector");
    if (!(factor >= 1.0)) throw config_error("map proposal: factor must be >= 1");
    if (!(map_lr > 0.0)) throw config_error("map proposal: map_lr must be > 0");

    Tensor xm = Tensor::matrix(1, x_star.size());
    for (std::size_t j = 0; j < x_star.size(); ++j) xm(0, j) = x_star[j];
    EncoderOutput q = encode(enc, xm);
    const std::size_t k = enc.latent_dim();

    ProposalParams out;
    out.mean = Tensor::vector(k);
    out.diag_var = Tensor::vector(k);
    out.overdispersion_factor = factor;
    for (std::size_t j = 0; j < k; ++j) {
        out.mean[j] = q.mean(0, j);
        out.diag_var[j] = factor * std::exp(q.log_var(0, j));
    }

    Tensor z = out.mean;
    AdamState opt;
    for (std::size_t step = 0; step < map_steps; ++step) {
        Tensor zm = Tensor::matrix(1, k);
        for (std::size_t j = 0; j < k; ++j) zm(0, j) = z[j];
        PosteriorLogpGrad g = posterior_logp_grad_batch(gen, xm, zm);
        if (!std::isfinite(g.logp[0]) || !g.grad.all_finite()) {
            out.map_diverged = true;
            out.validate();
            return out;  // keep the encoder mean
        }
        Tensor ascent = Tensor::vector(k);
        for (std::size_t j = 0; j < k; ++j) ascent[j] = -g.grad(0, j);  // minimize -logp
        adam_step(opt, z, ascent, map_lr, beta1, beta2, adam_eps);
        if (!z.all_finite()) {
            out.map_diverged = true;
            for (std::size_t j = 0; j < k; ++j) out.mean[j] = q.mean(0, j);
            out.validate();
            return out;
        }
    }
    out.mean = z;
    out.validate();
    return out;
}

struct LikelihoodSpec {
    enum class Kind { gaussian, truncated_gaussian };
    Kind kind = Kind::gaussian;
    double lo = -1.0;
    double hi = 1.0;
};

inline double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }

// log p(x | mu, sigma) per row under the evaluation likelihood; the truncated
// variant renormalizes each dimension by its Gaussian mass on [lo, hi].
inline std::vector<double> eval_loglik_rows(const Tensor& x, const Tensor& mu,
                                            const Tensor& log_sigma, const LikelihoodSpec& lik) {
    std::vector<double> out = conditional_loglik_rows(x, mu, log_sigma);
    if (lik.kind == LikelihoodSpec::Kind::gaussian) return out;
    if (!(lik.hi > lik.lo)) throw config_error("likelihood: empty truncation interval");
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            if (x(i, j) < lik.lo || x(i, j) > lik.hi) {
                out[i] = -std::numeric_limits<double>::infinity();
                break;
            }
            double s = std::exp(log_sigma[j]);
            double mass = normal_cdf((lik.hi - mu(i, j)) / s) - normal_cdf((lik.lo - mu(i, j)) / s);
            out[i] -= std::log(mass);
        }
    }
    return out;
}

// log p(x*) ~= logsumexp_s [ log p(x*|z_s) + log p(z_s) - log r(z_s) ] - log S
// with z_s drawn from the diagonal-Gaussian proposal r.
inline double importance_loglik(const GeneratorParams& gen, const ProposalParams& proposal,
                                const Tensor& x_star, std::size_t num_samples, RngStream& rng,
                                const LikelihoodSpec& lik = {}) {
    proposal.validate();
    if (x_star.rank() != 1 || x_star.size() != gen.data_dim())
        throw config_error("importance loglik: x_star shape mismatch");
    if (num_samples == 0) throw config_error("importance loglik: need at least one sample");
    const std::size_t k = gen.latent_dim();
    if (proposal.mean.size() != k) throw config_error("importance loglik: proposal dim mismatch");

    Tensor z = Tensor::matrix(num_samples, k);
    std::vector<double> log_r(num_samples, 0.0);
    for (std::size_t s = 0; s < num_samples; ++s)
        for (std::size_t j = 0; j < k; ++j) {
            double xi = rng.normal();
            double sd = std::sqrt(proposal.diag_var[j]);
            z(s, j) = proposal.mean[j] + sd * xi;
            log_r[s] += -0.5 * (kLogTwoPi + std::log(proposal.diag_var[j]) + xi * xi);
        }

    Tensor mu = generator_mean(gen, z);
    Tensor x_rep = Tensor::matrix(num_samples, x_star.size());
    for (std::size_t s = 0; s < num_samples; ++s)
        for (std::size_t j = 0; j < x_star.size(); ++j) x_rep(s, j) = x_star[j];
    std::vector<double> log_lik = eval_loglik_rows(x_rep, mu, gen.log_sigma, lik);
    std::vector<double> log_prior = log_prior_rows(z);

    double max_w = -std::numeric_limits<double>::infinity();
    std::vector<double> log_w(num_samples);
    for (std::size_t s = 0; s < num_samples; ++s) {
        log_w[s] = log_lik[s] + log_prior[s] - log_r[s];
        if (std::isnan(log_w[s]) || log_w[s] == std::numeric_limits<double>::infinity())
            throw numeric_error("importance loglik: non-finite importance weight");
        max_w = std::max(max_w, log_w[s]);
    }
    if (!std::isfinite(max_w)) throw numeric_error("importance loglik: all weights vanished");
    double acc = 0.0;
    for (double w : log_w) acc += std::exp(w - max_w);
    return max_w + std::log(acc) - std::log(static_cast<double>(num_samples));
}

// ---------------------------------------------------------------------------
// Mode-coverage metrics
// ---------------------------------------------------------------------------

struct ModeAssignment {
    std::vector<int> labels;
    std::vector<char> captured;
    Tensor soft_probs;  // N x K responsibilities

    int captured_count() const {
        int c = 0;
        for (char v : captured) c += v ? 1 : 0;
        return c;
    }
};

// Classifies samples with the exact Bayes classifier of an equal-weight
// isotropic mixture at the given centers. A mode counts as captured only if
// some sample both wins its argmax and lies within 3*mode_std of the center.
inline ModeAssignment assign_modes(const Tensor& samples, const Tensor& centers, double mode_std) {
    if (samples.rank() != 2 || centers.rank() != 2 || samples.cols() != centers.cols())
        throw config_error("assign modes: samples and centers must share their width");
    if (centers.rows() == 0) throw config_error("assign modes: need at least one center");
    if (!(mode_std > 0.0)) throw config_error("assign modes: mode_std must be > 0");

    const std::size_t n = samples.rows(), K = centers.rows();
    ModeAssignment out;
    out.labels.assign(n, 0);
    out.captured.assign(K, 0);
    out.soft_probs = Tensor::matrix(n, K);
    std::vector<double> d2(K);
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t kk = 0; kk < K; ++kk) {
            double acc = 0.0;
            for (std::size_t j = 0; j < samples.cols(); ++j) {
                double r = samples(i, j) - centers(kk, j);
                acc += r * r;
            }
            d2[kk] = acc;
            if (acc < best) {  // strict: ties keep the lowest index
                best = acc;
                arg = kk;
            }
        }
        double denom = 0.0;
        for (std::size_t kk = 0; kk < K; ++kk) {
            double w = std::exp(-(d2[kk] - best) / (2.0 * mode_std * mode_std));
            out.soft_probs(i, kk) = w;
            denom += w;
        }
        for (std::size_t kk = 0; kk < K; ++kk) out.soft_probs(i, kk) /= denom;
        out.labels[i] = static_cast<int>(arg);
        if (best <= 9.0 * mode_std * mode_std) out.captured[arg] = 1;
    }
    return out;
}

inline std::vector<double> average_rows(const Tensor& soft) {
    std::vector<double> avg(soft.cols(), 0.0);
    for (std::size_t i = 0; i < soft.rows(); ++i)
        for (std::size_t k = 0; k < soft.cols(); ++k) avg[k] += soft(i, k);
    for (double& v : avg) v /= static_cast<double>(soft.rows());
    return avg;
}

// KL between two discrete distributions after mixing each with the uniform
// distribution at weight 1e-8 (avoids log 0 on empty classes).
inline double discrete_kl(std::vector<double> p, std::vector<double> q) {
    if (p.size() != q.size() || p.empty()) throw config_error("kl: length mismatch");
    const double eps = 1e-8;
    double u = 1.0 / static_cast<double>(p.size());
    double kl = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        double pk = (1.0 - eps) * p[k] + eps * u;
        double qk = (1.0 - eps) * q[k] + eps * u;
        if (pk > 0.0) kl += pk * std::log(pk / qk);
    }
    return std::max(0.0, kl);
}

// KL(mean generated responsibilities || mean real responsibilities).
inline double label_kl(const Tensor& gen_soft, const Tensor& real_soft) {
    if (gen_soft.rank() != 2 || real_soft.rank() != 2 || gen_soft.cols() != real_soft.cols())
        throw config_error("label kl: responsibility shapes disagree");
    return discrete_kl(average_rows(gen_soft), average_rows(real_soft));
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct EvalReport {
    std::vector<double> instance_loglik;
    double mean_loglik = 0.0;
    std::size_t num_importance_samples = 0;
    int modes_captured = 0;
    double label_kl_gen_vs_real = 0.0;
    double label_kl_real_vs_gen = 0.0;

    void finalize_mean() {
        mean_loglik = 0.0;
        for (double v : instance_loglik) mean_loglik += v;
        if (!instance_loglik.empty()) mean_loglik /= static_cast<double>(instance_loglik.size());
    }
};

}  // namespace presgan
