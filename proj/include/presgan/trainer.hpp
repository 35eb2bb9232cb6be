#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "presgan/adam.hpp"
#include "presgan/hmc.hpp"
#include "presgan/models.hpp"

namespace presgan {

// Fixed tags for deriving independent random streams from the run seed.
// Streams are addressed by (seed, tag, epoch, iteration, element), so any
// part of a run can be replayed in isolation.
namespace stream_tag {
inline constexpr std::uint64_t shuffle = 1;
inline constexpr std::uint64_t disc = 2;
inline constexpr std::uint64_t gen = 3;
inline constexpr std::uint64_t hmc_chain = 4;
inline constexpr std::uint64_t model_init = 5;
inline constexpr std::uint64_t data = 6;
inline constexpr std::uint64_t encoder_fit = 7;
inline constexpr std::uint64_t map_fit = 8;
inline constexpr std::uint64_t is_draws = 9;
inline constexpr std::uint64_t metric_samples = 10;
}  // namespace stream_tag

struct TrainConfig {
    double lambda = 0.0;  // entropy penalty weight
    NoiseBounds bounds;
    std::size_t num_posterior_samples = 2;  // M
    std::size_t burn_in = 2;
    std::size_t leapfrog_steps = 5;
    double hmc_step_size = 0.02;
    double target_accept = 0.67;
    bool hmc_adapt = true;
    double lr_gen = 1e-4;
    double lr_disc = 1e-3;
    double lr_sigma = 1e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 100;
    std::size_t epochs = 500;
    std::size_t disc_steps_per_gen_step = 1;
    std::uint64_t seed = 0;
    bool non_saturating = false;     // use -log D(x) for the generator instead of log(1-D(x))
    bool entropy_resample_x = false; // diagnostic variant, see entropy_estimate

    HmcConfig hmc() const {
        HmcConfig h;
        h.burn_in = burn_in;
        h.num_samples = num_posterior_samples;
        h.leapfrog_steps = leapfrog_steps;
        h.step_size = hmc_step_size;
        h.target_accept = target_accept;
        h.adapt = hmc_adapt;
        return h;
    }

    void validate() const {
        if (!(lambda >= 0.0)) throw config_error("train: lambda must be >= 0");
        bounds.validate();
        hmc().validate();
        if (!(lr_gen > 0.0 && lr_disc > 0.0 && lr_sigma > 0.0))
            throw config_error("train: learning rates must be > 0");
        if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
            throw config_error("train: adam betas must lie in [0,1)");
        if (!(adam_eps > 0.0)) throw config_error("train: adam_eps must be > 0");
        if (batch_size == 0) throw config_error("train: batch_size must be >= 1");
        if (disc_steps_per_gen_step == 0) throw config_error("train: disc_steps_per_gen_step must be >= 1");
    }
};

struct DiscGrad {
    double loss = 0.0;
    ParamVector grad_phi;
};

// Cross-entropy discriminator loss on noised real data vs generated samples:
// loss = -mean log D(x + sigma*eps) - mean log(1 - D(mu(z) + sigma*eps')).
// Elements where the probability clamp is active contribute zero gradient.
inline DiscGrad disc_loss_and_grad(const DiscriminatorParams& disc, const GeneratorParams& gen,
                                   const Tensor& x_batch, RngStream& rng) {
    validate_generator(gen, "disc step");
    validate_mlp_params(disc.spec, disc.phi, "disc step");
    if (x_batch.rank() != 2 || x_batch.rows() == 0)
        throw config_error("disc step: need a non-empty batch matrix");
    const std::size_t batch = x_batch.rows();
    const std::size_t d = gen.data_dim();
    const std::size_t k = gen.latent_dim();

    Tensor eps_real = rng.normal_tensor({batch, d});
    Tensor x_hat = noise_real_data(x_batch, gen.log_sigma, eps_real);
    Tensor z = rng.normal_tensor({batch, k});
    Tensor eps_fake = rng.normal_tensor({batch, d});
    Tensor x_fake = reparam_sample(gen, z, eps_fake);

    MlpCache cache_real, cache_fake;
    Tensor p_real = discriminator_prob(disc, x_hat, &cache_real);
    Tensor p_fake = discriminator_prob(disc, x_fake, &cache_fake);

    DiscGrad out;
    Tensor up_real = Tensor::matrix(batch, 1);
    Tensor up_fake = Tensor::matrix(batch, 1);
    double scale = 1.0 / static_cast<double>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        out.loss += -std::log(p_real[i]) - std::log(1.0 - p_fake[i]);
        bool real_clamped = cache_real.acts.back()[i] != p_real[i];
        bool fake_clamped = cache_fake.acts.back()[i] != p_fake[i];
        up_real[i] = real_clamped ? 0.0 : -scale / p_real[i];
        up_fake[i] = fake_clamped ? 0.0 : scale / (1.0 - p_fake[i]);
    }
    out.loss *= scale;
    if (!std::isfinite(out.loss)) throw numeric_error("disc step: non-finite loss");

    out.grad_phi = mlp_backward(disc.spec, disc.phi, cache_real, up_real).params;
    out.grad_phi.axpy(1.0, mlp_backward(disc.spec, disc.phi, cache_fake, up_fake).params);
    return out;
}

struct GenAdvGrad {
    double loss = 0.0;
    ParamVector grad_eta;
    Tensor grad_log_sigma;
};

// Gradient of the generator's adversarial objective through the
// reparameterized sample x = mu(z) + sigma*eps, into both the mean network
// and log sigma. Saturating form mean log(1-D(x)) by default.
inline GenAdvGrad gen_adversarial_grad(const DiscriminatorParams& disc, const GeneratorParams& gen,
                                       const Tensor& z_batch, const Tensor& eps_batch,
                                       bool non_saturating = false) {
    validate_generator(gen, "gen step");
    validate_mlp_params(disc.spec, disc.phi, "gen step");
    if (z_batch.rank() != 2 || z_batch.rows() == 0 || z_batch.cols() != gen.latent_dim())
        throw config_error("gen step: z batch shape " + shape_string(z_batch));
    const std::size_t batch = z_batch.rows();

    MlpCache cache_gen;
    Tensor mu = generator_mean(gen, z_batch, &cache_gen);
    Tensor s = gen.sigma();
    Tensor x = mu;
    if (!eps_batch.same_shape(mu)) throw config_error("gen step: eps batch shape mismatch");
    for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) += s[j] * eps_batch(i, j);

    MlpCache cache_disc;
    Tensor p = discriminator_prob(disc, x, &cache_disc);

    GenAdvGrad out;
    Tensor up = Tensor::matrix(batch, 1);
    double scale = 1.0 / static_cast<double>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        bool clamped = cache_disc.acts.back()[i] != p[i];
        if (non_saturating) {
            out.loss += -std::log(p[i]);
            up[i] = clamped ? 0.0 : -scale / p[i];
        } else {
            out.loss += std::log(1.0 - p[i]);
            up[i] = clamped ? 0.0 : -scale / (1.0 - p[i]);
        }
    }
    out.loss *= scale;
    if (!std::isfinite(out.loss)) throw numeric_error("gen step: non-finite loss");

    Tensor dx = mlp_backward_input(disc.spec, disc.phi, cache_disc, up);
    MlpGrads gg = mlp_backward(gen.spec, gen.eta, cache_gen, dx);
    out.grad_eta = std::move(gg.params);
    out.grad_log_sigma = Tensor::vector(x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < batch; ++i) acc += dx(i, j) * s[j] * eps_batch(i, j);
        out.grad_log_sigma[j] = acc;
    }
    return out;
}

struct EntropyGrad {
    ParamVector grad_eta;      // gradient of the NEGATIVE entropy
    Tensor grad_log_sigma;     // same sign convention
    double accept_rate = 0.0;
    double mean_final_step = 0.0;
    std::size_t skipped = 0;
};

// Shared estimator body. With posterior samples z^(1..M) for each generated
// x = mu(z) + sigma*eps:
//   grad(-H) wrt theta = mean_i [ s_i . d x_i / d theta ],
//   s_i = (1/M) sum_m -(x_i - mu(z_i^m)) / sigma^2   (the score estimate),
// where d x / d eta flows through mu at the original z and
// d x / d log sigma_j = sigma_j eps_j. The score is evaluated at the fixed
// generated x; only z^(m) varies inside the average.
//
// resample_x instead re-expresses x at each posterior sample (score and mean
// Jacobian both taken at z^(m)). That transcription looks similar but its
// expectation vanishes, so it is exposed only for comparison experiments.
inline EntropyGrad entropy_estimate(const GeneratorParams& gen, const Tensor& z_batch,
                                    const Tensor& eps_batch, const Tensor& x_batch,
                                    const std::vector<Tensor>& samples,
                                    const std::vector<char>& failed, bool resample_x) {
    const std::size_t batch = z_batch.rows();
    const std::size_t d = gen.data_dim();
    const std::size_t num_samples = samples.size();
    if (num_samples == 0) throw config_error("entropy estimate: no posterior samples");

    std::size_t kept = 0;
    for (std::size_t i = 0; i < batch; ++i)
        if (!failed[i]) ++kept;
    if (kept == 0) throw numeric_error("entropy estimate: every batch element was skipped");

    EntropyGrad out;
    out.skipped = batch - kept;
    Tensor s = gen.sigma();
    double scale = 1.0 / static_cast<double>(kept);

    if (!resample_x) {
        Tensor score = Tensor::matrix(batch, d);
        for (std::size_t m = 0; m < num_samples; ++m) {
            Tensor sc = conditional_score_x(gen, x_batch, samples[m]);
            for (std::size_t i = 0; i < score.size(); ++i) score[i] += sc[i];
        }
        Tensor upstream = Tensor::matrix(batch, d);
        for (std::size_t i = 0; i < batch; ++i)
            if (!failed[i])
                for (std::size_t j = 0; j < d; ++j)
                    upstream(i, j) = score(i, j) * scale / static_cast<double>(num_samples);
        MlpCache cache;
        mlp_forward(gen.spec, gen.eta, z_batch, &cache);
        out.grad_eta = mlp_backward(gen.spec, gen.eta, cache, upstream).params;
        out.grad_log_sigma = Tensor::vector(d);
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < batch; ++i) acc += upstream(i, j) * s[j] * eps_batch(i, j);
            out.grad_log_sigma[j] = acc;
        }
    } else {
        out.grad_eta = ParamVector::zeros_like(gen.eta);
        out.grad_log_sigma = Tensor::vector(d);
        double mscale = scale / static_cast<double>(num_samples);
        Tensor upstream = Tensor::matrix(batch, d);
        for (std::size_t i = 0; i < batch; ++i)
            if (!failed[i])
                for (std::size_t j = 0; j < d; ++j)
                    upstream(i, j) = -eps_batch(i, j) / s[j] * mscale;  // score of x(z^m, eps)
        for (std::size_t m = 0; m < num_samples; ++m) {
            MlpCache cache;
            mlp_forward(gen.spec, gen.eta, samples[m], &cache);
            out.grad_eta.axpy(1.0, mlp_backward(gen.spec, gen.eta, cache, upstream).params);
        }
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < batch; ++i)
                acc += upstream(i, j) * s[j] * eps_batch(i, j) * static_cast<double>(num_samples);
            out.grad_log_sigma[j] = acc;
        }
    }
    out.grad_eta.ensure_finite("entropy estimate");
    out.grad_log_sigma.ensure_finite("entropy estimate");
    return out;
}

// Entropy gradient with HMC posterior sampling, one chain per element,
// initialized at the z that generated each x (already a stationary draw).
inline EntropyGrad entropy_grad(const GeneratorParams& gen, const Tensor& z_batch,
                                const Tensor& eps_batch, const HmcConfig& cfg,
                                std::vector<RngStream>& streams, bool resample_x = false) {
    Tensor x = reparam_sample(gen, z_batch, eps_batch);
    HmcBatchResult chains = sample_posterior_batch(gen, x, z_batch, cfg, streams);
    EntropyGrad out = entropy_estimate(gen, z_batch, eps_batch, x, chains.samples, chains.failed,
                                       resample_x);
    double accept = 0.0, log_step = 0.0;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < z_batch.rows(); ++i) {
        if (chains.failed[i]) continue;
        accept += chains.accept_rate[i];
        log_step += std::log(chains.final_step_size[i]);
        ++kept;
    }
    out.accept_rate = accept / static_cast<double>(kept);
    out.mean_final_step = std::exp(log_step / static_cast<double>(kept));
    return out;
}

// Same estimator with a caller-supplied posterior sampler (e.g. the exact
// conjugate sampler of the linear-Gaussian family) in place of HMC.
using PosteriorSampler =
    std::function<std::vector<Tensor>(const GeneratorParams&, const Tensor& x, const Tensor& z_init)>;

inline EntropyGrad entropy_grad_with_sampler(const GeneratorParams& gen, const Tensor& z_batch,
                                             const Tensor& eps_batch, const PosteriorSampler& sampler,
                                             bool resample_x = false) {
    Tensor x = reparam_sample(gen, z_batch, eps_batch);
    std::vector<Tensor> samples = sampler(gen, x, z_batch);
    std::vector<char> failed(z_batch.rows(), 0);
    return entropy_estimate(gen, z_batch, eps_batch, x, samples, failed, resample_x);
}

struct TrainState {
    AdamState opt_phi, opt_eta, opt_log_sigma;
    double hmc_step_size = 0.0;  // warm-started across iterations
    std::size_t next_epoch = 0;
};

struct EpochStats {
    std::size_t epoch = 0;
    double disc_loss = 0.0;
    double gen_adv_loss = 0.0;
    double entropy_grad_norm = 0.0;  // pre-lambda estimator norm, 0 when lambda == 0
    double accept_rate = 0.0;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
};

struct TrainCallbacks {
    std::function<void(const EpochStats&)> on_epoch;
    std::function<void(const std::string&)> on_warning;
};

// One pass of the alternating scheme per iteration: discriminator step(s) on
// the minibatch with fresh noise, then a generator step whose gradient is the
// adversarial term plus lambda times the entropy-penalty estimate, then the
// sigma update and truncation into the configured bounds.
inline std::vector<EpochStats> train(const Tensor& data, GeneratorParams& gen,
                                     DiscriminatorParams& disc, const TrainConfig& cfg,
                                     TrainState& state, const TrainCallbacks& callbacks = {}) {
    cfg.validate();
    validate_generator(gen, "train");
    validate_mlp_params(disc.spec, disc.phi, "train");
    if (data.rank() != 2 || data.rows() == 0) throw config_error("train: empty dataset");
    if (data.cols() != gen.data_dim() || data.cols() != disc.data_dim())
        throw config_error("train: dataset width does not match the models");

    if (!(state.hmc_step_size > 0.0)) state.hmc_step_size = cfg.hmc_step_size;
    const std::size_t n = data.rows();
    const std::size_t batch = std::min<std::size_t>(cfg.batch_size, n);
    const std::size_t iters = std::max<std::size_t>(1, n / cfg.batch_size);
    const std::size_t k = gen.latent_dim();
    const std::size_t d = gen.data_dim();

    std::vector<EpochStats> log;
    std::vector<std::size_t> indices(n);

    for (std::size_t epoch = state.next_epoch; epoch < cfg.epochs; ++epoch) {
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        RngStream shuffle_rng = RngStream::derive(cfg.seed, {stream_tag::shuffle, epoch});
        shuffle_rng.shuffle(indices);

        EpochStats stats;
        stats.epoch = epoch;
        for (std::size_t it = 0; it < iters; ++it) {
            Tensor x_mb = Tensor::matrix(batch, d);
            for (std::size_t i = 0; i < batch; ++i) {
                std::size_t row = indices[it * batch + i];
                for (std::size_t j = 0; j < d; ++j) x_mb(i, j) = data(row, j);
            }

            double disc_loss = 0.0;
            for (std::size_t sub = 0; sub < cfg.disc_steps_per_gen_step; ++sub) {
                RngStream r = RngStream::derive(cfg.seed, {stream_tag::disc, epoch, it, sub});
                DiscGrad dg = disc_loss_and_grad(disc, gen, x_mb, r);
                adam_step(state.opt_phi, disc.phi, dg.grad_phi, cfg.lr_disc, cfg.adam_beta1,
                          cfg.adam_beta2, cfg.adam_eps);
                disc_loss += dg.loss;
            }
            stats.disc_loss += disc_loss / static_cast<double>(cfg.disc_steps_per_gen_step);

            RngStream rg = RngStream::derive(cfg.seed, {stream_tag::gen, epoch, it});
            Tensor z = rg.normal_tensor({batch, k});
            Tensor eps = rg.normal_tensor({batch, d});
            GenAdvGrad adv = gen_adversarial_grad(disc, gen, z, eps, cfg.non_saturating);
            stats.gen_adv_loss += adv.loss;

            ParamVector total_eta = std::move(adv.grad_eta);
            Tensor total_log_sigma = std::move(adv.grad_log_sigma);
            if (cfg.lambda > 0.0) {
                HmcConfig hc = cfg.hmc();
                hc.step_size = state.hmc_step_size;
                std::vector<RngStream> streams;
                streams.reserve(batch);
                for (std::size_t i = 0; i < batch; ++i)
                    streams.push_back(RngStream::derive(cfg.seed, {stream_tag::hmc_chain, epoch, it, i}));
                EntropyGrad ent = entropy_grad(gen, z, eps, hc, streams, cfg.entropy_resample_x);
                if (ent.skipped > 0 && callbacks.on_warning)
                    callbacks.on_warning("epoch " + std::to_string(epoch) + " iter " + std::to_string(it) +
                                         ": skipped " + std::to_string(ent.skipped) +
                                         " elements after chain failures");
                total_eta.axpy(cfg.lambda, ent.grad_eta);
                for (std::size_t j = 0; j < d; ++j)
                    total_log_sigma[j] += cfg.lambda * ent.grad_log_sigma[j];
                stats.entropy_grad_norm +=
                    std::sqrt(ent.grad_eta.squared_norm() + ent.grad_log_sigma.squared_norm());
                stats.accept_rate += ent.accept_rate;
                state.hmc_step_size = ent.mean_final_step;
            }

            adam_step(state.opt_eta, gen.eta, total_eta, cfg.lr_gen, cfg.adam_beta1, cfg.adam_beta2,
                      cfg.adam_eps);
            adam_step(state.opt_log_sigma, gen.log_sigma, total_log_sigma, cfg.lr_sigma,
                      cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
            truncate_sigma(gen.log_sigma, cfg.bounds);

            if (!gen.eta.all_finite() || !gen.log_sigma.all_finite() || !disc.phi.all_finite()) {
                if (callbacks.on_warning)
                    callbacks.on_warning("epoch " + std::to_string(epoch) + " iter " +
                                         std::to_string(it) + ": parameters became non-finite");
                throw numeric_error("train: non-finite parameters at epoch " + std::to_string(epoch));
            }
        }

        double inv_iters = 1.0 / static_cast<double>(iters);
        stats.disc_loss *= inv_iters;
        stats.gen_adv_loss *= inv_iters;
        stats.entropy_grad_norm *= inv_iters;
        stats.accept_rate *= inv_iters;
        Tensor s = gen.sigma();
        stats.sigma_min = s.min();
        stats.sigma_max = s.max();

        log.push_back(stats);
        state.next_epoch = epoch + 1;
        if (callbacks.on_epoch) callbacks.on_epoch(stats);
    }
    return log;
}

}  // namespace presgan
