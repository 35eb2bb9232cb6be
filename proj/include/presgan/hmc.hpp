#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "presgan/models.hpp"
#include "presgan/parallel.hpp"
#include "presgan/rng.hpp"

namespace presgan {

struct HmcConfig {
    std::size_t burn_in = 2;
    std::size_t num_samples = 2;
    std::size_t leapfrog_steps = 5;
    double step_size = 0.02;
    double target_accept = 0.67;
    bool adapt = true;
    double adapt_rate = 0.05;

    void validate() const {
        if (num_samples == 0) throw config_error("hmc: num_samples must be >= 1");
        if (leapfrog_steps == 0) throw config_error("hmc: leapfrog_steps must be >= 1");
        if (!(step_size > 0.0)) throw config_error("hmc: step_size must be > 0");
        if (!(target_accept > 0.0 && target_accept < 1.0))
            throw config_error("hmc: target_accept must lie in (0,1)");
        if (!(adapt_rate > 0.0)) throw config_error("hmc: adapt_rate must be > 0");
    }
};

struct HmcResult {
    Tensor samples;  // num_samples x latent_dim
    double accept_rate = 0.0;
    double final_step_size = 0.0;
};

namespace detail {

// Position values beyond this are treated as divergence: the proposal is
// rejected before any overflow can poison a batched pass.
inline constexpr double kDivergenceGuard = 1e100;

// Rows processed together in the lockstep batch; fixed so that matrix shapes
// (and therefore every floating-point result) never depend on the worker
// count.
inline constexpr std::size_t kChainChunkRows = 32;

inline bool row_ok(const Tensor& t, std::size_t i) {
    for (std::size_t j = 0; j < t.cols(); ++j) {
        double v = t(i, j);
        if (!std::isfinite(v) || std::abs(v) > kDivergenceGuard) return false;
    }
    return true;
}

inline void zero_row(Tensor& t, std::size_t i) {
    for (std::size_t j = 0; j < t.cols(); ++j) t(i, j) = 0.0;
}

}  // namespace detail

// Unnormalized posterior over the generator latent:
// log p(z | x) + const = log N(x; mu_eta(z), diag(sigma^2)) + log N(z; 0, I).
// Batched over rows; logp[i] and grad row i depend only on x/z row i.
struct PosteriorLogpGrad {
    std::vector<double> logp;
    Tensor grad;  // same shape as z
};

inline PosteriorLogpGrad posterior_logp_grad_batch(const GeneratorParams& gen, const Tensor& x,
                                                   const Tensor& z) {
    validate_generator(gen, "posterior logp");
    if (x.rank() != 2 || z.rank() != 2 || x.rows() != z.rows())
        throw config_error("posterior logp: x and z must be matrices with matching rows");
    MlpCache cache;
    Tensor mu = mlp_forward(gen.spec, gen.eta, z, &cache);
    if (x.cols() != mu.cols()) throw config_error("posterior logp: x width " + shape_string(x));

    PosteriorLogpGrad out;
    out.logp = conditional_loglik_rows(x, mu, gen.log_sigma);
    std::vector<double> prior = log_prior_rows(z);
    for (std::size_t i = 0; i < out.logp.size(); ++i) out.logp[i] += prior[i];

    // d logp / dz = J_mu(z)^T (x - mu) / sigma^2 - z
    Tensor upstream(x.shape());
    Tensor s = gen.sigma();
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            upstream(i, j) = (x(i, j) - mu(i, j)) / (s[j] * s[j]);
    out.grad = mlp_backward_input(gen.spec, gen.eta, cache, upstream);
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t j = 0; j < z.cols(); ++j) out.grad(i, j) -= z(i, j);
    return out;
}

inline std::pair<double, Tensor> posterior_logp_and_grad(const GeneratorParams& gen, const Tensor& x,
                                                         const Tensor& z) {
    if (x.rank() != 1 || z.rank() != 1)
        throw config_error("posterior logp: expected single x and z vectors");
    Tensor xm = Tensor::matrix(1, x.size());
    Tensor zm = Tensor::matrix(1, z.size());
    for (std::size_t j = 0; j < x.size(); ++j) xm(0, j) = x[j];
    for (std::size_t j = 0; j < z.size(); ++j) zm(0, j) = z[j];
    PosteriorLogpGrad r = posterior_logp_grad_batch(gen, xm, zm);
    Tensor grad = Tensor::vector(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) grad[j] = r.grad(0, j);
    if (!std::isfinite(r.logp[0])) throw numeric_error("posterior logp: non-finite density");
    return {r.logp[0], std::move(grad)};
}

// Standard leapfrog integration of Hamiltonian dynamics with potential
// -posterior_logp and identity mass matrix: half momentum step, L full
// position steps with momentum updates between them, half momentum step.
inline std::pair<Tensor, Tensor> leapfrog(const GeneratorParams& gen, const Tensor& x,
                                          const Tensor& z0, const Tensor& p0, double step,
                                          std::size_t steps) {
    if (!(step > 0.0)) throw config_error("leapfrog: step must be > 0");
    if (z0.rank() != 1 || p0.rank() != 1 || z0.size() != p0.size())
        throw config_error("leapfrog: z0 and p0 must be vectors of equal length");
    Tensor z = z0, p = p0;
    auto grad = [&](const Tensor& at) { return posterior_logp_and_grad(gen, x, at).second; };
    Tensor g = grad(z);
    for (std::size_t j = 0; j < p.size(); ++j) p[j] += 0.5 * step * g[j];
    for (std::size_t l = 0; l < steps; ++l) {
        for (std::size_t j = 0; j < z.size(); ++j) z[j] += step * p[j];
        g = grad(z);
        double scale = (l + 1 == steps) ? 0.5 * step : step;
        for (std::size_t j = 0; j < p.size(); ++j) p[j] += scale * g[j];
    }
    z.ensure_finite("leapfrog");
    p.ensure_finite("leapfrog");
    return {std::move(z), std::move(p)};
}

struct HmcBatchResult {
    std::vector<Tensor> samples;        // num_samples tensors of shape batch x latent_dim
    std::vector<double> accept_rate;    // per chain: accepted / (burn_in + num_samples)
    std::vector<double> final_step_size;
    std::vector<char> failed;           // initial state had a non-finite density
};

// Lockstep chains, one per batch row. Each row draws only from its own
// stream, so any scheduling (or running a row alone) yields the same draws;
// divergent rows are rejected per-row without disturbing their neighbours.
inline HmcBatchResult sample_posterior_batch(const GeneratorParams& gen, const Tensor& x,
                                             const Tensor& z_init, const HmcConfig& cfg,
                                             std::vector<RngStream>& streams) {
    cfg.validate();
    validate_generator(gen, "hmc");
    if (x.rank() != 2 || z_init.rank() != 2 || x.rows() != z_init.rows())
        throw config_error("hmc: x and z_init must be matrices with matching rows");
    if (streams.size() != x.rows()) throw config_error("hmc: one rng stream per batch row required");

    const std::size_t batch = x.rows();
    const std::size_t k = z_init.cols();
    const std::size_t total = cfg.burn_in + cfg.num_samples;

    HmcBatchResult out;
    out.samples.assign(cfg.num_samples, Tensor::matrix(batch, k));
    out.accept_rate.assign(batch, 0.0);
    out.final_step_size.assign(batch, cfg.step_size);
    out.failed.assign(batch, 0);

    const std::size_t chunk_rows = detail::kChainChunkRows;
    const std::size_t chunks = (batch + chunk_rows - 1) / chunk_rows;

    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t lo = c * chunk_rows;
        const std::size_t m = std::min(chunk_rows, batch - lo);

        Tensor xc = Tensor::matrix(m, x.cols());
        Tensor z = Tensor::matrix(m, k);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < x.cols(); ++j) xc(i, j) = x(lo + i, j);
            for (std::size_t j = 0; j < k; ++j) z(i, j) = z_init(lo + i, j);
        }

        std::vector<char> failed(m, 0);
        for (std::size_t i = 0; i < m; ++i)
            if (!detail::row_ok(z, i) || !detail::row_ok(xc, i)) {
                failed[i] = 1;
                detail::zero_row(z, i);
                detail::zero_row(xc, i);  // keep the batched passes finite
            }

        PosteriorLogpGrad cur = posterior_logp_grad_batch(gen, xc, z);
        for (std::size_t i = 0; i < m; ++i)
            if (!failed[i] && (!std::isfinite(cur.logp[i]) || !detail::row_ok(cur.grad, i)))
                failed[i] = 1;

        std::vector<double> step(m, cfg.step_size);
        std::vector<std::size_t> accepted(m, 0);
        Tensor zp = Tensor::matrix(m, k);   // proposal position
        Tensor p = Tensor::matrix(m, k);    // momentum
        std::vector<double> energy0(m);
        std::vector<char> doomed(m);

        for (std::size_t t = 0; t < total; ++t) {
            for (std::size_t i = 0; i < m; ++i) {
                double kin = 0.0;
                for (std::size_t j = 0; j < k; ++j) {
                    p(i, j) = streams[lo + i].normal();
                    kin += p(i, j) * p(i, j);
                }
                energy0[i] = -cur.logp[i] + 0.5 * kin;
            }
            for (std::size_t i = 0; i < m; ++i) doomed[i] = failed[i];
            zp = z;

            // leapfrog trajectory, all live rows in lockstep
            Tensor g = cur.grad;
            for (std::size_t i = 0; i < m; ++i)
                if (!doomed[i])
                    for (std::size_t j = 0; j < k; ++j) p(i, j) += 0.5 * step[i] * g(i, j);
            PosteriorLogpGrad prop;
            for (std::size_t l = 0; l < cfg.leapfrog_steps; ++l) {
                for (std::size_t i = 0; i < m; ++i) {
                    if (doomed[i]) continue;
                    for (std::size_t j = 0; j < k; ++j) zp(i, j) += step[i] * p(i, j);
                    if (!detail::row_ok(zp, i)) {
                        doomed[i] = 1;
                        detail::zero_row(zp, i);
                        detail::zero_row(p, i);
                    }
                }
                prop = posterior_logp_grad_batch(gen, xc, zp);
                for (std::size_t i = 0; i < m; ++i) {
                    if (doomed[i]) continue;
                    if (!std::isfinite(prop.logp[i]) || !detail::row_ok(prop.grad, i)) {
                        doomed[i] = 1;
                        detail::zero_row(zp, i);
                        detail::zero_row(p, i);
                        continue;
                    }
                    double scale = (l + 1 == cfg.leapfrog_steps) ? 0.5 * step[i] : step[i];
                    for (std::size_t j = 0; j < k; ++j) p(i, j) += scale * prop.grad(i, j);
                }
            }

            for (std::size_t i = 0; i < m; ++i) {
                // every chain consumes exactly latent_dim normals and one
                // uniform per transition, so stream alignment never depends
                // on data values
                double u = streams[lo + i].uniform();
                bool accept = false;
                if (!failed[i] && !doomed[i]) {
                    double kin = 0.0;
                    for (std::size_t j = 0; j < k; ++j) kin += p(i, j) * p(i, j);
                    double energy1 = -prop.logp[i] + 0.5 * kin;
                    accept = std::log(1.0 - u) < energy0[i] - energy1;
                }
                if (accept) {
                    ++accepted[i];
                    for (std::size_t j = 0; j < k; ++j) z(i, j) = zp(i, j);
                    cur.logp[i] = prop.logp[i];
                    for (std::size_t j = 0; j < k; ++j) cur.grad(i, j) = prop.grad(i, j);
                }
                if (cfg.adapt && t < cfg.burn_in && !failed[i]) {
                    step[i] *= std::exp(cfg.adapt_rate * ((accept ? 1.0 : 0.0) - cfg.target_accept));
                    step[i] = std::min(1e2, std::max(1e-8, step[i]));
                }
                if (t >= cfg.burn_in)
                    for (std::size_t j = 0; j < k; ++j)
                        out.samples[t - cfg.burn_in](lo + i, j) = z(i, j);
            }
        }

        for (std::size_t i = 0; i < m; ++i) {
            out.accept_rate[lo + i] = static_cast<double>(accepted[i]) / static_cast<double>(total);
            out.final_step_size[lo + i] = step[i];
            out.failed[lo + i] = failed[i];
        }
    });
    return out;
}

// Single-chain front end over the batched machinery.
inline HmcResult sample_posterior(const GeneratorParams& gen, const Tensor& x, const Tensor& z_init,
                                  const HmcConfig& cfg, RngStream& rng) {
    if (x.rank() != 1 || z_init.rank() != 1)
        throw config_error("hmc: expected single x and z vectors");
    Tensor xm = Tensor::matrix(1, x.size());
    Tensor zm = Tensor::matrix(1, z_init.size());
    for (std::size_t j = 0; j < x.size(); ++j) xm(0, j) = x[j];
    for (std::size_t j = 0; j < z_init.size(); ++j) zm(0, j) = z_init[j];
    std::vector<RngStream> streams{rng};
    HmcBatchResult batch = sample_posterior_batch(gen, xm, zm, cfg, streams);
    rng = streams[0];
    if (batch.failed[0]) throw numeric_error("hmc: non-finite density at the initial state");
    HmcResult out;
    out.samples = Tensor::matrix(cfg.num_samples, z_init.size());
    for (std::size_t t = 0; t < cfg.num_samples; ++t)
        for (std::size_t j = 0; j < z_init.size(); ++j) out.samples(t, j) = batch.samples[t](0, j);
    out.accept_rate = batch.accept_rate[0];
    out.final_step_size = batch.final_step_size[0];
    return out;
}

}  // namespace presgan
