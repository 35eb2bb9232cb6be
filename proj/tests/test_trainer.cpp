#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "presgan/linear_gaussian.hpp"
#include "presgan/mixture.hpp"
#include "presgan/trainer.hpp"

namespace presgan {
namespace {

GeneratorParams small_gen(std::uint64_t seed) {
    RngStream rng(seed);
    return make_generator(2, 2, {6}, Activation::tanh, Activation::identity, std::log(0.04), rng);
}

DiscriminatorParams small_disc(std::uint64_t seed) {
    RngStream rng(seed);
    return make_discriminator(2, {6}, Activation::tanh, rng);
}

GeneratorParams constant_gen(double b, double sigma) {
    GeneratorParams gen;
    gen.spec.layers = {1, 1};
    gen.spec.output = Activation::identity;
    gen.eta.add("W0", Tensor::matrix(1, 1));
    gen.eta.add("b0", Tensor::from({1}, {b}));
    gen.log_sigma = Tensor::from({1}, {std::log(sigma)});
    return gen;
}

TEST(TrainConfig, Validation) {
    TrainConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.lambda = -0.1;
    EXPECT_THROW(cfg.validate(), config_error);
    cfg = {};
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), config_error);
    cfg = {};
    cfg.bounds.sigma_low = 0.5;
    cfg.bounds.sigma_high = 0.1;
    EXPECT_THROW(cfg.validate(), config_error);
}

TEST(Trainer, DiscLossAtConstantHalf) {
    GeneratorParams gen = small_gen(60);
    DiscriminatorParams disc = small_disc(61);
    disc.phi.at("W1").fill(0.0);
    disc.phi.at("b1").fill(0.0);  // sigmoid(0) = 0.5 on every input

    RngStream rng(62);
    Tensor x = rng.normal_tensor({16, 2});
    RngStream step_rng(63);
    DiscGrad res = disc_loss_and_grad(disc, gen, x, step_rng);
    EXPECT_NEAR(res.loss, 2 * std::log(2.0), 1e-12);
    // real term gives mean(D - 1) = -0.5, fake term gives mean(D) = +0.5
    EXPECT_NEAR(res.grad_phi.at("b1")[0], 0.0, 1e-12);
}

TEST(Trainer, DiscGradMatchesFiniteDiff) {
    GeneratorParams gen = small_gen(64);
    DiscriminatorParams disc = small_disc(65);
    RngStream rng(66);
    Tensor x = rng.normal_tensor({8, 2});

    RngStream g_rng(67);
    DiscGrad res = disc_loss_and_grad(disc, gen, x, g_rng);

    auto loss_of = [&](const ParamVector& phi) {
        DiscriminatorParams d2 = disc;
        d2.phi = phi;
        RngStream r(67);  // same draws as the gradient call
        return disc_loss_and_grad(d2, gen, x, r).loss;
    };
    ParamVector fd = finite_diff_grad(loss_of, disc.phi, 1e-5);
    for (std::size_t s = 0; s < fd.segments().size(); ++s) {
        const Tensor& a = res.grad_phi.segments()[s].value;
        const Tensor& b = fd.segments()[s].value;
        for (std::size_t i = 0; i < a.size(); ++i)
            EXPECT_NEAR(a[i], b[i], 1e-4) << fd.segments()[s].name;
    }
}

TEST(Trainer, GenAdvGradZeroWhenDiscIgnoresInput) {
    GeneratorParams gen = small_gen(68);
    DiscriminatorParams disc = small_disc(69);
    disc.phi.at("W0").fill(0.0);  // D no longer depends on x

    RngStream rng(70);
    Tensor z = rng.normal_tensor({8, 2});
    Tensor eps = rng.normal_tensor({8, 2});
    GenAdvGrad res = gen_adversarial_grad(disc, gen, z, eps);
    EXPECT_EQ(res.grad_eta.squared_norm(), 0.0);
    EXPECT_EQ(res.grad_log_sigma.squared_norm(), 0.0);
}

// Generator collapses to a single bias parameter and D = sigmoid(x):
// d/db log(1 - sigmoid(b)) = -sigmoid(b) = -0.5 at b = 0.
TEST(Trainer, GenAdvGradScalarChain) {
    GeneratorParams gen = constant_gen(0.0, 0.1);
    DiscriminatorParams disc;
    disc.spec.layers = {1, 1};
    disc.spec.output = Activation::sigmoid;
    disc.phi.add("W0", Tensor::from({1, 1}, {1.0}));
    disc.phi.add("b0", Tensor::from({1}, {0.0}));

    Tensor z = Tensor::matrix(1, 1);    // W0 of the generator is zero anyway
    Tensor eps = Tensor::matrix(1, 1);  // keep x exactly at b
    GenAdvGrad res = gen_adversarial_grad(disc, gen, z, eps);
    EXPECT_NEAR(res.grad_eta.at("b0")[0], -0.5, 1e-12);
    EXPECT_NEAR(res.grad_eta.at("W0")[0], 0.0, 1e-12);
}

void check_gen_adv_finite_diff(bool non_saturating) {
    GeneratorParams gen = small_gen(71);
    DiscriminatorParams disc = small_disc(72);
    RngStream rng(73);
    Tensor z = rng.normal_tensor({6, 2});
    Tensor eps = rng.normal_tensor({6, 2});

    GenAdvGrad res = gen_adversarial_grad(disc, gen, z, eps, non_saturating);

    auto loss_eta = [&](const ParamVector& eta) {
        GeneratorParams g2 = gen;
        g2.eta = eta;
        return gen_adversarial_grad(disc, g2, z, eps, non_saturating).loss;
    };
    ParamVector fd = finite_diff_grad(loss_eta, gen.eta, 1e-5);
    for (std::size_t s = 0; s < fd.segments().size(); ++s) {
        const Tensor& a = res.grad_eta.segments()[s].value;
        const Tensor& b = fd.segments()[s].value;
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-4);
    }

    auto loss_sigma = [&](const Tensor& ls) {
        GeneratorParams g2 = gen;
        g2.log_sigma = ls;
        return gen_adversarial_grad(disc, g2, z, eps, non_saturating).loss;
    };
    Tensor fd_s = finite_diff_tensor_grad(loss_sigma, gen.log_sigma, 1e-5);
    for (std::size_t j = 0; j < fd_s.size(); ++j)
        EXPECT_NEAR(res.grad_log_sigma[j], fd_s[j], 1e-4);
}

TEST(Trainer, GenAdvGradMatchesFiniteDiffSaturating) { check_gen_adv_finite_diff(false); }

TEST(Trainer, GenAdvGradMatchesFiniteDiffNonSaturating) { check_gen_adv_finite_diff(true); }

struct Replicates {
    std::vector<double> values;
    double mean() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s / values.size();
    }
    double se() const {
        double m = mean(), s = 0.0;
        for (double v : values) s += (v - m) * (v - m);
        return std::sqrt(s / values.size() / values.size());
    }
};

// Posterior of a constant-mean generator is the prior itself.
PosteriorSampler prior_sampler(std::size_t M, RngStream& rng) {
    return [M, &rng](const GeneratorParams& gen, const Tensor& x, const Tensor& z) {
        (void)gen;
        (void)x;
        std::vector<Tensor> out;
        for (std::size_t m = 0; m < M; ++m) out.push_back(rng.normal_tensor(z.shape()));
        return out;
    };
}

TEST(Trainer, EntropyGradConstantMeanBiasIsZero) {
    GeneratorParams gen = constant_gen(0.3, 0.5);
    RngStream rng(74);
    PosteriorSampler sampler = prior_sampler(2, rng);

    Replicates bias;
    const std::size_t R = 100, B = 1000;
    for (std::size_t r = 0; r < R; ++r) {
        Tensor z = rng.normal_tensor({B, 1});
        Tensor eps = rng.normal_tensor({B, 1});
        EntropyGrad g = entropy_grad_with_sampler(gen, z, eps, sampler);
        bias.values.push_back(g.grad_eta.at("b0")[0]);
    }
    EXPECT_NEAR(bias.mean(), 0.0, 3 * bias.se());
    EXPECT_GT(bias.se(), 0.0);
}

// Analytic d(-H)/d log sigma = -1 for a pure-noise model; in the sigma domain
// that is -1/sigma = -2 at sigma = 0.5.
TEST(Trainer, EntropyGradConstantMeanSigmaHandValue) {
    GeneratorParams gen = constant_gen(0.0, 0.5);
    RngStream rng(75);
    PosteriorSampler sampler = prior_sampler(2, rng);

    Replicates logsig;
    const std::size_t R = 100, B = 1000;
    for (std::size_t r = 0; r < R; ++r) {
        Tensor z = rng.normal_tensor({B, 1});
        Tensor eps = rng.normal_tensor({B, 1});
        EntropyGrad g = entropy_grad_with_sampler(gen, z, eps, sampler);
        logsig.values.push_back(g.grad_log_sigma[0]);
    }
    EXPECT_NEAR(logsig.mean(), -1.0, 3 * logsig.se());
    EXPECT_NEAR(logsig.mean() / 0.5, -2.0, 6 * logsig.se());
    EXPECT_LT(logsig.se(), 0.05);
}

LinearGaussian linear22() {
    Eigen::MatrixXd A(2, 2);
    A << 0.6, -0.2, 0.3, 0.8;
    Eigen::VectorXd b(2);
    b << 0.4, -1.1;
    Eigen::VectorXd sigma(2);
    sigma << 0.3, 0.7;
    return {A, b, sigma};
}

TEST(Trainer, EntropyGradUnbiasedOnLinearModel) {
    LinearGaussian lg = linear22();
    GeneratorParams gen = lg.as_generator();
    LinearGaussian::ThetaGrads oracle = lg.entropy_grad();

    RngStream rng(76);
    PosteriorSampler sampler = [&](const GeneratorParams&, const Tensor& x, const Tensor& z) {
        std::vector<Tensor> out(2, Tensor::matrix(z.rows(), z.cols()));
        for (std::size_t m = 0; m < 2; ++m)
            for (std::size_t i = 0; i < x.rows(); ++i) {
                Eigen::VectorXd xi(2);
                xi << x(i, 0), x(i, 1);
                Eigen::VectorXd zs = lg.sample_posterior(xi, rng);
                out[m](i, 0) = zs[0];
                out[m](i, 1) = zs[1];
            }
        return out;
    };

    const std::size_t R = 50, B = 2000;
    std::vector<Replicates> w(4), ls(2);
    Replicates b0, b1;
    for (std::size_t r = 0; r < R; ++r) {
        Tensor z = rng.normal_tensor({B, 2});
        Tensor eps = rng.normal_tensor({B, 2});
        EntropyGrad g = entropy_grad_with_sampler(gen, z, eps, sampler);
        const Tensor& gw = g.grad_eta.at("W0");
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) w[2 * i + j].values.push_back(gw(i, j));
        b0.values.push_back(g.grad_eta.at("b0")[0]);
        b1.values.push_back(g.grad_eta.at("b0")[1]);
        ls[0].values.push_back(g.grad_log_sigma[0]);
        ls[1].values.push_back(g.grad_log_sigma[1]);
    }
    // W0(i,j) parameterizes A(j,i); the estimator carries the minus sign.
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const Replicates& rep = w[2 * i + j];
            EXPECT_NEAR(rep.mean(), -oracle.dA(j, i), 3 * rep.se())
                << "W0(" << i << "," << j << ")";
        }
    EXPECT_NEAR(b0.mean(), 0.0, 3 * b0.se());
    EXPECT_NEAR(b1.mean(), 0.0, 3 * b1.se());
    for (int j = 0; j < 2; ++j)
        EXPECT_NEAR(ls[j].mean(), -oracle.dlog_sigma[j], 3 * ls[j].se());
}

// The variant that re-evaluates x at each posterior sample has expectation
// zero, so it cannot follow the analytic entropy gradient.
TEST(Trainer, EntropyGradResampleVariantVanishes) {
    LinearGaussian lg = linear22();
    GeneratorParams gen = lg.as_generator();
    LinearGaussian::ThetaGrads oracle = lg.entropy_grad();

    RngStream rng(77);
    PosteriorSampler sampler = [&](const GeneratorParams&, const Tensor& x, const Tensor& z) {
        std::vector<Tensor> out(2, Tensor::matrix(z.rows(), z.cols()));
        for (std::size_t m = 0; m < 2; ++m)
            for (std::size_t i = 0; i < x.rows(); ++i) {
                Eigen::VectorXd xi(2);
                xi << x(i, 0), x(i, 1);
                Eigen::VectorXd zs = lg.sample_posterior(xi, rng);
                out[m](i, 0) = zs[0];
                out[m](i, 1) = zs[1];
            }
        return out;
    };

    const std::size_t R = 50, B = 2000;
    Replicates w00;
    for (std::size_t r = 0; r < R; ++r) {
        Tensor z = rng.normal_tensor({B, 2});
        Tensor eps = rng.normal_tensor({B, 2});
        EntropyGrad g = entropy_grad_with_sampler(gen, z, eps, sampler, true);
        w00.values.push_back(g.grad_eta.at("W0")(0, 0));
    }
    EXPECT_NEAR(w00.mean(), 0.0, 3 * w00.se());
    EXPECT_GT(std::abs(-oracle.dA(0, 0)), 10 * w00.se());  // the test can tell them apart
}

TEST(Trainer, EntropyGradThroughHmcTracksOracle) {
    LinearGaussian lg = linear22();
    GeneratorParams gen = lg.as_generator();
    LinearGaussian::ThetaGrads oracle = lg.entropy_grad();

    HmcConfig cfg;  // paper-scale chain: burn 2, M 2, L 5
    cfg.step_size = 0.2;
    RngStream rng(78);
    const std::size_t R = 20, B = 2000;
    Replicates w00, ls0;
    for (std::size_t r = 0; r < R; ++r) {
        Tensor z = rng.normal_tensor({B, 2});
        Tensor eps = rng.normal_tensor({B, 2});
        std::vector<RngStream> streams;
        for (std::size_t i = 0; i < B; ++i)
            streams.push_back(RngStream::derive(79, {stream_tag::hmc_chain, r * B + i}));
        EntropyGrad g = entropy_grad(gen, z, eps, cfg, streams);
        EXPECT_EQ(g.skipped, 0u);
        EXPECT_GT(g.accept_rate, 0.3);
        w00.values.push_back(g.grad_eta.at("W0")(0, 0));
        ls0.values.push_back(g.grad_log_sigma[0]);
    }
    EXPECT_NEAR(w00.mean(), -oracle.dA(0, 0), 4 * w00.se());
    EXPECT_NEAR(ls0.mean(), -oracle.dlog_sigma[0], 4 * ls0.se());
}

TrainConfig tiny_train_config() {
    TrainConfig cfg;
    cfg.lambda = 0.1;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.num_posterior_samples = 1;
    cfg.burn_in = 1;
    cfg.leapfrog_steps = 2;
    cfg.seed = 404;
    return cfg;
}

Tensor tiny_dataset(std::size_t n, std::uint64_t seed) {
    MixtureSpec spec;
    spec.K = 4;
    spec.radius = 2.0;
    spec.component_std = 0.1;
    spec.proportions = MixtureSpec::uniform_proportions(4);
    spec.seed = seed;
    RngStream rng = RngStream::derive(seed, {stream_tag::data, 0});
    return sample_mixture(spec, n, rng).points;
}

TEST(Trainer, SigmaStaysInBoundsEveryEpoch) {
    Tensor data = tiny_dataset(64, 80);
    GeneratorParams gen = small_gen(81);
    DiscriminatorParams disc = small_disc(82);
    TrainConfig cfg = tiny_train_config();
    TrainState state;

    TrainCallbacks cb;
    cb.on_epoch = [&](const EpochStats& s) {
        EXPECT_GE(s.sigma_min, cfg.bounds.sigma_low - 1e-12);
        EXPECT_LE(s.sigma_max, cfg.bounds.sigma_high + 1e-12);
    };
    train(data, gen, disc, cfg, state, cb);
    Tensor sigma = gen.sigma();
    for (std::size_t j = 0; j < sigma.size(); ++j) {
        EXPECT_GE(sigma[j], cfg.bounds.sigma_low - 1e-12);
        EXPECT_LE(sigma[j], cfg.bounds.sigma_high + 1e-12);
    }
}

TEST(Trainer, EqualBoundsPinSigma) {
    Tensor data = tiny_dataset(48, 83);
    GeneratorParams gen = small_gen(84);
    DiscriminatorParams disc = small_disc(85);
    TrainConfig cfg = tiny_train_config();
    cfg.bounds.sigma_low = cfg.bounds.sigma_high = 0.1;
    cfg.epochs = 2;
    TrainState state;
    train(data, gen, disc, cfg, state, {});
    Tensor sigma = gen.sigma();
    for (std::size_t j = 0; j < sigma.size(); ++j) EXPECT_NEAR(sigma[j], 0.1, 1e-14);
}

TEST(Trainer, LambdaZeroSkipsEntropyTerm) {
    Tensor data = tiny_dataset(48, 86);
    GeneratorParams gen = small_gen(87);
    DiscriminatorParams disc = small_disc(88);
    TrainConfig cfg = tiny_train_config();
    cfg.lambda = 0.0;
    cfg.epochs = 1;
    TrainState state;
    std::vector<EpochStats> log = train(data, gen, disc, cfg, state, {});
    ASSERT_EQ(log.size(), 1u);
    EXPECT_EQ(log[0].entropy_grad_norm, 0.0);
    EXPECT_EQ(log[0].accept_rate, 0.0);
    EXPECT_TRUE(std::isfinite(log[0].disc_loss));
    EXPECT_TRUE(std::isfinite(log[0].gen_adv_loss));
    EXPECT_TRUE(gen.eta.all_finite());
}

TEST(Trainer, RunsAreReproducible) {
    auto run = [&] {
        Tensor data = tiny_dataset(64, 89);
        GeneratorParams gen = small_gen(90);
        DiscriminatorParams disc = small_disc(91);
        TrainConfig cfg = tiny_train_config();
        TrainState state;
        std::vector<EpochStats> log = train(data, gen, disc, cfg, state, {});
        return std::make_tuple(gen.eta.flatten(), gen.log_sigma, disc.phi.flatten(), log);
    };
    auto [eta_a, ls_a, phi_a, log_a] = run();
    auto [eta_b, ls_b, phi_b, log_b] = run();
    EXPECT_EQ(eta_a, eta_b);
    EXPECT_EQ(phi_a, phi_b);
    for (std::size_t j = 0; j < ls_a.size(); ++j) EXPECT_EQ(ls_a[j], ls_b[j]);
    ASSERT_EQ(log_a.size(), log_b.size());
    for (std::size_t e = 0; e < log_a.size(); ++e) {
        EXPECT_EQ(log_a[e].disc_loss, log_b[e].disc_loss);
        EXPECT_EQ(log_a[e].gen_adv_loss, log_b[e].gen_adv_loss);
        EXPECT_EQ(log_a[e].entropy_grad_norm, log_b[e].entropy_grad_norm);
        EXPECT_EQ(log_a[e].accept_rate, log_b[e].accept_rate);
    }
}

TEST(Trainer, EntropyStepMattersWhenLambdaPositive) {
    auto run = [&](double lambda) {
        Tensor data = tiny_dataset(64, 92);
        GeneratorParams gen = small_gen(93);
        DiscriminatorParams disc = small_disc(94);
        TrainConfig cfg = tiny_train_config();
        cfg.lambda = lambda;
        cfg.epochs = 2;
        TrainState state;
        train(data, gen, disc, cfg, state, {});
        return gen.eta.flatten();
    };
    EXPECT_NE(run(0.0), run(0.5));
}

TEST(Trainer, RejectsBadInputs) {
    GeneratorParams gen = small_gen(95);
    DiscriminatorParams disc = small_disc(96);
    TrainConfig cfg = tiny_train_config();
    TrainState state;
    Tensor empty = Tensor::matrix(0, 2);
    EXPECT_THROW(train(empty, gen, disc, cfg, state, {}), config_error);
    Tensor wrong_width = Tensor::matrix(10, 3);
    EXPECT_THROW(train(wrong_width, gen, disc, cfg, state, {}), config_error);
}

TEST(Trainer, EntropyEstimateRejectsAllSkipped) {
    GeneratorParams gen = constant_gen(0.0, 0.5);
    Tensor z = Tensor::matrix(3, 1);
    Tensor eps = Tensor::matrix(3, 1);
    Tensor x = reparam_sample(gen, z, eps);
    std::vector<Tensor> samples(2, Tensor::matrix(3, 1));
    std::vector<char> failed(3, 1);
    EXPECT_THROW(entropy_estimate(gen, z, eps, x, samples, failed, false), numeric_error);
}

}  // namespace
}  // namespace presgan
