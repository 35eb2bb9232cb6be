#pragma once

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "presgan/models.hpp"
#include "presgan/rng.hpp"

namespace presgan {

// Closed-form reference family: mu(z) = A z + b with observation noise
// diag(sigma^2). Marginally x ~ N(b, A A^T + diag(sigma^2)), and the
// posterior over z is Gaussian, so entropy, scores and posterior moments all
// have exact expressions to test the estimators against.
class LinearGaussian {
public:
    LinearGaussian(Eigen::MatrixXd A, Eigen::VectorXd b, Eigen::VectorXd sigma)
        : A_(std::move(A)), b_(std::move(b)), sigma_(std::move(sigma)) {
        if (A_.rows() != b_.size() || A_.rows() != sigma_.size())
            throw config_error("linear gaussian: A rows must match b and sigma lengths");
        if ((sigma_.array() <= 0.0).any()) throw config_error("linear gaussian: sigma must be > 0");

        Eigen::VectorXd d = sigma_.array().square();
        cov_ = A_ * A_.transpose();
        cov_.diagonal() += d;
        cov_llt_.compute(cov_);
        if (cov_llt_.info() != Eigen::Success)
            throw numeric_error("linear gaussian: marginal covariance not positive definite");
        cov_inv_ = cov_llt_.solve(Eigen::MatrixXd::Identity(dim_x(), dim_x()));
        logdet_cov_ = 2.0 * cov_llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();

        Eigen::MatrixXd at_dinv = A_.transpose() * d.cwiseInverse().asDiagonal();
        prec_z_ = Eigen::MatrixXd::Identity(dim_z(), dim_z()) + at_dinv * A_;
        prec_z_llt_.compute(prec_z_);
        if (prec_z_llt_.info() != Eigen::Success)
            throw numeric_error("linear gaussian: posterior precision not positive definite");
        post_gain_ = prec_z_llt_.solve(at_dinv);  // maps (x - b) to the posterior mean
    }

    Eigen::Index dim_x() const { return A_.rows(); }
    Eigen::Index dim_z() const { return A_.cols(); }
    const Eigen::MatrixXd& A() const { return A_; }
    const Eigen::VectorXd& b() const { return b_; }
    const Eigen::VectorXd& sigma() const { return sigma_; }
    const Eigen::MatrixXd& marginal_cov() const { return cov_; }

    double entropy() const {
        return 0.5 * (static_cast<double>(dim_x()) * (kLogTwoPi + 1.0) + logdet_cov_);
    }

    struct ThetaGrads {
        Eigen::MatrixXd dA;
        Eigen::VectorXd db;
        Eigen::VectorXd dlog_sigma;
    };

    // d/dtheta of the marginal entropy. Via dH = 1/2 tr(C^-1 dC):
    // dH/dA = C^-1 A, dH/db = 0, dH/dlog sigma_j = sigma_j^2 (C^-1)_jj.
    ThetaGrads entropy_grad() const {
        ThetaGrads g;
        g.dA = cov_inv_ * A_;
        g.db = Eigen::VectorXd::Zero(dim_x());
        g.dlog_sigma = cov_inv_.diagonal().array() * sigma_.array().square();
        return g;
    }

    double marginal_logpdf(const Eigen::VectorXd& x) const {
        Eigen::VectorXd u = x - b_;
        double quad = u.dot(cov_llt_.solve(u));
        return -0.5 * (quad + logdet_cov_ + static_cast<double>(dim_x()) * kLogTwoPi);
    }

    // d/dtheta of log p(x). With u = x - b and G = C^-1 u u^T C^-1 - C^-1:
    // d/dA = G A, d/db = C^-1 u, d/dlog sigma_j = G_jj sigma_j^2.
    ThetaGrads marginal_logpdf_grad(const Eigen::VectorXd& x) const {
        Eigen::VectorXd v = cov_llt_.solve(x - b_);
        Eigen::MatrixXd G = v * v.transpose() - cov_inv_;
        ThetaGrads g;
        g.dA = G * A_;
        g.db = v;
        g.dlog_sigma = G.diagonal().array() * sigma_.array().square();
        return g;
    }

    Eigen::VectorXd posterior_mean(const Eigen::VectorXd& x) const { return post_gain_ * (x - b_); }

    Eigen::MatrixXd posterior_cov() const {
        return prec_z_llt_.solve(Eigen::MatrixXd::Identity(dim_z(), dim_z()));
    }

    Eigen::VectorXd sample_posterior(const Eigen::VectorXd& x, RngStream& rng) const {
        Eigen::VectorXd xi(dim_z());
        for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
        // cov = (L L^T)^-1, so L^-T xi has exactly the posterior covariance.
        return posterior_mean(x) +
               prec_z_llt_.matrixL().toDenseMatrix().transpose().triangularView<Eigen::Upper>().solve(xi);
    }

    Eigen::VectorXd sample_x(RngStream& rng) const {
        Eigen::VectorXd z(dim_z()), e(dim_x());
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
        for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = rng.normal();
        return b_ + A_ * z + sigma_.cwiseProduct(e);
    }

    // The same model expressed as a (linear, no-hidden-layer) generator, so
    // estimator code under test runs on its ordinary inputs.
    GeneratorParams as_generator() const {
        GeneratorParams gen;
        gen.spec.layers = {static_cast<std::size_t>(dim_z()), static_cast<std::size_t>(dim_x())};
        gen.spec.output = Activation::identity;
        Tensor w = Tensor::matrix(dim_z(), dim_x());
        as_matrix(w) = A_.transpose();
        Tensor bias = Tensor::vector(dim_x());
        as_vector(bias) = b_;
        gen.eta.add("W0", std::move(w));
        gen.eta.add("b0", std::move(bias));
        gen.log_sigma = Tensor::vector(dim_x());
        for (Eigen::Index j = 0; j < sigma_.size(); ++j) gen.log_sigma[j] = std::log(sigma_[j]);
        return gen;
    }

private:
    Eigen::MatrixXd A_;
    Eigen::VectorXd b_;
    Eigen::VectorXd sigma_;
    Eigen::MatrixXd cov_, cov_inv_;
    Eigen::LLT<Eigen::MatrixXd> cov_llt_;
    double logdet_cov_ = 0.0;
    Eigen::MatrixXd prec_z_;
    Eigen::LLT<Eigen::MatrixXd> prec_z_llt_;
    Eigen::MatrixXd post_gain_;
};

}  // namespace presgan
