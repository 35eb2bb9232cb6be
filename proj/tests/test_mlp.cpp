#include <gtest/gtest.h>

#include <cmath>

#include "presgan/mlp.hpp"
#include "presgan/rng.hpp"

namespace presgan {
namespace {

void expect_close(const ParamVector& a, const ParamVector& b, double tol) {
    ASSERT_TRUE(a.same_layout(b));
    for (std::size_t s = 0; s < a.segments().size(); ++s) {
        const Tensor& ta = a.segments()[s].value;
        const Tensor& tb = b.segments()[s].value;
        for (std::size_t i = 0; i < ta.size(); ++i)
            EXPECT_NEAR(ta[i], tb[i], tol) << a.segments()[s].name << "[" << i << "]";
    }
}

MlpSpec spec_of(std::vector<std::size_t> layers, Activation hidden, Activation out) {
    MlpSpec s;
    s.layers = std::move(layers);
    s.hidden = hidden;
    s.output = out;
    return s;
}

TEST(MlpSpec, Validation) {
    EXPECT_THROW(spec_of({4}, Activation::tanh, Activation::identity).validate(), config_error);
    EXPECT_THROW(spec_of({4, 0, 2}, Activation::tanh, Activation::identity).validate(),
                 config_error);
    EXPECT_NO_THROW(spec_of({4, 3, 2}, Activation::tanh, Activation::identity).validate());
}

TEST(Mlp, ActivationNamesRoundTrip) {
    for (Activation a : {Activation::identity, Activation::tanh, Activation::sigmoid,
                         Activation::leaky_relu})
        EXPECT_EQ(activation_from_name(activation_name(a)), a);
    EXPECT_THROW(activation_from_name("swish"), config_error);
}

TEST(Mlp, GlorotInitBounds) {
    MlpSpec s = spec_of({6, 4, 2}, Activation::tanh, Activation::identity);
    RngStream rng(2);
    ParamVector p = init_mlp_params(s, rng);
    const Tensor& w0 = p.at("W0");
    double limit0 = std::sqrt(6.0 / (6 + 4));
    for (std::size_t i = 0; i < w0.size(); ++i) EXPECT_LE(std::abs(w0[i]), limit0);
    EXPECT_EQ(p.at("b0").squared_norm(), 0.0);
    EXPECT_EQ(p.at("b1").squared_norm(), 0.0);
    EXPECT_GT(w0.squared_norm(), 0.0);
}

// Forward pass checked against a from-scratch loop with std::tanh, no shared code.
TEST(Mlp, ForwardMatchesHandComputation) {
    MlpSpec s = spec_of({2, 3, 2}, Activation::tanh, Activation::identity);
    ParamVector p;
    Tensor w0 = Tensor::from({2, 3}, {0.1, -0.2, 0.3, 0.4, 0.5, -0.6});
    Tensor b0 = Tensor::from({3}, {0.01, -0.02, 0.03});
    Tensor w1 = Tensor::from({3, 2}, {1.0, -1.0, 0.5, 0.25, -0.75, 2.0});
    Tensor b1 = Tensor::from({2}, {-0.1, 0.2});
    p.add("W0", w0);
    p.add("b0", b0);
    p.add("W1", w1);
    p.add("b1", b1);

    Tensor x = Tensor::from({2, 2}, {0.7, -1.3, -0.4, 0.9});
    Tensor y = mlp_forward(s, p, x);

    for (std::size_t r = 0; r < 2; ++r) {
        double h[3];
        for (int j = 0; j < 3; ++j)
            h[j] = std::tanh(x(r, 0) * w0(0, j) + x(r, 1) * w0(1, j) + b0[j]);
        for (int o = 0; o < 2; ++o) {
            double v = b1[o];
            for (int j = 0; j < 3; ++j) v += h[j] * w1(j, o);
            EXPECT_NEAR(y(r, o), v, 1e-14);
        }
    }
}

TEST(Mlp, ForwardValidatesShapes) {
    MlpSpec s = spec_of({2, 3, 2}, Activation::tanh, Activation::identity);
    RngStream rng(4);
    ParamVector p = init_mlp_params(s, rng);
    EXPECT_THROW(mlp_forward(s, p, Tensor::matrix(2, 3)), config_error);
    ParamVector bad = p;
    bad.at("b1") = Tensor::vector(3);
    EXPECT_THROW(mlp_forward(s, bad, Tensor::matrix(2, 2)), config_error);
}

void check_gradients(Activation hidden, Activation out, std::uint64_t seed) {
    MlpSpec s = spec_of({3, 5, 4, 2}, hidden, out);
    RngStream rng(seed);
    ParamVector p = init_mlp_params(s, rng);
    Tensor x = rng.normal_tensor({4, 3});
    Tensor upstream = rng.normal_tensor({4, 2});

    MlpCache cache;
    mlp_forward(s, p, x, &cache);
    MlpGrads grads = mlp_backward(s, p, cache, upstream);

    auto loss_params = [&](const ParamVector& q) {
        Tensor y = mlp_forward(s, q, x);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * upstream[i];
        return acc;
    };
    ParamVector fd = finite_diff_grad(loss_params, p, 1e-5);
    expect_close(grads.params, fd, 2e-7);

    auto loss_input = [&](const Tensor& xi) {
        Tensor y = mlp_forward(s, p, xi);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * upstream[i];
        return acc;
    };
    Tensor fd_x = finite_diff_tensor_grad(loss_input, x, 1e-5);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(grads.input[i], fd_x[i], 2e-7);

    Tensor gx = mlp_backward_input(s, p, x, upstream);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(gx[i], grads.input[i]);
}

TEST(Mlp, GradMatchesFiniteDiffTanhIdentity) {
    check_gradients(Activation::tanh, Activation::identity, 101);
}

TEST(Mlp, GradMatchesFiniteDiffTanhSigmoid) {
    check_gradients(Activation::tanh, Activation::sigmoid, 102);
}

TEST(Mlp, GradMatchesFiniteDiffLeakyRelu) {
    check_gradients(Activation::leaky_relu, Activation::identity, 103);
}

TEST(Mlp, BatchRowsMatchSingleRowForward) {
    MlpSpec s = spec_of({3, 16, 2}, Activation::tanh, Activation::identity);
    RngStream rng(7);
    ParamVector p = init_mlp_params(s, rng);
    Tensor x = rng.normal_tensor({37, 3});
    Tensor y = mlp_forward(s, p, x);
    for (std::size_t r = 0; r < 37; ++r) {
        Tensor row = Tensor::matrix(1, 3);
        for (int c = 0; c < 3; ++c) row(0, c) = x(r, c);
        Tensor yr = mlp_forward(s, p, row);
        for (int c = 0; c < 2; ++c) EXPECT_NEAR(y(r, c), yr(0, c), 1e-9);
    }
}

TEST(Mlp, ActivationGradMatchesFiniteDiff) {
    for (Activation a : {Activation::identity, Activation::tanh, Activation::sigmoid,
                         Activation::leaky_relu}) {
        for (double v : {-1.3, -0.2, 0.4, 2.1}) {
            Tensor t = Tensor::from({1, 1}, {v});
            detail::apply_activation(a, 0.01, t);
            double value = t(0, 0);
            double h = 1e-6;
            Tensor up = Tensor::from({1, 1}, {v + h}), dn = Tensor::from({1, 1}, {v - h});
            detail::apply_activation(a, 0.01, up);
            detail::apply_activation(a, 0.01, dn);
            double fd = (up(0, 0) - dn(0, 0)) / (2 * h);
            EXPECT_NEAR(detail::activation_grad(a, 0.01, value), fd, 1e-6);
        }
    }
}

TEST(Mlp, NonFiniteInputRejected) {
    MlpSpec s = spec_of({2, 3, 1}, Activation::tanh, Activation::identity);
    RngStream rng(8);
    ParamVector p = init_mlp_params(s, rng);
    Tensor x = Tensor::matrix(1, 2);
    x(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(mlp_forward(s, p, x), numeric_error);
}

TEST(Mlp, ValidateParamsCatchesMismatch) {
    MlpSpec s = spec_of({2, 3, 1}, Activation::tanh, Activation::identity);
    RngStream rng(9);
    ParamVector p = init_mlp_params(s, rng);
    EXPECT_NO_THROW(validate_mlp_params(s, p, "unit"));
    ParamVector wrong = p;
    wrong.at("W0") = Tensor::matrix(3, 3);
    EXPECT_THROW(validate_mlp_params(s, wrong, "unit"), config_error);
}

}  // namespace
}  // namespace presgan
