#include <gtest/gtest.h>

#include <cmath>

#include "presgan/adam.hpp"

namespace presgan {
namespace {

TEST(Adam, ZeroGradientLeavesParams) {
    Tensor p = Tensor::from({2}, {1.0, -2.0});
    Tensor g = Tensor::vector(2);
    AdamState st;
    adam_step(st, p, g, 0.1, 0.9, 0.999, 1e-8);
    EXPECT_EQ(p[0], 1.0);
    EXPECT_EQ(p[1], -2.0);
    EXPECT_EQ(st.t, 1u);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
    Tensor p = Tensor::from({2}, {0.0, 0.0});
    Tensor g = Tensor::from({2}, {3.0, -0.25});
    AdamState st;
    adam_step(st, p, g, 0.01, 0.9, 0.999, 1e-8);
    // bias-corrected m/sqrt(v) = g/|g| up to eps
    EXPECT_NEAR(p[0], -0.01, 1e-7);
    EXPECT_NEAR(p[1], 0.01, 1e-7);
}

TEST(Adam, MonotoneUnderConstantGradient) {
    Tensor p = Tensor::from({1}, {0.0});
    Tensor g = Tensor::from({1}, {1.0});
    AdamState st;
    double prev = 0.0;
    for (int i = 0; i < 5; ++i) {
        adam_step(st, p, g, 0.1, 0.5, 0.999, 1e-8);
        EXPECT_LT(p[0], prev);
        prev = p[0];
    }
}

TEST(Adam, ConvergesOnQuadratic) {
    Tensor p = Tensor::from({1}, {-4.0});
    AdamState st;
    for (int i = 0; i < 3000; ++i) {
        Tensor g = Tensor::from({1}, {2.0 * (p[0] - 3.0)});
        adam_step(st, p, g, 0.05, 0.9, 0.999, 1e-8);
    }
    EXPECT_NEAR(p[0], 3.0, 1e-3);
}

TEST(Adam, StateShapeMismatch) {
    Tensor p = Tensor::vector(2);
    Tensor g = Tensor::vector(2);
    AdamState st;
    adam_step(st, p, g, 0.1, 0.9, 0.999, 1e-8);
    Tensor p3 = Tensor::vector(3);
    Tensor g3 = Tensor::vector(3);
    EXPECT_THROW(adam_step(st, p3, g3, 0.1, 0.9, 0.999, 1e-8), config_error);
}

TEST(Adam, ParamVectorMatchesFlat) {
    ParamVector p;
    p.add("a", Tensor::from({2}, {1.0, 2.0}));
    p.add("b", Tensor::from({1}, {-1.0}));
    ParamVector g;
    g.add("a", Tensor::from({2}, {0.5, -0.5}));
    g.add("b", Tensor::from({1}, {2.0}));

    Tensor pf = Tensor::from({3}, {1.0, 2.0, -1.0});
    Tensor gf = Tensor::from({3}, {0.5, -0.5, 2.0});

    AdamState s1, s2;
    for (int i = 0; i < 3; ++i) {
        adam_step(s1, p, g, 0.1, 0.5, 0.999, 1e-8);
        adam_step(s2, pf, gf, 0.1, 0.5, 0.999, 1e-8);
    }
    std::vector<double> flat = p.flatten();
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(flat[i], pf[i]);
}

}  // namespace
}  // namespace presgan
