#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "presgan/rng.hpp"

namespace presgan {
namespace {

TEST(Rng, SameSeedSamePathSameSequence) {
    RngStream a = RngStream::derive(7, {1, 2, 3});
    RngStream b = RngStream::derive(7, {1, 2, 3});
    for (int i = 0; i < 64; ++i) EXPECT_EQ(a.uniform(), b.uniform());
    for (int i = 0; i < 64; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Rng, DifferentPathsDiverge) {
    RngStream a = RngStream::derive(7, {1, 2, 3});
    RngStream b = RngStream::derive(7, {1, 2, 4});
    RngStream c = RngStream::derive(8, {1, 2, 3});
    int same_ab = 0, same_ac = 0;
    for (int i = 0; i < 32; ++i) {
        double ua = a.uniform();
        if (ua == b.uniform()) ++same_ab;
        if (ua == c.uniform()) ++same_ac;
    }
    EXPECT_LT(same_ab, 2);
    EXPECT_LT(same_ac, 2);
}

TEST(Rng, PathOrderMatters) {
    RngStream a = RngStream::derive(7, {1, 2});
    RngStream b = RngStream::derive(7, {2, 1});
    int same = 0;
    for (int i = 0; i < 32; ++i)
        if (a.uniform() == b.uniform()) ++same;
    EXPECT_LT(same, 2);
}

TEST(Rng, UniformRange) {
    RngStream r(3);
    for (int i = 0; i < 100000; ++i) {
        double u = r.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}

TEST(Rng, NormalMoments) {
    RngStream r(11);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        sum += x;
        sumsq += x * x;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    EXPECT_NEAR(mean, 0.0, 3.0 / std::sqrt(double(n)));
    EXPECT_NEAR(var, 1.0, 3.0 * std::sqrt(2.0 / double(n)));
}

TEST(Rng, NormalTensorShapeAndDeterminism) {
    RngStream a(5), b(5);
    Tensor t = a.normal_tensor({3, 4});
    EXPECT_EQ(t.rank(), 2u);
    EXPECT_EQ(t.rows(), 3u);
    EXPECT_EQ(t.cols(), 4u);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t[i], b.normal());
}

TEST(Rng, BelowBounds) {
    RngStream r(9);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 5000; ++i) {
        std::size_t v = r.below(5);
        ASSERT_LT(v, 5u);
        counts[v]++;
    }
    for (int c : counts) EXPECT_GT(c, 800);  // roughly uniform
}

TEST(Rng, ShuffleIsPermutation) {
    RngStream r(13);
    std::vector<std::size_t> idx(100);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<std::size_t> orig = idx;
    r.shuffle(idx);
    EXPECT_NE(idx, orig);
    std::sort(idx.begin(), idx.end());
    EXPECT_EQ(idx, orig);
}

TEST(Rng, CategoricalFrequencies) {
    RngStream r(17);
    std::vector<double> probs = {0.7, 0.2, 0.1};
    std::vector<int> counts(3, 0);
    const int n = 20000;
    for (int i = 0; i < n; ++i) counts[r.categorical(probs)]++;
    for (int k = 0; k < 3; ++k) {
        double p = probs[k];
        EXPECT_NEAR(counts[k] / double(n), p, 4.0 * std::sqrt(p * (1 - p) / n));
    }
}

TEST(Rng, Mix64ChangesEveryInput) {
    EXPECT_NE(mix64(0), mix64(1));
    EXPECT_NE(mix64(1), mix64(2));
    EXPECT_NE(mix64(0), 0u);
}

}  // namespace
}  // namespace presgan
