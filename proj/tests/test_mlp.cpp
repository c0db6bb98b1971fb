#include "euvwg/mlp.hpp"

#include <gtest/gtest.h>

using namespace euvwg;

TEST(Mlp, GlorotBoundsAndVariance) {
    const auto p = glorot_init({200, 300, 100}, 11);
    for (std::size_t l = 0; l < p.layers(); ++l) {
        const double bound = std::sqrt(6.0 / double(p.sizes[l] + p.sizes[l + 1]));
        const auto& w = p.weights[l];
        EXPECT_LE(w.cwiseAbs().maxCoeff(), bound);
        // uniform on [-b, b]: variance b^2 / 3 = 2 / (fan_in + fan_out)
        const double var = w.array().square().mean();
        EXPECT_NEAR(var / (bound * bound / 3.0), 1.0, 0.02);
        EXPECT_NEAR(w.mean(), 0.0, 0.01 * bound);
        EXPECT_EQ(p.biases[l].cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Mlp, SameSeedSameWeights) {
    const auto a = glorot_init({3, 16, 4}, 5), b = glorot_init({3, 16, 4}, 5), c = glorot_init({3, 16, 4}, 6);
    EXPECT_EQ(a.flatten(), b.flatten());
    EXPECT_NE(a.flatten(), c.flatten());
}

TEST(Mlp, HandComputedOneTwoTwo) {
    MlpParams p = glorot_init({1, 2, 2}, 0);
    p.weights[0] << 0.5, -1.25;
    p.biases[0] << 0.1, 0.2;
    p.weights[1] << 1.0, 2.0, -0.5, 0.25;
    p.biases[1] << 0.3, -0.4;
    RVector x(1);
    x << 0.8;
    const double h1 = std::tanh(0.5 * 0.8 + 0.1), h2 = std::tanh(-1.25 * 0.8 + 0.2);
    const RVector y = mlp_forward(p, x);
    EXPECT_NEAR(y(0), 1.0 * h1 + 2.0 * h2 + 0.3, 1e-15);
    EXPECT_NEAR(y(1), -0.5 * h1 + 0.25 * h2 - 0.4, 1e-15);
}

TEST(Mlp, FlattenRoundTrip) {
    auto p = glorot_init({4, 7, 3, 2}, 9);
    const RVector v = p.flatten();
    EXPECT_EQ(v.size(), 4 * 7 + 7 + 7 * 3 + 3 + 3 * 2 + 2);
    auto q = p.zeros_like();
    q.unflatten(v);
    EXPECT_EQ(q.flatten(), v);
    EXPECT_THROW(q.unflatten(RVector::Zero(3)), std::invalid_argument);
}

TEST(Mlp, BackpropMatchesFiniteDifferences) {
    const auto p = glorot_init({3, 9, 6, 2}, 21);
    RMatrix x(3, 5);
    x.setRandom();
    RMatrix w(2, 5);
    w.setRandom();
    // L = sum(w .* y)
    auto loss = [&](const MlpParams& q) { return (mlp_forward(q, x).array() * w.array()).sum(); };
    const MlpParams g = mlp_backward(p, mlp_forward_cached(p, x), w);
    const RVector th = p.flatten(), an = g.flatten();
    MlpParams q = p;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < th.size(); ++k) {
        RVector t = th;
        t(k) += 1e-6;
        q.unflatten(t);
        const double fp = loss(q);
        t(k) -= 2e-6;
        q.unflatten(t);
        const double fd = (fp - loss(q)) / 2e-6;
        worst = std::max(worst, std::abs(fd - an(k)));
    }
    EXPECT_LT(worst / an.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Mlp, AdamFirstStepIsSignedLearningRate) {
    auto p = glorot_init({2, 3, 1}, 1);
    const RVector before = p.flatten();
    auto g = p.zeros_like();
    g.weights[0].setConstant(0.37);
    g.weights[1].setConstant(-2.0);
    Adam adam(p);
    adam.step(p, g, 1e-3);
    const RVector d = p.flatten() - before;
    // bias-corrected first step: -lr * g / (|g| + eps)
    EXPECT_NEAR(d(0), -1e-3, 1e-10);
    EXPECT_NEAR(d(3 * 2 + 3), 1e-3, 1e-10);
    EXPECT_EQ(d(3 * 2), 0.0);
    EXPECT_EQ(adam.steps(), 1);
}

TEST(Mlp, RejectsBadShapes) {
    EXPECT_THROW(glorot_init({3}, 0), std::invalid_argument);
    EXPECT_THROW(glorot_init({3, 0, 1}, 0), std::invalid_argument);
    const auto p = glorot_init({3, 4, 1}, 0);
    EXPECT_THROW(mlp_forward(p, RMatrix(RMatrix::Zero(2, 1))), std::invalid_argument);
}
