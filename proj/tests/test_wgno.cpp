#include "euvwg/presets.hpp"
#include "euvwg/wgno.hpp"

#include <gtest/gtest.h>

using namespace euvwg;

namespace {

struct Built {
    Problem pb;
    GlobalSystem sys;
};

Built build(const Preset& p) {
    Built b;
    b.pb = prepare_problem(p.stack, p.source, p.Nx, p.Ny);
    b.sys = assemble_global(b.pb);
    return b;
}

WgnoConfig short_config(int epochs) {
    WgnoConfig c;
    c.epochs_stage1 = epochs;
    c.epochs_stage2 = 0;
    return c;
}

}  // namespace

TEST(WgnoEncoder, UnitRhsAndUniformLayer) {
    auto b = build(test_problem(3));  // one uniform layer, eps = 4
    b.sys.R.setZero();
    b.sys.R(2) = 1.0;
    const auto enc = InputEncoder::bind(b.sys, b.pb.coeffs);
    const RVector x = enc.encode(b.sys.R, b.pb.coeffs);
    const int nr = int(b.sys.R.size()), nh = b.sys.grid.size();
    ASSERT_EQ(x.size(), 2 * nr + 2 * nh);
    for (int i = 0; i < 2 * nr; ++i) EXPECT_EQ(x(i), i == 2 ? 1.0 : 0.0);
    // the only non-zero coefficient of a uniform layer is eps_00, scaled by its own max
    const int zero = b.sys.grid.index(0, 0);
    for (int i = 0; i < 2 * nh; ++i) EXPECT_NEAR(x(2 * nr + i), i == zero ? 1.0 : 0.0, 1e-15) << i;
}

TEST(WgnoEncoder, LengthAndLayerLocality) {
    Preset p = make_preset("mask2d_13.5");
    p.stack.layers.resize(4);
    const auto b = build(p);
    const auto enc = InputEncoder::bind(b.sys, b.pb.coeffs);
    const int nr = int(b.sys.R.size()), nh = b.sys.grid.size();
    EXPECT_EQ(enc.size(), 2 * nr + 2 * nh * 4);
    const RVector x = enc.encode(b.sys.R, b.pb.coeffs);
    auto swapped = b.pb.coeffs;
    std::swap(swapped[1], swapped[2]);
    const RVector y = enc.encode(b.sys.R, swapped);
    const Eigen::Index blk = 2 * nh, off = 2 * nr;
    EXPECT_EQ(x.head(off + blk), y.head(off + blk));
    EXPECT_EQ(x.tail(blk), y.tail(blk));
    EXPECT_NE(x.segment(off + blk, 2 * blk), y.segment(off + blk, 2 * blk));
    EXPECT_THROW(enc.encode(b.sys.R.head(3), b.pb.coeffs), std::invalid_argument);
}

TEST(WgnoForward, ZeroWeightsGiveZeroAmplitudes) {
    auto p = glorot_init({6, 8, 8, 10}, 1);
    p.unflatten(RVector::Zero(p.parameter_count()));
    const CVector a = wgno_forward(p, RVector::Random(6));
    EXPECT_EQ(a.size(), 5);
    EXPECT_EQ(a.cwiseAbs().maxCoeff(), 0.0);
}

TEST(WgnoForward, TanhSaturationKeepsActivationsBounded) {
    const auto p = glorot_init({20, 32, 32, 4}, 2);
    const RMatrix x = RMatrix::Random(20, 3) * 1e6;
    const auto c = mlp_forward_cached(p, x);
    for (std::size_t l = 1; l + 1 < c.acts.size(); ++l) EXPECT_LE(c.acts[l].cwiseAbs().maxCoeff(), 1.0);
    EXPECT_TRUE(all_finite(RVector(Eigen::Map<const RVector>(c.acts.back().data(), c.acts.back().size()))));
}

TEST(WgnoForward, InterleavedOutput) {
    RVector y(4);
    y << 1, 2, 3, 4;
    const CVector a = decode_output(y);
    EXPECT_EQ(a(0), cplx(1, 2));
    EXPECT_EQ(a(1), cplx(3, 4));
    EXPECT_EQ(encode_output(a), y);
    EXPECT_THROW(decode_output(RVector::Zero(3)), std::invalid_argument);
}

TEST(WgnoLoss, GradientMatchesFiniteDifferences) {
    const CMatrix m = CMatrix::Random(5, 5);
    const ResidualLoss loss(m, CVector::Random(5));
    const RVector y = RVector::Random(10);
    RVector g;
    loss.value_and_grad(y, g);
    for (Eigen::Index k = 0; k < y.size(); ++k) {
        RVector a = y, b = y;
        a(k) += 1e-6;
        b(k) -= 1e-6;
        const double fd = (loss.value(decode_output(a)) - loss.value(decode_output(b))) / 2e-6;
        EXPECT_NEAR(fd, g(k), 1e-7 * g.cwiseAbs().maxCoeff());
    }
}

TEST(WgnoTrain, LossCurveMatchesIndependentResidual) {
    const auto b = build(test_problem(2));
    const WgnoConfig cfg = short_config(5);
    const auto r = train_wgno(b.sys, b.pb.coeffs, cfg, 4);
    ASSERT_EQ(r.report.loss.size(), 5u);
    // epoch-0 loss: the Glorot network for this seed, evaluated without the trainer
    const auto enc = InputEncoder::bind(b.sys, b.pb.coeffs);
    const auto p0 = glorot_init(wgno_sizes(enc.size(), int(2 * b.sys.layout.size()), cfg), 4);
    const CVector a0 = wgno_forward(p0, enc.encode(b.sys.R, b.pb.coeffs));
    const double l0 = (b.sys.M * a0 - b.sys.R).squaredNorm();
    EXPECT_NEAR(r.report.loss[0], l0, 1e-12 * l0);
    const CVector a = wgno_forward(r.model, enc.encode(b.sys.R, b.pb.coeffs));
    const double lf = (b.sys.M * a - b.sys.R).squaredNorm();
    EXPECT_NEAR(r.report.final_loss, lf, 1e-12 * lf);
    EXPECT_NEAR(r.report.best_loss, lf, 1e-12 * lf);  // parameters returned are the best seen
}

TEST(WgnoTrain, SameSeedBitwiseIdentical) {
    const auto b = build(test_problem(3));
    const auto cfg = short_config(40);
    const auto r1 = train_wgno(b.sys, b.pb.coeffs, cfg, 9), r2 = train_wgno(b.sys, b.pb.coeffs, cfg, 9);
    EXPECT_EQ(r1.report.loss, r2.report.loss);
    EXPECT_EQ(r1.model.params.flatten(), r2.model.params.flatten());
    const auto r3 = train_wgno(b.sys, b.pb.coeffs, cfg, 10);
    EXPECT_NE(r1.report.loss, r3.report.loss);
}

TEST(WgnoTrain, FullScheduleOnProblemOne) {
    const auto b = build(test_problem(1));
    const WgnoConfig cfg;
    for (std::uint64_t seed : {0, 1}) {
        const auto r = train_wgno(b.sys, b.pb.coeffs, cfg, seed);
        ASSERT_EQ(r.report.loss.size(), 2000u);
        EXPECT_LT(r.report.best_loss, r.report.loss[0]) << seed;
        const auto inf = infer_wgno(r.model, b.sys, b.pb.coeffs);
        EXPECT_LE((b.sys.M * inf.amplitudes.values - b.sys.R).norm(), 1e-6 * b.sys.R.norm()) << seed;
    }
}

TEST(WgnoInfer, PureAndLayoutChecked) {
    const auto b1 = build(test_problem(1)), b3 = build(test_problem(3));
    const auto r = train_wgno(b1.sys, b1.pb.coeffs, short_config(10), 0);
    const auto x = infer_wgno(r.model, b1.sys, b1.pb.coeffs), y = infer_wgno(r.model, b1.sys, b1.pb.coeffs);
    EXPECT_EQ(x.amplitudes.values, y.amplitudes.values);
    EXPECT_THROW(infer_wgno(r.model, b3.sys, b3.pb.coeffs), ConfigError);
    EXPECT_THROW(train_wgno(b3.sys, b3.pb.coeffs, short_config(1), 0, &r.model), ConfigError);
}

TEST(WgnoTrain, ColumnScalingIsAReparametrisation) {
    const auto b = build(test_problem(3));
    WgnoConfig cfg = short_config(3);
    cfg.column_scaling = true;
    const auto r = train_wgno(b.sys, b.pb.coeffs, cfg, 1);
    ASSERT_EQ(r.model.output_scale.size(), b.sys.layout.size());
    const auto enc = InputEncoder::bind(b.sys, b.pb.coeffs);
    const CVector raw = wgno_forward(r.model.params, enc.encode(b.sys.R, b.pb.coeffs));
    const CVector a = wgno_forward(r.model, enc.encode(b.sys.R, b.pb.coeffs));
    for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_EQ(a(i), raw(i) * (1.0 / b.sys.M.col(i).norm()));
    EXPECT_NEAR(r.report.final_loss, (b.sys.M * a - b.sys.R).squaredNorm(), 1e-12 * r.report.final_loss);
}

TEST(WgnoTrain, ErrorBoundedByConditionTimesResidual) {
    for (const char* name : {"test1", "test3", "mask2d_13.5"}) {
        const auto b = build(make_preset(name));
        const auto r = train_wgno(b.sys, b.pb.coeffs, short_config(150), 0);
        const CVector exact = solve_direct(b.sys).values;
        const CVector a = wgno_forward(r.model, r.model.encoder.encode(b.sys.R, b.pb.coeffs));
        const double err = (a - exact).norm() / exact.norm();
        const double bound = condition_estimate(b.sys.M) * system_residual(b.sys, a);
        EXPECT_LE(err, 2.0 * bound) << name;
    }
}

TEST(WgnoFamily, SharedLayoutRequired) {
    const auto b1 = build(test_problem(1)), b3 = build(test_problem(3));
    EXPECT_THROW(train_wgno_family({b1.sys, b3.sys}, {b1.pb.coeffs, b3.pb.coeffs}, short_config(2), 0, 2), ConfigError);
    const auto r = train_wgno_family({b1.sys, b1.sys}, {b1.pb.coeffs, b1.pb.coeffs}, short_config(4), 0, 1);
    EXPECT_EQ(r.report.loss.size(), 4u);
}
