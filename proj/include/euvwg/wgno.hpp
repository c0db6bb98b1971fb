#pragma once

// Neural operator for the mode-matching system: an MLP maps (R, layer
// permittivity coefficients) to the amplitude vector A and is trained on
// ||M A - R||^2 alone; the direct solution is never seen during training.
//
// Encoded input: [Re R, Im R | per layer: Re eps_mn, Im eps_mn over the harmonic
// range, in grid order]; the R block and each layer block are divided by their
// max-abs entry, fixed when the encoder is bound.
// Network output: interleaved [Re A_0, Im A_0, Re A_1, Im A_1, ...].

#include "euvwg/matching.hpp"
#include "euvwg/mlp.hpp"

#include <Eigen/SparseCore>

#include <chrono>
#include <functional>
#include <limits>
#include <numeric>

namespace euvwg {

struct WgnoConfig {
    int hidden_width = 256;
    int hidden_layers = 2;
    int epochs_stage1 = 1000;
    int epochs_stage2 = 1000;
    double lr_stage1 = 1e-3;
    double lr_stage2 = 1e-5;
    AdamOptions adam;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6};
    bool column_scaling = false;  // A_i = y_i / ||M e_i||: a fixed reparametrisation of the output

    void validate() const {
        if (hidden_width <= 0 || hidden_layers <= 0) throw ConfigError("wgno: hidden width and layer count must be > 0");
        if (epochs_stage1 < 0 || epochs_stage2 < 0 || epochs_stage1 + epochs_stage2 == 0)
            throw ConfigError("wgno: epochs must be >= 0 and not both zero");
        if (!(lr_stage1 > 0.0) || !(lr_stage2 > 0.0)) throw ConfigError("wgno: learning rates must be > 0");
        if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0))
            throw ConfigError("wgno: Adam constants out of range");
        if (seeds.empty()) throw ConfigError("wgno: need at least one seed");
    }
};

struct InputEncoder {
    int harmonics = 0;
    int rhs_size = 0;
    std::vector<int> n_m, n_n;  // harmonic orders in grid order
    double rhs_scale = 1.0;
    std::vector<double> layer_scales;

    [[nodiscard]] int size() const { return 2 * rhs_size + 2 * harmonics * int(layer_scales.size()); }

    static InputEncoder bind(const GlobalSystem& sys, const std::vector<PermittivityFourier>& coeffs) {
        InputEncoder e;
        e.harmonics = sys.grid.size();
        e.rhs_size = int(sys.R.size());
        e.n_m = sys.grid.m;
        e.n_n = sys.grid.n;
        if (coeffs.size() != std::size_t(sys.layout.layers))
            throw std::invalid_argument("wgno encoder: one coefficient set per layer required");
        e.rhs_scale = scale_of(sys.R.real().cwiseAbs().maxCoeff(), sys.R.imag().cwiseAbs().maxCoeff());
        for (const auto& pf : coeffs) {
            double mx = 0.0;
            for (int i = 0; i < e.harmonics; ++i) {
                const cplx v = pf.eps.at(e.n_m[i], e.n_n[i]);
                mx = std::max({mx, std::abs(v.real()), std::abs(v.imag())});
            }
            e.layer_scales.push_back(scale_of(mx, 0.0));
        }
        return e;
    }

    [[nodiscard]] RVector encode(const CVector& R, const std::vector<PermittivityFourier>& coeffs) const {
        if (R.size() != rhs_size || coeffs.size() != layer_scales.size())
            throw std::invalid_argument("wgno encoder: input sizes do not match the bound system");
        RVector x(size());
        x.head(rhs_size) = R.real() / rhs_scale;
        x.segment(rhs_size, rhs_size) = R.imag() / rhs_scale;
        Eigen::Index k = 2 * rhs_size;
        for (std::size_t j = 0; j < coeffs.size(); ++j) {
            for (int i = 0; i < harmonics; ++i) {
                const cplx v = coeffs[j].eps.at(n_m[i], n_n[i]);
                x(k + i) = v.real() / layer_scales[j];
                x(k + harmonics + i) = v.imag() / layer_scales[j];
            }
            k += 2 * harmonics;
        }
        return x;
    }

private:
    static double scale_of(double a, double b) {
        const double s = std::max(a, b);
        return s > 0.0 ? s : 1.0;
    }
};

inline CVector decode_output(const RVector& y) {
    if (y.size() % 2) throw std::invalid_argument("wgno: output length must be even");
    CVector a(y.size() / 2);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = cplx{y(2 * i), y(2 * i + 1)};
    return a;
}

inline RVector encode_output(const CVector& a) {
    RVector y(2 * a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        y(2 * i) = a(i).real();
        y(2 * i + 1) = a(i).imag();
    }
    return y;
}

/// ||M A - R||^2 and its gradient with respect to the interleaved real output.
/// M is held sparse: patterned layers give dense blocks, uniform ones diagonal.
struct ResidualLoss {
    Eigen::SparseMatrix<cplx> M;
    Eigen::SparseMatrix<cplx> MH;
    CVector R;

    ResidualLoss() = default;
    ResidualLoss(const CMatrix& m, CVector r, const RVector& scale = {}) : R(std::move(r)) {
        M = scale.size() ? CMatrix(m * scale.cast<cplx>().asDiagonal()).sparseView(0.0, 0.0) : m.sparseView(0.0, 0.0);
        M.makeCompressed();
        MH = M.adjoint();
        MH.makeCompressed();
    }

    [[nodiscard]] double value(const CVector& a) const { return (M * a - R).squaredNorm(); }

    double value_and_grad(const RVector& y, RVector& grad) const {
        const CVector a = decode_output(y);
        const CVector res = M * a - R;
        const CVector g = 2.0 * (MH * res);
        grad = encode_output(g);
        return res.squaredNorm();
    }
};

struct TrainReport {
    std::uint64_t seed = 0;
    std::vector<double> loss;  // per epoch, before the update
    double best_loss = std::numeric_limits<double>::infinity();
    double final_loss = 0.0;
    double relative_residual = 0.0;
    double rel_l2 = std::numeric_limits<double>::quiet_NaN();  // vs. a reference, when computed
    double seconds = 0.0;
};

struct WgnoModel {
    MlpParams params;
    InputEncoder encoder;
    RVector output_scale;  // per complex amplitude; empty means 1
    std::uint64_t fingerprint = 0;
    std::string layout;
};

inline std::vector<int> wgno_sizes(int input, int output, const WgnoConfig& cfg) {
    std::vector<int> s{input};
    for (int l = 0; l < cfg.hidden_layers; ++l) s.push_back(cfg.hidden_width);
    s.push_back(output);
    return s;
}

inline CVector wgno_forward(const MlpParams& p, const RVector& encoded) { return decode_output(mlp_forward(p, encoded)); }

inline CVector wgno_forward(const WgnoModel& m, const RVector& encoded) {
    CVector a = wgno_forward(m.params, encoded);
    if (m.output_scale.size()) a = a.cwiseProduct(m.output_scale.cast<cplx>());
    return a;
}

inline RVector column_scales(const CMatrix& m) {
    RVector s(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double n = m.col(j).norm();
        s(j) = n > 0.0 ? 1.0 / n : 1.0;
    }
    return s;
}

struct WgnoTrainResult {
    WgnoModel model;
    TrainReport report;
};

namespace detail {

// One Adam run over a batch of (input, loss) pairs; keeps the best parameters seen.
inline void adam_stages(MlpParams& params, const std::vector<RVector>& inputs, const std::vector<const ResidualLoss*>& losses,
                        const WgnoConfig& cfg, TrainReport& rep, const std::function<std::vector<std::size_t>(int)>& batch_of) {
    Adam adam(params, cfg.adam);
    MlpParams best = params;
    const int total = cfg.epochs_stage1 + cfg.epochs_stage2;
    for (int epoch = 0; epoch <= total; ++epoch) {
        const std::vector<std::size_t> batch = batch_of(epoch);
        RMatrix x(params.input_size(), Eigen::Index(batch.size()));
        for (std::size_t b = 0; b < batch.size(); ++b) x.col(Eigen::Index(b)) = inputs[batch[b]];
        const MlpCache cache = mlp_forward_cached(params, x);
        const RMatrix& y = cache.acts.back();
        RMatrix dy(y.rows(), y.cols());
        double loss = 0.0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            RVector g;
            loss += losses[batch[b]]->value_and_grad(y.col(Eigen::Index(b)), g);
            dy.col(Eigen::Index(b)) = g;
        }
        loss /= double(batch.size());
        dy /= double(batch.size());
        if (!std::isfinite(loss)) {
            std::ostringstream os;
            os << "wgno training diverged at epoch " << epoch << " (seed " << rep.seed << ")";
            throw NumericalError(os.str());
        }
        if (loss < rep.best_loss) {
            rep.best_loss = loss;
            best = params;
        }
        if (epoch == total) break;  // final evaluation only
        rep.loss.push_back(loss);
        const double lr = epoch < cfg.epochs_stage1 ? cfg.lr_stage1 : cfg.lr_stage2;
        adam.step(params, mlp_backward(params, cache, dy), lr);
    }
    params = std::move(best);
}

}  // namespace detail

/// Per-instance training on one assembled system. `warm_start` continues from
/// existing parameters (fine-tuning); it must match the system layout.
inline WgnoTrainResult train_wgno(const GlobalSystem& sys, const std::vector<PermittivityFourier>& coeffs,
                                  const WgnoConfig& cfg, std::uint64_t seed, const WgnoModel* warm_start = nullptr) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    WgnoTrainResult out;
    out.report.seed = seed;
    out.model.fingerprint = sys.layout.fingerprint();
    out.model.layout = sys.layout.describe();
    if (warm_start) {
        if (warm_start->fingerprint != out.model.fingerprint)
            throw ConfigError("wgno warm start: checkpoint layout does not match the system");
        out.model.encoder = warm_start->encoder;
        out.model.params = warm_start->params;
        out.model.output_scale = warm_start->output_scale;
    } else {
        out.model.encoder = InputEncoder::bind(sys, coeffs);
        if (cfg.column_scaling) out.model.output_scale = column_scales(sys.M);
        out.model.params =
            glorot_init(wgno_sizes(out.model.encoder.size(), int(2 * sys.layout.size()), cfg), seed);
    }
    const ResidualLoss loss(sys.M, sys.R, out.model.output_scale);
    const std::vector<RVector> inputs{out.model.encoder.encode(sys.R, coeffs)};
    const std::vector<const ResidualLoss*> losses{&loss};
    detail::adam_stages(out.model.params, inputs, losses, cfg, out.report, [](int) { return std::vector<std::size_t>{0}; });

    const CVector a = wgno_forward(out.model, inputs[0]);
    out.report.final_loss = (sys.M * a - sys.R).squaredNorm();
    out.report.relative_residual = system_residual(sys, a);
    out.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

/// Family mode: one network for a pool of systems sharing a layout (for example
/// a sweep of hole widths). Each epoch uses `batch` systems drawn from the pool
/// with a seeded generator.
inline WgnoTrainResult train_wgno_family(const std::vector<GlobalSystem>& pool,
                                         const std::vector<std::vector<PermittivityFourier>>& pool_coeffs,
                                         const WgnoConfig& cfg, std::uint64_t seed, int batch) {
    cfg.validate();
    if (pool.empty() || pool.size() != pool_coeffs.size()) throw ConfigError("wgno family: empty or inconsistent pool");
    if (batch <= 0) throw ConfigError("wgno family: batch size must be > 0");
    for (const auto& s : pool)
        if (s.layout.fingerprint() != pool.front().layout.fingerprint())
            throw ConfigError("wgno family: all systems must share one layout");
    const auto t0 = std::chrono::steady_clock::now();
    WgnoTrainResult out;
    out.report.seed = seed;
    out.model.fingerprint = pool.front().layout.fingerprint();
    out.model.layout = pool.front().layout.describe();
    out.model.encoder = InputEncoder::bind(pool.front(), pool_coeffs.front());
    out.model.params = glorot_init(wgno_sizes(out.model.encoder.size(), int(2 * pool.front().layout.size()), cfg), seed);
    if (cfg.column_scaling) out.model.output_scale = column_scales(pool.front().M);

    std::vector<ResidualLoss> losses;
    std::vector<RVector> inputs;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        losses.emplace_back(pool[i].M, pool[i].R, out.model.output_scale);
        inputs.push_back(out.model.encoder.encode(pool[i].R, pool_coeffs[i]));
    }
    std::vector<const ResidualLoss*> ptrs;
    for (const auto& l : losses) ptrs.push_back(&l);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    const std::size_t bsz = std::min<std::size_t>(std::size_t(batch), pool.size());
    std::vector<std::size_t> all(pool.size());
    std::iota(all.begin(), all.end(), 0);
    detail::adam_stages(out.model.params, inputs, ptrs, cfg, out.report, [&](int epoch) {
        if (epoch == cfg.epochs_stage1 + cfg.epochs_stage2) return all;
        std::vector<std::size_t> pick;
        for (std::size_t b = 0; b < bsz; ++b) pick.push_back(std::size_t(rng() % pool.size()));
        return pick;
    });
    double worst = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const CVector a = wgno_forward(out.model, inputs[i]);
        total += (pool[i].M * a - pool[i].R).squaredNorm();
        worst = std::max(worst, system_residual(pool[i], a));
    }
    out.report.final_loss = total / double(pool.size());
    out.report.relative_residual = worst;
    out.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

struct InferenceResult {
    AmplitudeVector amplitudes;
    double seconds = 0.0;
};

/// Single forward pass; the model must have been trained on this layout.
inline InferenceResult infer_wgno(const WgnoModel& model, const GlobalSystem& sys, const std::vector<PermittivityFourier>& coeffs) {
    if (model.fingerprint != sys.layout.fingerprint())
        throw ConfigError("wgno inference: model layout '" + model.layout + "' does not match system '" +
                          sys.layout.describe() + "'");
    const auto t0 = std::chrono::steady_clock::now();
    const RVector x = model.encoder.encode(sys.R, coeffs);
    CVector a = wgno_forward(model, x);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    InferenceResult r{make_amplitudes(sys, std::move(a)), secs};
    return r;
}

}  // namespace euvwg
