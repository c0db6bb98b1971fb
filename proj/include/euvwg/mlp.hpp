#pragma once

// Fully connected tanh network with manual backpropagation, Glorot
// initialisation and Adam. Samples are matrix columns.

#include "euvwg/core.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace euvwg {

struct MlpParams {
    std::vector<int> sizes;        // input, hidden..., output
    std::vector<RMatrix> weights;  // weights[l]: sizes[l+1] x sizes[l]
    std::vector<RVector> biases;

    [[nodiscard]] std::size_t layers() const { return weights.size(); }
    [[nodiscard]] int input_size() const { return sizes.front(); }
    [[nodiscard]] int output_size() const { return sizes.back(); }

    [[nodiscard]] Eigen::Index parameter_count() const {
        Eigen::Index n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
        return n;
    }

    /// Same shapes, all zero (gradient accumulators, optimiser moments).
    [[nodiscard]] MlpParams zeros_like() const {
        MlpParams z;
        z.sizes = sizes;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            z.weights.push_back(RMatrix::Zero(weights[l].rows(), weights[l].cols()));
            z.biases.push_back(RVector::Zero(biases[l].size()));
        }
        return z;
    }

    /// Flat view: per layer, weights (column-major) then biases.
    [[nodiscard]] RVector flatten() const {
        RVector v(parameter_count());
        Eigen::Index k = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            v.segment(k, weights[l].size()) = Eigen::Map<const RVector>(weights[l].data(), weights[l].size());
            k += weights[l].size();
            v.segment(k, biases[l].size()) = biases[l];
            k += biases[l].size();
        }
        return v;
    }

    void unflatten(const RVector& v) {
        if (v.size() != parameter_count()) throw std::invalid_argument("MlpParams::unflatten: size mismatch");
        Eigen::Index k = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            Eigen::Map<RVector>(weights[l].data(), weights[l].size()) = v.segment(k, weights[l].size());
            k += weights[l].size();
            biases[l] = v.segment(k, biases[l].size());
            k += biases[l].size();
        }
    }

    void validate() const {
        if (sizes.size() < 2) throw std::invalid_argument("MlpParams: need at least input and output sizes");
        if (weights.size() != sizes.size() - 1 || biases.size() != weights.size())
            throw std::invalid_argument("MlpParams: layer count does not match sizes");
        for (std::size_t l = 0; l < weights.size(); ++l) {
            if (weights[l].rows() != sizes[l + 1] || weights[l].cols() != sizes[l] || biases[l].size() != sizes[l + 1])
                throw std::invalid_argument("MlpParams: shapes do not chain at layer " + std::to_string(l));
        }
    }
};

/// Uniform double in [0, 1) from the top 53 bits; platform independent unlike
/// std::uniform_real_distribution.
inline double unit_uniform(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

/// Glorot-uniform weights on +-sqrt(6 / (fan_in + fan_out)), zero biases.
inline MlpParams glorot_init(const std::vector<int>& sizes, std::uint64_t seed) {
    if (sizes.size() < 2) throw std::invalid_argument("glorot_init: need at least two layer sizes");
    for (int s : sizes)
        if (s <= 0) throw std::invalid_argument("glorot_init: layer sizes must be positive");
    std::mt19937_64 rng(seed);
    MlpParams p;
    p.sizes = sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double bound = std::sqrt(6.0 / double(sizes[l] + sizes[l + 1]));
        RMatrix w(sizes[l + 1], sizes[l]);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = (2.0 * unit_uniform(rng) - 1.0) * bound;
        p.weights.push_back(std::move(w));
        p.biases.push_back(RVector::Zero(sizes[l + 1]));
    }
    return p;
}

/// Activations of every layer for a batch; acts[0] is the input, acts.back() the output.
struct MlpCache {
    std::vector<RMatrix> acts;
};

inline MlpCache mlp_forward_cached(const MlpParams& p, const RMatrix& x) {
    if (x.rows() != p.input_size()) throw std::invalid_argument("mlp_forward: input size mismatch");
    MlpCache c;
    c.acts.reserve(p.layers() + 1);
    c.acts.push_back(x);
    for (std::size_t l = 0; l < p.layers(); ++l) {
        RMatrix z = p.weights[l] * c.acts.back();
        z.colwise() += p.biases[l];
        if (l + 1 < p.layers()) z = z.array().tanh().matrix();
        c.acts.push_back(std::move(z));
    }
    return c;
}

inline RMatrix mlp_forward(const MlpParams& p, const RMatrix& x) { return std::move(mlp_forward_cached(p, x).acts.back()); }

inline RVector mlp_forward(const MlpParams& p, const RVector& x) {
    RMatrix xm = x;
    return mlp_forward(p, xm).col(0);
}

/// Parameter gradient given dL/d(output) for every batch column.
inline MlpParams mlp_backward(const MlpParams& p, const MlpCache& c, const RMatrix& d_out) {
    MlpParams g = p.zeros_like();
    RMatrix delta = d_out;
    for (std::size_t l = p.layers(); l-- > 0;) {
        g.weights[l].noalias() = delta * c.acts[l].transpose();
        g.biases[l] = delta.rowwise().sum();
        if (l == 0) break;
        RMatrix back = p.weights[l].transpose() * delta;
        // tanh' = 1 - a^2 for the hidden activation a = acts[l]
        delta = back.array() * (1.0 - c.acts[l].array().square());
    }
    return g;
}

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam() = default;
    Adam(const MlpParams& shape, AdamOptions o = {}) : opt_(o), m_(shape.zeros_like()), v_(shape.zeros_like()) {}

    void step(MlpParams& p, const MlpParams& g, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(opt_.beta1, double(t_));
        const double c2 = 1.0 - std::pow(opt_.beta2, double(t_));
        for (std::size_t l = 0; l < p.layers(); ++l) {
            update(p.weights[l], g.weights[l], m_.weights[l], v_.weights[l], lr, c1, c2);
            update(p.biases[l], g.biases[l], m_.biases[l], v_.biases[l], lr, c1, c2);
        }
    }

    [[nodiscard]] long steps() const { return t_; }

private:
    template <typename T>
    void update(T& w, const T& g, T& m, T& v, double lr, double c1, double c2) const {
        m = opt_.beta1 * m + (1.0 - opt_.beta1) * g;
        v = opt_.beta2 * v + (1.0 - opt_.beta2) * g.cwiseProduct(g);
        w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + opt_.eps);
    }

    AdamOptions opt_;
    MlpParams m_;
    MlpParams v_;
    long t_ = 0;
};

}  // namespace euvwg
