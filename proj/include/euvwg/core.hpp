#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace euvwg {

using cplx = std::complex<double>;

// Dense storage is Eigen's default column-major layout throughout.
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

/// Bad user input: malformed config, unknown preset, inconsistent geometry.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical breakdown: singular systems, non-convergent iterations, NaN losses.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const auto v = m(i, j);
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, cplx>) {
                if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
            } else {
                if (!std::isfinite(v)) return false;
            }
        }
    return true;
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const std::string& what) {
    if (!all_finite(m)) throw NumericalError(what + ": non-finite entries");
}

}  // namespace euvwg
