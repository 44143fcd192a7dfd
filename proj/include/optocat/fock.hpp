#pragma once

// Truncated Fock-space linear algebra for one or two bosonic modes.
//
// Composite (cavity, mechanics) spaces use the cavity-major index
// n_a * N_b + n_b everywhere in the library.

#include <cmath>
#include <complex>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "optocat/errors.hpp"

namespace optocat {

using Complex = std::complex<double>;
using OperatorMatrix = Eigen::MatrixXcd;
using Amplitudes = Eigen::VectorXcd;

inline constexpr double kTruncationLimit = 1e-6;

/// Number of retained Fock levels of one mode (|0> ... |dim-1>).
class ModeDim {
public:
    explicit ModeDim(int dim) : dim_(dim) {
        if (dim < 2) {
            throw InvalidDimension("mode dimension must be >= 2, got " + std::to_string(dim));
        }
    }
    int value() const noexcept { return dim_; }
    friend bool operator==(ModeDim, ModeDim) = default;

private:
    int dim_;
};

/// Normalized pure state on a truncated Fock space.
class StateVector {
public:
    /// Normalizes `amps`; throws on a zero or non-finite vector.
    static StateVector normalized(Amplitudes amps) {
        const double norm = amps.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw InvalidArgument("cannot normalize a zero or non-finite state vector");
        }
        amps /= norm;
        return StateVector(std::move(amps));
    }

    int dim() const noexcept { return static_cast<int>(amps_.size()); }
    const Amplitudes& amplitudes() const noexcept { return amps_; }
    Complex operator[](int n) const { return amps_(n); }

    OperatorMatrix projector() const { return amps_ * amps_.adjoint(); }

    Complex overlap(const StateVector& other) const {
        if (other.dim() != dim()) {
            throw DimensionMismatch("overlap of states with different dimensions");
        }
        return amps_.dot(other.amps_);  // <this|other>
    }

private:
    explicit StateVector(Amplitudes amps) : amps_(std::move(amps)) {}
    Amplitudes amps_;
};

/// Hermitian, unit-trace operator on a single mode or on the cavity x mechanics space.
class DensityMatrix {
public:
    static constexpr double kTolerance = 1e-10;

    static DensityMatrix single_mode(OperatorMatrix m) {
        const int n = static_cast<int>(m.rows());
        return DensityMatrix(std::move(m), 0, n, true);
    }

    static DensityMatrix composite(OperatorMatrix m, int cavity_dim, int mech_dim) {
        if (cavity_dim < 2 || mech_dim < 2) {
            throw InvalidDimension("composite factor dimensions must be >= 2");
        }
        return DensityMatrix(std::move(m), cavity_dim, mech_dim, true);
    }

    static DensityMatrix pure(const StateVector& psi) { return single_mode(psi.projector()); }

    /// rho_cavity (x) rho_mech.
    static DensityMatrix product(const DensityMatrix& cavity, const DensityMatrix& mech);

    /// Skips validation. Used by integrators, which monitor drift themselves.
    static DensityMatrix unchecked(OperatorMatrix m, int cavity_dim, int mech_dim) {
        return DensityMatrix(std::move(m), cavity_dim, mech_dim, false);
    }

    const OperatorMatrix& matrix() const noexcept { return m_; }
    int dim() const noexcept { return static_cast<int>(m_.rows()); }
    bool is_composite() const noexcept { return cavity_dim_ > 0; }
    /// 0 for single-mode states.
    int cavity_dim() const noexcept { return cavity_dim_; }
    int mech_dim() const noexcept { return mech_dim_; }

private:
    DensityMatrix(OperatorMatrix m, int cavity_dim, int mech_dim, bool validate)
        : m_(std::move(m)), cavity_dim_(cavity_dim), mech_dim_(mech_dim) {
        if (m_.rows() != m_.cols()) {
            throw DimensionMismatch("density matrix must be square");
        }
        const int expected = cavity_dim_ > 0 ? cavity_dim_ * mech_dim_ : mech_dim_;
        if (m_.rows() != expected) {
            throw DimensionMismatch("density matrix size does not match its factor dimensions");
        }
        if (validate) {
            check();
        }
    }

    void check() const {
        if (!m_.allFinite()) {
            throw InvalidArgument("density matrix has non-finite entries");
        }
        const double herm = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
        if (herm > kTolerance) {
            throw InvalidArgument("density matrix is not Hermitian (deviation " + std::to_string(herm) + ")");
        }
        const Complex tr = m_.trace();
        if (std::abs(tr - 1.0) > kTolerance) {
            throw InvalidArgument("density matrix trace is " + std::to_string(tr.real()));
        }
        for (int i = 0; i < dim(); ++i) {
            if (m_(i, i).real() < -kTolerance) {
                throw InvalidArgument("density matrix has a negative population at index " + std::to_string(i));
            }
        }
    }

    OperatorMatrix m_;
    int cavity_dim_;
    int mech_dim_;
};

inline OperatorMatrix identity_op(ModeDim d) { return OperatorMatrix::Identity(d.value(), d.value()); }

/// Lowering operator: <n-1|b|n> = sqrt(n).
inline OperatorMatrix annihilation_op(ModeDim d) {
    OperatorMatrix b = OperatorMatrix::Zero(d.value(), d.value());
    for (int n = 1; n < d.value(); ++n) {
        b(n - 1, n) = std::sqrt(static_cast<double>(n));
    }
    return b;
}

inline OperatorMatrix creation_op(ModeDim d) { return annihilation_op(d).adjoint(); }

inline OperatorMatrix number_op(ModeDim d) {
    OperatorMatrix n = OperatorMatrix::Zero(d.value(), d.value());
    for (int k = 0; k < d.value(); ++k) {
        n(k, k) = static_cast<double>(k);
    }
    return n;
}

/// (-1)^{b^dagger b}
inline OperatorMatrix parity_op(ModeDim d) {
    OperatorMatrix p = OperatorMatrix::Zero(d.value(), d.value());
    for (int k = 0; k < d.value(); ++k) {
        p(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
    }
    return p;
}

inline OperatorMatrix adjoint(const OperatorMatrix& a) { return a.adjoint(); }

/// Kronecker product with index (i, k) -> i * B.rows() + k.
inline OperatorMatrix tensor(const OperatorMatrix& a, const OperatorMatrix& b) {
    const Eigen::Index ra = a.rows(), ca = a.cols(), rb = b.rows(), cb = b.cols();
    OperatorMatrix out(ra * rb, ca * cb);
    for (Eigen::Index j = 0; j < ca; ++j) {
        for (Eigen::Index i = 0; i < ra; ++i) {
            out.block(i * rb, j * cb, rb, cb) = a(i, j) * b;
        }
    }
    return out;
}

inline DensityMatrix DensityMatrix::product(const DensityMatrix& cavity, const DensityMatrix& mech) {
    if (cavity.is_composite() || mech.is_composite()) {
        throw DimensionMismatch("product expects two single-mode states");
    }
    return composite(tensor(cavity.matrix(), mech.matrix()), cavity.dim(), mech.dim());
}

inline StateVector fock_state(int n, ModeDim d) {
    if (n < 0 || n >= d.value()) {
        throw IndexError("Fock index " + std::to_string(n) + " outside [0, " + std::to_string(d.value()) + ")");
    }
    Amplitudes amps = Amplitudes::Zero(d.value());
    amps(n) = 1.0;
    return StateVector::normalized(std::move(amps));
}

/// Population of a coherent state |beta> (untruncated) in levels n >= first.
/// Summed term by term in log space so tiny tails do not cancel.
inline double coherent_tail_mass(Complex beta, int first) {
    const double mean = std::norm(beta);
    if (mean == 0.0) {
        return first <= 0 ? 1.0 : 0.0;
    }
    if (first <= 0) {
        return 1.0;
    }
    const double log_mean = std::log(mean);
    double sum = 0.0;
    for (int n = first;; ++n) {
        const double term = std::exp(-mean + n * log_mean - std::lgamma(n + 1.0));
        sum += term;
        // Terms decrease once n exceeds the mean.
        if (n > mean && term < 1e-18 * sum) {
            break;
        }
        if (n > first + 100000) {
            break;
        }
    }
    return std::min(sum, 1.0);
}

/// Raises TruncationOverflow if a coherent amplitude of size |beta| does not fit in `d`.
inline void check_coherent_fits(Complex beta, ModeDim d, const char* what) {
    const double tail = coherent_tail_mass(beta, d.value() - 2);
    if (tail > kTruncationLimit) {
        throw TruncationOverflow(std::string(what) + ": |beta|^2 = " + std::to_string(std::norm(beta)) +
                                 " leaves tail mass " + std::to_string(tail) + " in dim " +
                                 std::to_string(d.value()));
    }
}

/// |beta> = exp(-|beta|^2/2) sum beta^n/sqrt(n!) |n>, renormalized on the truncated space.
inline StateVector coherent_state(Complex beta, ModeDim d) {
    check_coherent_fits(beta, d, "coherent_state");
    Amplitudes amps(d.value());
    amps(0) = std::exp(-0.5 * std::norm(beta));
    for (int n = 1; n < d.value(); ++n) {
        amps(n) = amps(n - 1) * beta / std::sqrt(static_cast<double>(n));
    }
    return StateVector::normalized(std::move(amps));
}

/// Tr(A rho).
inline Complex expectation(const OperatorMatrix& a, const DensityMatrix& rho) {
    if (a.rows() != rho.dim() || a.cols() != rho.dim()) {
        throw DimensionMismatch("operator is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " but state has dimension " + std::to_string(rho.dim()));
    }
    // Tr(A rho) = sum_ij A_ij rho_ji
    return (a.transpose().cwiseProduct(rho.matrix())).sum();
}

inline Complex expectation(const OperatorMatrix& a, const StateVector& psi) {
    if (a.rows() != psi.dim() || a.cols() != psi.dim()) {
        throw DimensionMismatch("operator and state dimensions differ");
    }
    return psi.amplitudes().dot(a * psi.amplitudes());
}

/// D(zeta) = exp(zeta b^dagger - zeta^* b) from the closed-form Fock matrix elements
///   <m|D|n> = sqrt(n!/m!) zeta^{m-n} e^{-|zeta|^2/2} L_n^{(m-n)}(|zeta|^2),  m >= n,
/// and the mirrored expression with -zeta^* for m < n.
inline OperatorMatrix displaced_fock_matrix(Complex zeta, ModeDim d) {
    check_coherent_fits(zeta, d, "displaced_fock_matrix");
    const int dim = d.value();
    const double x = std::norm(zeta);
    const double gauss = std::exp(-0.5 * x);
    OperatorMatrix out(dim, dim);

    // Offset k = |m - n|; the prefactor zeta^k sqrt(n!/(n+k)!) is built by recurrence.
    Complex lead_lower = 1.0;  // zeta^k / sqrt(k!)
    Complex lead_upper = 1.0;  // (-zeta^*)^k / sqrt(k!)
    for (int k = 0; k < dim; ++k) {
        if (k > 0) {
            lead_lower *= zeta / std::sqrt(static_cast<double>(k));
            lead_upper *= -std::conj(zeta) / std::sqrt(static_cast<double>(k));
        }
        double lag_prev = 0.0;
        double lag = 1.0;  // L_0^{(k)}
        double ratio = 1.0;  // sqrt(n! k! / (n+k)!)
        for (int n = 0; n + k < dim; ++n) {
            if (n > 0) {
                // L_n^{(k)} = ((2n-1+k-x) L_{n-1} - (n-1+k) L_{n-2}) / n
                const double next = ((2.0 * n - 1.0 + k - x) * lag - (n - 1.0 + k) * lag_prev) / n;
                lag_prev = lag;
                lag = next;
                ratio *= std::sqrt(static_cast<double>(n) / (n + k));
            }
            out(n + k, n) = lead_lower * (ratio * gauss * lag);
            if (k > 0) {
                out(n, n + k) = lead_upper * (ratio * gauss * lag);
            }
        }
    }
    return out;
}

}  // namespace optocat
