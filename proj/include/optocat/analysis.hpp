#pragma once

// Observables of the reduced mechanical state: purity, fidelity, parity
// sectors, the 0/1 coherence and the Wigner function.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Eigenvalues>

#include "optocat/errors.hpp"
#include "optocat/fock.hpp"

namespace optocat {

inline DensityMatrix partial_trace_cavity(const DensityMatrix& rho) {
    if (!rho.is_composite()) {
        throw DimensionMismatch("partial_trace_cavity needs a composite state");
    }
    const int na = rho.cavity_dim(), nb = rho.mech_dim();
    const OperatorMatrix& m = rho.matrix();
    OperatorMatrix out = OperatorMatrix::Zero(nb, nb);
    for (int p = 0; p < na; ++p) {
        out += m.block(p * nb, p * nb, nb, nb);
    }
    return DensityMatrix::unchecked(std::move(out), 0, nb);
}

/// Tr(rho^2), using sum |rho_ij|^2 for a Hermitian rho.
inline double purity(const DensityMatrix& rho) { return rho.matrix().squaredNorm(); }

/// sqrt(<psi|rho|psi>)
inline double fidelity_pure(const DensityMatrix& rho, const StateVector& psi) {
    if (psi.dim() != rho.dim()) {
        throw DimensionMismatch("fidelity_pure: state dimension " + std::to_string(psi.dim()) +
                                " vs density matrix " + std::to_string(rho.dim()));
    }
    const double overlap = psi.amplitudes().dot(rho.matrix() * psi.amplitudes()).real();
    return std::sqrt(std::max(0.0, overlap));
}

struct ParityPopulations {
    double even = 0.0;
    double odd = 0.0;
};

/// Mechanical parity sectors. For a composite state the cavity is traced out.
inline ParityPopulations parity_populations(const DensityMatrix& rho) {
    const int nb = rho.mech_dim();
    const int blocks = rho.is_composite() ? rho.cavity_dim() : 1;
    ParityPopulations out;
    for (int p = 0; p < blocks; ++p) {
        for (int m = 0; m < nb; ++m) {
            const double pop = rho.matrix()(p * nb + m, p * nb + m).real();
            (m % 2 == 0 ? out.even : out.odd) += pop;
        }
    }
    return out;
}

struct ZeroOneCoherence {
    Complex p01 = 0.0;     // <0|rho|1>
    double leakage = 0.0;  // 1 - rho_00 - rho_11
};

inline ZeroOneCoherence zero_one_coherence(const DensityMatrix& rho_b) {
    if (rho_b.is_composite()) {
        throw DimensionMismatch("zero_one_coherence expects a single-mode state");
    }
    const OperatorMatrix& m = rho_b.matrix();
    return {m(0, 1), 1.0 - m(0, 0).real() - m(1, 1).real()};
}

/// Population in the top two Fock levels of each mode, summed over the modes.
struct TailMasses {
    double cavity = 0.0;
    double mech = 0.0;
    double total() const { return cavity + mech; }
};

inline TailMasses mode_tail_masses(const DensityMatrix& rho) {
    TailMasses t;
    const int nb = rho.mech_dim();
    const OperatorMatrix& m = rho.matrix();
    if (!rho.is_composite()) {
        t.mech = m(nb - 1, nb - 1).real() + m(nb - 2, nb - 2).real();
        return t;
    }
    const int na = rho.cavity_dim();
    for (int p = 0; p < na; ++p) {
        for (int k = 0; k < nb; ++k) {
            const double pop = m(p * nb + k, p * nb + k).real();
            if (k >= nb - 2) t.mech += pop;
            if (p >= na - 2) t.cavity += pop;
        }
    }
    return t;
}

inline double tail_mass(const DensityMatrix& rho) { return mode_tail_masses(rho).total(); }

inline double min_eigenvalue(const DensityMatrix& rho) {
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(rho.matrix(), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// (1/2) || rho - sigma ||_1
inline double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
    if (rho.dim() != sigma.dim()) {
        throw DimensionMismatch("trace_distance: dimensions differ");
    }
    const OperatorMatrix diff = rho.matrix() - sigma.matrix();
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(diff, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

namespace detail {

/// Zeta-independent factors of the displacement matrix elements for one dimension:
/// ratio(k, n) = sqrt(n! k! / (n+k)!) and 1/n for the Laguerre recurrence.
struct WignerTables {
    int dim = 0;
    std::vector<double> ratio;  // k * dim + n
    std::vector<double> inv;    // inv[n] = 1/n, inv[0] unused
    std::vector<double> inv_sqrt;

    explicit WignerTables(int d)
        : dim(d), ratio(static_cast<size_t>(d) * d, 0.0), inv(d + 1, 0.0), inv_sqrt(d + 1, 0.0) {
        for (int n = 1; n <= d; ++n) {
            inv[n] = 1.0 / n;
            inv_sqrt[n] = 1.0 / std::sqrt(static_cast<double>(n));
        }
        for (int k = 0; k < d; ++k) {
            double r = 1.0;
            for (int n = 0; n + k < d; ++n) {
                if (n > 0) r *= std::sqrt(static_cast<double>(n) / (n + k));
                ratio[static_cast<size_t>(k) * d + n] = r;
            }
        }
    }
};

/// W(zeta) = (2/pi) Tr[rho D(zeta) Pi D(zeta)^dagger] = (2/pi) Tr[rho D(2 zeta) Pi],
/// with the matrix elements of D(2 zeta) taken from their Laguerre closed form.
/// Exact for the given (truncated) rho; no truncation of D enters.
inline double wigner_value(const OperatorMatrix& rho, Complex zeta, const WignerTables& tab) {
    const int dim = static_cast<int>(rho.rows());
    const Complex z = 2.0 * zeta;
    const double x = std::norm(z);
    const double gauss = std::exp(-0.5 * x);

    // Sum over (m, n) of rho(n, m) <m|D|n> (-1)^n, grouped by offset k = m - n.
    Complex lead_lower = 1.0;
    Complex lead_upper = 1.0;
    double acc = 0.0;
    for (int k = 0; k < dim; ++k) {
        if (k > 0) {
            lead_lower *= z * tab.inv_sqrt[k];
            lead_upper *= -std::conj(z) * tab.inv_sqrt[k];
        }
        const double* ratio = tab.ratio.data() + static_cast<size_t>(k) * dim;
        double lag_prev = 0.0;
        double lag = 1.0;
        Complex lower_sum = 0.0;  // m = n + k
        Complex upper_sum = 0.0;  // m = n, column n + k
        for (int n = 0; n + k < dim; ++n) {
            if (n > 0) {
                const double next = ((2.0 * n - 1.0 + k - x) * lag - (n - 1.0 + k) * lag_prev) * tab.inv[n];
                lag_prev = lag;
                lag = next;
            }
            const double w = ratio[n] * lag;
            // <n+k|D|n> pairs with rho(n, n+k) and parity of n;
            // <n|D|n+k> pairs with rho(n+k, n) and parity of n+k.
            lower_sum += ((n % 2 == 0) ? w : -w) * rho(n, n + k);
            if (k > 0) {
                upper_sum += (((n + k) % 2 == 0) ? w : -w) * rho(n + k, n);
            }
        }
        acc += (lead_lower * lower_sum).real();
        if (k > 0) {
            acc += (lead_upper * upper_sum).real();
        }
    }
    return (2.0 / std::numbers::pi) * gauss * acc;
}

inline double wigner_value(const OperatorMatrix& rho, Complex zeta) {
    return wigner_value(rho, zeta, WignerTables(static_cast<int>(rho.rows())));
}

}  // namespace detail

/// Wigner function at one phase-space point.
inline double wigner_point(const DensityMatrix& rho_b, Complex zeta) {
    if (rho_b.is_composite()) {
        throw DimensionMismatch("wigner_point expects the reduced mechanical state");
    }
    const double tail = tail_mass(rho_b);
    if (tail > 1e-5) {
        throw TruncationOverflow("wigner_point: tail mass " + std::to_string(tail) + " exceeds 1e-5");
    }
    if (std::norm(zeta) > rho_b.dim()) {
        warn("wigner_point: |zeta|^2 = " + std::to_string(std::norm(zeta)) + " beyond the truncation dimension " +
             std::to_string(rho_b.dim()));
    }
    return detail::wigner_value(rho_b.matrix(), zeta);
}

struct GridSpec {
    double re_min = -4.0;
    double re_max = 4.0;
    double im_min = -4.0;
    double im_max = 4.0;
    double step = 0.08;

    int cols() const { return static_cast<int>(std::lround((re_max - re_min) / step)) + 1; }
    int rows() const { return static_cast<int>(std::lround((im_max - im_min) / step)) + 1; }

    void validate() const {
        if (!(step > 0.0) || !(re_max >= re_min) || !(im_max >= im_min)) {
            throw InvalidArgument("grid needs step > 0 and max >= min on both axes");
        }
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Wigner samples; row r is Im zeta = im_min + r*step, column c is Re zeta = re_min + c*step.
struct WignerGrid {
    GridSpec spec;
    int rows = 0;
    int cols = 0;
    std::vector<double> values;  // row-major

    double at(int r, int c) const { return values[static_cast<size_t>(r) * cols + c]; }
    Complex point(int r, int c) const { return {spec.re_min + c * spec.step, spec.im_min + r * spec.step}; }
};

struct WignerResult {
    WignerGrid grid;
    double w_min = 0.0;         // most negative value (the "minimal negativity")
    double riemann_sum = 0.0;   // sum W * step^2, ~1 when the grid covers the state
    double boundary_max = 0.0;  // max |W| on the grid edge
    bool coverage_ok = true;
};

/// Evaluates the whole grid. Points are independent; `threads > 1` splits rows
/// across workers and gives bit-identical results.
inline WignerResult wigner_grid_and_negativity(const DensityMatrix& rho_b, const GridSpec& spec = {},
                                               unsigned threads = 1) {
    if (rho_b.is_composite()) {
        throw DimensionMismatch("wigner grid expects the reduced mechanical state");
    }
    spec.validate();
    const double tail = tail_mass(rho_b);
    if (tail > 1e-5) {
        throw TruncationOverflow("wigner grid: tail mass " + std::to_string(tail) + " exceeds 1e-5");
    }
    WignerResult res;
    WignerGrid& grid = res.grid;
    grid.spec = spec;
    grid.rows = spec.rows();
    grid.cols = spec.cols();
    grid.values.assign(static_cast<size_t>(grid.rows) * grid.cols, 0.0);

    const OperatorMatrix& m = rho_b.matrix();
    const detail::WignerTables tab(rho_b.dim());
    auto fill_rows = [&](int begin, int end) {
        for (int r = begin; r < end; ++r) {
            for (int c = 0; c < grid.cols; ++c) {
                grid.values[static_cast<size_t>(r) * grid.cols + c] = detail::wigner_value(m, grid.point(r, c), tab);
            }
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(grid.rows)));
    if (threads == 1) {
        fill_rows(0, grid.rows);
    } else {
        std::vector<std::jthread> workers;
        const int chunk = (grid.rows + static_cast<int>(threads) - 1) / static_cast<int>(threads);
        for (int begin = 0; begin < grid.rows; begin += chunk) {
            workers.emplace_back(fill_rows, begin, std::min(grid.rows, begin + chunk));
        }
    }

    res.w_min = *std::min_element(grid.values.begin(), grid.values.end());
    double sum = 0.0;
    for (double v : grid.values) sum += v;
    res.riemann_sum = sum * spec.step * spec.step;
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            if (r == 0 || c == 0 || r == grid.rows - 1 || c == grid.cols - 1) {
                res.boundary_max = std::max(res.boundary_max, std::abs(grid.at(r, c)));
            }
        }
    }
    if (res.boundary_max > 1e-4) {
        res.coverage_ok = false;
        warn("wigner grid does not cover the state: |W| = " + std::to_string(res.boundary_max) + " on the boundary");
    }
    return res;
}

}  // namespace optocat
