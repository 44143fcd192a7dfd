#pragma once

// Closed-form reference results for the two-phonon dynamics: dark states,
// even/odd coherent states, the bad-cavity steady state from a coherent
// input, and the Wigner function of cat states. These do not share code
// paths with the integrators or the Laguerre-based Wigner evaluation.

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "optocat/errors.hpp"
#include "optocat/fock.hpp"

namespace optocat::oracle {

enum class Parity { even, odd };

inline const char* to_string(Parity p) { return p == Parity::even ? "even" : "odd"; }

/// b^2 |psi> = E0 |psi> with E0 = -E2/g, and the cat amplitude beta = sqrt(E0) (principal branch).
struct CatSpec {
    Complex E0 = 0.0;
    Complex beta = 0.0;
    Parity parity = Parity::even;

    static CatSpec from_drive(Complex E0, Parity parity) { return {E0, std::sqrt(E0), parity}; }
};

/// Modified Bessel function I0: power series for x <= 15, asymptotic expansion above.
inline double bessel_i0(double x) {
    if (!(x >= 0.0)) {
        throw InvalidArgument("bessel_i0 needs x >= 0");
    }
    if (x <= 15.0) {
        const double q = 0.25 * x * x;
        double term = 1.0;
        double sum = 1.0;
        for (int k = 1; k < 500; ++k) {
            term *= q / (static_cast<double>(k) * k);
            sum += term;
            if (term < 1e-17 * sum) break;
        }
        return sum;
    }
    // e^x / sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k)
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        const double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * x * k);
        if (next > term) break;  // the series starts diverging
        term = next;
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return std::exp(x) / std::sqrt(2.0 * std::numbers::pi * x) * sum;
}

/// Dark-state amplitudes from c_{n+2} = E0 c_n / sqrt((n+1)(n+2)), seeded at |0> or |1>.
inline StateVector dark_state_recursion(Complex E0, Parity parity, ModeDim d) {
    const int dim = d.value();
    const int start = parity == Parity::even ? 0 : 1;
    if (start >= dim) {
        throw InvalidDimension("dimension too small for an odd dark state");
    }
    // Continue the recursion past the cutoff to measure what truncation drops.
    Amplitudes amps = Amplitudes::Zero(dim);
    Complex c = 1.0;
    double kept = 0.0;
    double tail = 0.0;
    for (int n = start;; n += 2) {
        const double w = std::norm(c);
        if (n < dim) {
            amps(n) = c;
        }
        (n < dim - 2 ? kept : tail) += w;
        if (n >= dim && (w < 1e-30 * kept || n > dim + 10000)) break;
        c *= E0 / std::sqrt((n + 1.0) * (n + 2.0));
        if (c == Complex(0.0)) break;
    }
    const double frac = tail / (kept + tail);
    if (frac > kTruncationLimit) {
        throw TruncationOverflow("dark_state_recursion: tail mass " + std::to_string(frac) + " for |E0| = " +
                                 std::to_string(std::abs(E0)) + " in dim " + std::to_string(dim));
    }
    return StateVector::normalized(std::move(amps));
}

namespace detail {

inline StateVector cat(Complex beta, Parity parity, ModeDim d) {
    const double b2 = std::norm(beta);
    const double overlap = std::exp(-2.0 * b2);  // <beta|-beta>
    const double weight = parity == Parity::even ? 1.0 + overlap : 1.0 - overlap;
    if (!(weight > 0.0)) {
        throw InvalidArgument("odd cat with beta = 0 has no normalizable state");
    }
    // Cat tail is at most the coherent tail divided by the sector weight.
    const double tail = coherent_tail_mass(beta, d.value() - 2) / weight;
    if (tail > kTruncationLimit) {
        throw TruncationOverflow(std::string(to_string(parity)) + " cat: tail mass " + std::to_string(tail) +
                                 " in dim " + std::to_string(d.value()));
    }
    const int first = parity == Parity::even ? 0 : 1;
    Amplitudes amps = Amplitudes::Zero(d.value());
    Complex c = std::exp(-0.5 * b2);  // <n|beta> at n = 0
    for (int n = 0; n < d.value(); ++n) {
        if (n > 0) c *= beta / std::sqrt(static_cast<double>(n));
        if ((n - first) % 2 == 0) amps(n) = 2.0 * c;  // |beta> +/- |-beta> keeps only one parity
    }
    return StateVector::normalized(std::move(amps));
}

}  // namespace detail

/// (|beta> + |-beta>) / sqrt(N_e),  N_e = 2 [1 + exp(-2|beta|^2)]
inline StateVector even_cat(Complex beta, ModeDim d) { return detail::cat(beta, Parity::even, d); }

/// (|beta> - |-beta>) / sqrt(N_o),  N_o = 2 [1 - exp(-2|beta|^2)]
inline StateVector odd_cat(Complex beta, ModeDim d) {
    if (beta == Complex(0.0)) {
        throw InvalidArgument("odd_cat: beta = 0 gives a degenerate normalization");
    }
    return detail::cat(beta, Parity::odd, d);
}

inline StateVector cat_state(const CatSpec& spec, ModeDim d) {
    return spec.parity == Parity::even ? even_cat(spec.beta, d) : odd_cat(spec.beta, d);
}

/// Steady state reached from |beta0> under two-phonon loss:
/// P00|0><0| + P11|1><1| + (P01|0><1| + h.c.).
struct MixedSteadyState {
    double P00 = 1.0;
    double P11 = 0.0;
    Complex P01 = 0.0;

    OperatorMatrix density(int dim) const {
        OperatorMatrix m = OperatorMatrix::Zero(dim, dim);
        m(0, 0) = P00;
        m(1, 1) = P11;
        m(0, 1) = P01;
        m(1, 0) = std::conj(P01);
        return m;
    }
};

inline MixedSteadyState mixed_steady_predict(Complex beta0) {
    const double r = std::abs(beta0);
    const double theta = std::arg(beta0);
    const double r2 = r * r;
    MixedSteadyState s;
    s.P00 = 0.5 * (1.0 + std::exp(-2.0 * r2));
    s.P11 = 1.0 - s.P00;
    s.P01 = r * std::exp(Complex(-r2, -theta)) * bessel_i0(r2);
    return s;
}

/// (|0> + e^{i theta0}|1>) / sqrt(2)
inline StateVector approx_01_superposition(double theta0, ModeDim d) {
    Amplitudes amps = Amplitudes::Zero(d.value());
    amps(0) = 1.0 / std::numbers::sqrt2;
    amps(1) = std::exp(Complex(0.0, theta0)) / std::numbers::sqrt2;
    return StateVector::normalized(std::move(amps));
}

/// Wigner function of the dyad |alpha><gamma| (complex in general):
///   (2/pi) <gamma| D(zeta) Pi D(zeta)^dagger |alpha>
/// using D(-zeta)|alpha> = e^{(zeta^* alpha - zeta alpha^*)/2} |alpha - zeta> and Pi|u> = |-u>.
inline Complex coherent_dyad_wigner(Complex alpha, Complex gamma, Complex zeta) {
    const auto inner = [](Complex u, Complex v) {  // <u|v> for coherent states
        return std::exp(-0.5 * std::norm(u) - 0.5 * std::norm(v) + std::conj(u) * v);
    };
    const Complex phase_ket = std::exp(0.5 * (std::conj(zeta) * alpha - zeta * std::conj(alpha)));
    const Complex phase_bra = std::exp(0.5 * (zeta * std::conj(gamma) - std::conj(zeta) * gamma));
    return (2.0 / std::numbers::pi) * phase_ket * phase_bra * inner(gamma - zeta, zeta - alpha);
}

/// Exact Wigner function of the normalized even or odd cat state at zeta.
inline double cat_wigner_closed_form(Complex beta, Parity parity, Complex zeta) {
    const double sign = parity == Parity::even ? 1.0 : -1.0;
    const double norm = 2.0 * (1.0 + sign * std::exp(-2.0 * std::norm(beta)));
    if (!(norm > 0.0)) {
        throw InvalidArgument("cat_wigner_closed_form: odd cat with beta = 0");
    }
    const Complex w = coherent_dyad_wigner(beta, beta, zeta) + coherent_dyad_wigner(-beta, -beta, zeta) +
                      sign * (coherent_dyad_wigner(beta, -beta, zeta) + coherent_dyad_wigner(-beta, beta, zeta));
    return w.real() / norm;
}

}  // namespace optocat::oracle
