#pragma once

// Classical (mean-field) amplitudes of the two-tone driven quadratic
// optomechanical system:
//
//   d alpha/dt = -(kappa_c + i delta_c) alpha - i g0 alpha (beta + beta^*)^2
//                - i (E1 + E2 e^{-i delta_12 t})
//   d beta/dt  = -(gamma_m + i omega_m) beta - 2 i g0 |alpha|^2 (beta + beta^*)
//
// Inputs and outputs are in physical units (rad/s, s). Integration runs in
// units of kappa_c internally.

#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "optocat/errors.hpp"
#include "optocat/fock.hpp"
#include "optocat/rk4.hpp"

namespace optocat::meanfield {

struct MeanFieldParams {
    double g0 = 0.0;  // may be negative
    double delta_c = 0.0;
    double delta_12 = 0.0;
    double omega_m = 1.0;
    double kappa_c = 1.0;
    double gamma_m = 0.0;
    Complex E1 = 0.0;
    Complex E2 = 0.0;

    void validate() const {
        if (!(kappa_c > 0.0)) throw InvalidArgument("kappa_c must be > 0");
        if (!(omega_m > 0.0)) throw InvalidArgument("omega_m must be > 0");
        if (!(gamma_m >= 0.0)) throw InvalidArgument("gamma_m must be >= 0");
    }
};

struct ClassicalState {
    Complex alpha = 0.0;
    Complex beta = 0.0;
    double t = 0.0;
};

struct Derivative {
    Complex dalpha;
    Complex dbeta;
};

inline Derivative classical_rhs(const ClassicalState& s, const MeanFieldParams& p) {
    const Complex i(0.0, 1.0);
    const double x = 2.0 * s.beta.real();  // beta + beta^*
    const Complex drive = p.E1 + p.E2 * std::exp(-i * p.delta_12 * s.t);
    const Complex da = -(p.kappa_c + i * p.delta_c) * s.alpha - i * p.g0 * s.alpha * (x * x) - i * drive;
    const Complex db = -(p.gamma_m + i * p.omega_m) * s.beta - 2.0 * i * p.g0 * std::norm(s.alpha) * x;
    return {da, db};
}

/// Fixed-step RK4 trajectory from s0 to s0.t + t_end. Requires dt * max(kappa_c, omega_m) <= 0.05.
/// Returns every `record_every`-th state plus the final one.
inline std::vector<ClassicalState> integrate_classical(const ClassicalState& s0, const MeanFieldParams& p,
                                                       double t_end, double dt, int record_every = 1) {
    p.validate();
    if (!(dt > 0.0) || !(t_end >= 0.0)) {
        throw InvalidArgument("integrate_classical needs dt > 0 and t_end >= 0");
    }
    if (dt * std::max(p.kappa_c, p.omega_m) > 0.05) {
        throw InvalidArgument("step too large: dt * max(kappa_c, omega_m) = " +
                              std::to_string(dt * std::max(p.kappa_c, p.omega_m)) + " > 0.05");
    }
    if (record_every < 1) {
        throw InvalidArgument("record_every must be >= 1");
    }

    // Rescale so that kappa_c = 1.
    const double k = p.kappa_c;
    MeanFieldParams q = p;
    q.g0 /= k;
    q.delta_c /= k;
    q.delta_12 /= k;
    q.omega_m /= k;
    q.kappa_c = 1.0;
    q.gamma_m /= k;
    q.E1 /= k;
    q.E2 /= k;

    using Vec = Eigen::Vector2cd;
    auto f = [&q](double tau, const Vec& y) {
        const Derivative d = classical_rhs({y(0), y(1), tau}, q);
        return Vec(d.dalpha, d.dbeta);
    };

    const auto steps = static_cast<long long>(std::llround(t_end / dt));
    const double dtau = dt * k;
    const double tau0 = s0.t * k;
    Vec y(s0.alpha, s0.beta);

    std::vector<ClassicalState> out;
    out.reserve(static_cast<size_t>(steps / record_every + 2));
    out.push_back(s0);
    for (long long n = 1; n <= steps; ++n) {
        const double tau = tau0 + (n - 1) * dtau;
        y = rk4_advance(y, tau, dtau, f);
        const double t = s0.t + n * dt;
        if (!y.allFinite()) {
            throw NumericalAbort("classical trajectory diverged", t);
        }
        if (n % record_every == 0 || n == steps) {
            out.push_back({y(0), y(1), t});
        }
    }
    return out;
}

/// Delta_c = delta_c - g0 (beta_s + beta_s^*)^2
inline double effective_detuning(const MeanFieldParams& p, Complex beta_s) {
    const double x = 2.0 * beta_s.real();
    return p.delta_c - p.g0 * x * x;
}

/// alpha_s ~= E1 / (i kappa_c - Delta_c), neglecting the weak E2 tone.
inline Complex steady_cavity_amplitude(const MeanFieldParams& p, Complex beta_s) {
    if (std::abs(p.E1) > 0.0 && std::abs(p.E2) / std::abs(p.E1) > 0.1) {
        warn("steady_cavity_amplitude: |E2|/|E1| = " + std::to_string(std::abs(p.E2) / std::abs(p.E1)) +
             " > 0.1, the weak-tone approximation is poor");
    } else if (std::abs(p.E1) == 0.0 && std::abs(p.E2) > 0.0) {
        warn("steady_cavity_amplitude: E1 = 0 with E2 != 0, the weak-tone approximation does not apply");
    }
    return p.E1 / Complex(-effective_detuning(p, beta_s), p.kappa_c);
}

/// Rotates E1 so that steady_cavity_amplitude is real and positive.
inline Complex phase_fixed_drive(const MeanFieldParams& p, Complex beta_s) {
    const Complex denom(-effective_detuning(p, beta_s), p.kappa_c);
    return std::abs(p.E1) * std::exp(Complex(0.0, std::arg(denom)));
}

/// |(4 g0 omega_m |alpha_s|^2 - omega_m^2 - gamma_m^2)(beta_s + beta_s^*)|, zero at a steady state.
inline double steady_beta_residual(const MeanFieldParams& p, Complex alpha_s, Complex beta_s) {
    const double first = 4.0 * p.g0 * p.omega_m * std::norm(alpha_s) - p.omega_m * p.omega_m - p.gamma_m * p.gamma_m;
    return std::abs(first * 2.0 * beta_s.real());
}

/// g = g0 * alpha_s for a phase-fixed (real) cavity amplitude.
inline double effective_coupling(double g0, Complex alpha_s) {
    if (std::abs(alpha_s.imag()) > 1e-9 * std::max(1.0, std::abs(alpha_s))) {
        throw InvalidArgument("effective_coupling: alpha_s is not phase-fixed (imag part " +
                              std::to_string(alpha_s.imag()) + ")");
    }
    return g0 * alpha_s.real();
}

struct ResonanceReport {
    double cavity_deviation = 0.0;  // delta_c - 2 omega_m
    double split_deviation = 0.0;   // delta_12 - delta_c
    bool cavity_ok = false;
    bool split_ok = false;

    /// The three-wave-mixing Hamiltonian only holds when both conditions hold.
    bool valid() const { return cavity_ok && split_ok; }
};

inline ResonanceReport resonance_check(const MeanFieldParams& p, double tolerance = 0.0) {
    ResonanceReport r;
    r.cavity_deviation = p.delta_c - 2.0 * p.omega_m;
    r.split_deviation = p.delta_12 - p.delta_c;
    r.cavity_ok = std::abs(r.cavity_deviation) <= tolerance;
    r.split_ok = std::abs(r.split_deviation) <= tolerance;
    return r;
}

struct StabilityReport {
    double initial = 0.0;  // |beta(0)|
    double final = 0.0;    // |beta(t_end)|
    double peak = 0.0;     // max |beta(t)|

    bool decays(double factor = 0.5) const { return final < factor * initial; }
    bool bounded(double factor = 10.0) const { return peak <= factor * initial; }
};

/// Perturbs beta away from the beta_s = 0 root (with alpha at its steady value)
/// and integrates the classical equations.
inline StabilityReport check_beta_zero_stability(const MeanFieldParams& p, Complex perturbation, double t_end,
                                                 double dt) {
    const ClassicalState s0{steady_cavity_amplitude(p, 0.0), perturbation, 0.0};
    const auto traj = integrate_classical(s0, p, t_end, dt);
    StabilityReport r;
    r.initial = std::abs(perturbation);
    for (const auto& s : traj) {
        r.peak = std::max(r.peak, std::abs(s.beta));
    }
    r.final = std::abs(traj.back().beta);
    return r;
}

}  // namespace optocat::meanfield
