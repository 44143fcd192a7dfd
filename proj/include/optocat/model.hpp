#pragma once

// Effective three-wave-mixing model of the cavity (a) and mechanics (b):
//
//   H / hbar = g a b^dagger^2 + E2 a + h.c.
//
// with cavity loss kappa and thermal mechanical damping gamma_m, n_th.
// All rates are in units of kappa (kappa = 1 by default) and time in 1/kappa.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "optocat/errors.hpp"
#include "optocat/fock.hpp"

namespace optocat {

struct SystemParams {
    double g = 0.1;
    double kappa = 1.0;
    Complex E2 = 0.0;
    double gamma_m = 0.0;
    double n_th = 0.0;
    int N_a = 3;
    int N_b = 25;

    void validate() const {
        if (!(kappa > 0.0)) throw InvalidArgument("kappa must be > 0");
        if (!std::isfinite(g)) throw InvalidArgument("g must be finite");
        if (!(std::isfinite(E2.real()) && std::isfinite(E2.imag()))) throw InvalidArgument("E2 must be finite");
        if (!(gamma_m >= 0.0)) throw InvalidArgument("gamma_m must be >= 0");
        if (!(n_th >= 0.0)) throw InvalidArgument("n_th must be >= 0");
        if (N_a < 2) throw InvalidDimension("N_a must be >= 2, got " + std::to_string(N_a));
        if (N_b < 4) throw InvalidDimension("N_b must be >= 4, got " + std::to_string(N_b));
    }

    /// Two-phonon loss rate after eliminating the cavity: g^2 / kappa.
    double gamma2() const { return g * g / kappa; }

    int dim() const { return N_a * N_b; }
};

enum class ModelKind { full, reduced };

/// Eigenvalue E0 of b^2 on the mechanical part of the dark state |0_a>|psi>:
/// the a^dagger terms of H cancel iff (g b^2 + E2^*)|psi> = 0.
inline Complex dark_state_eigenvalue(const SystemParams& p) {
    if (p.g == 0.0) {
        throw InvalidArgument("dark state undefined for g = 0");
    }
    return -std::conj(p.E2) / p.g;
}

/// Stiffness estimate used to bound the RK4 step: dt * Lambda <= 0.1.
inline double stiffness(const SystemParams& p, ModelKind kind = ModelKind::full) {
    double lam = std::max({p.kappa, std::abs(p.g) * p.N_b, std::abs(p.E2), p.gamma_m * (p.n_th + 1.0) * p.N_b});
    if (kind == ModelKind::reduced) {
        lam = std::max(lam, p.gamma2() * p.N_b * p.N_b);
    }
    return lam;
}

/// Dense H / hbar on the composite space.
inline OperatorMatrix effective_hamiltonian(const SystemParams& p) {
    p.validate();
    const ModeDim da(p.N_a), db(p.N_b);
    const OperatorMatrix a = annihilation_op(da);
    const OperatorMatrix bd = creation_op(db);
    const OperatorMatrix half = p.g * tensor(a, bd * bd) + p.E2 * tensor(a, identity_op(db));
    return half + half.adjoint();
}

/// I_a (x) (-1)^{b^dagger b}
inline OperatorMatrix mechanical_parity_op(int cavity_dim, int mech_dim) {
    return tensor(identity_op(ModeDim(cavity_dim)), parity_op(ModeDim(mech_dim)));
}

/// Right-hand side of the full master equation
///
///   d rho/dt = -i [H, rho] + kappa D[a] rho
///              + gamma_m (n_th + 1) D[b] rho + gamma_m n_th D[b^dagger] rho,
///   D[L] rho = 2 L rho L^dagger - L^dagger L rho - rho L^dagger L,
///
/// applied directly on the ladder structure of the Fock basis. The input must be
/// Hermitian: only the upper triangle is evaluated and the result is mirrored.
class FullLiouvillian {
public:
    explicit FullLiouvillian(const SystemParams& p) : p_(p) {
        p_.validate();
        const int na = p_.N_a, nb = p_.N_b;
        sqrt_a_.resize(na + 1);
        sqrt_b_.resize(nb + 1);
        for (int k = 0; k <= na; ++k) sqrt_a_[k] = std::sqrt(static_cast<double>(k));
        for (int k = 0; k <= nb; ++k) sqrt_b_[k] = std::sqrt(static_cast<double>(k));
        // <m|b b^dagger|m> on the truncated space vanishes at the top level.
        bbd_.resize(nb);
        for (int m = 0; m < nb; ++m) bbd_[m] = (m + 1 < nb) ? m + 1.0 : 0.0;
        pair_up_.assign(nb, 0.0);
        pair_dn_.assign(nb, 0.0);
        for (int m = 0; m < nb; ++m) {
            if (m >= 2) pair_up_[m] = std::sqrt(m * (m - 1.0));
            if (m + 2 < nb) pair_dn_[m] = std::sqrt((m + 1.0) * (m + 2.0));
        }
        zeros_.assign(nb + 2, Complex(0.0));
        down_.resize(nb);
        for (int m = 0; m < nb; ++m) {
            const double c = p_.gamma_m * (p_.n_th + 1.0) * m + p_.gamma_m * p_.n_th * bbd_[m];
            down_[m] = c;
        }
    }

    const SystemParams& params() const noexcept { return p_; }
    int dim() const noexcept { return p_.dim(); }

    void apply(const OperatorMatrix& rho, OperatorMatrix& out) const {
        const int na = p_.N_a, nb = p_.N_b, dim = na * nb;
        if (rho.rows() != dim || rho.cols() != dim) {
            throw DimensionMismatch("Liouvillian expects a " + std::to_string(dim) + "x" + std::to_string(dim) +
                                    " density matrix");
        }
        out.resize(dim, dim);
        const Complex I(0.0, 1.0);
        const double g = p_.g, kappa = p_.kappa;
        const Complex E2 = p_.E2;
        const double decay_rate = 2.0 * p_.gamma_m * (p_.n_th + 1.0);
        const double heat_rate = 2.0 * p_.gamma_m * p_.n_th;
        const Complex* r = rho.data();
        const auto col = [r, dim](int j) { return r + static_cast<size_t>(j) * dim; };
        const auto at = [r, dim](int i, int j) { return r[static_cast<size_t>(j) * dim + i]; };

        // H(i,k) entries for row index (p, m), as (cavity shift, mech shift, coefficient):
        //   (+1, -2): g sqrt(p+1) sqrt(m(m-1))      from g a b^dagger^2
        //   (-1, +2): g sqrt(p) sqrt((m+1)(m+2))    from g a^dagger b^2
        //   (+1,  0): E2 sqrt(p+1)                  from E2 a
        //   (-1,  0): E2^* sqrt(p)                  from E2^* a^dagger
        for (int q = 0; q < na; ++q) {
            for (int n = 0; n < nb; ++n) {
                const int j = q * nb + n;
                // Column side of -i[H, rho]: + i rho(i,k) conj(H(j,k)).
                const bool c1 = q + 1 < na && n >= 2;
                const bool c2 = q >= 1 && n + 2 < nb;
                const bool c3 = q + 1 < na;
                const bool c4 = q >= 1;
                const Complex w1 = c1 ? I * (g * sqrt_a_[q + 1] * sqrt_b_[n] * sqrt_b_[n - 1]) : 0.0;
                const Complex w2 = c2 ? I * (g * sqrt_a_[q] * sqrt_b_[n + 1] * sqrt_b_[n + 2]) : 0.0;
                const Complex w3 = c3 ? I * std::conj(E2) * sqrt_a_[q + 1] : 0.0;
                const Complex w4 = c4 ? I * E2 * sqrt_a_[q] : 0.0;
                const int k1 = j + nb - 2, k2 = j - nb + 2, k3 = j + nb, k4 = j - nb;

                // General element, used at the edges of the mechanical ladder.
                const auto element = [&](int pa, int m) {
                    const int i = pa * nb + m;
                    Complex acc = -(kappa * (pa + q) + down_[m] + down_[n]) * at(i, j);

                    // Row side: -i H(i,k) rho(k,j).
                    Complex hr = 0.0;
                    if (pa + 1 < na) {
                        if (m >= 2) hr += (g * sqrt_a_[pa + 1] * sqrt_b_[m] * sqrt_b_[m - 1]) * at(i + nb - 2, j);
                        hr += E2 * sqrt_a_[pa + 1] * at(i + nb, j);
                    }
                    if (pa >= 1) {
                        if (m + 2 < nb) hr += (g * sqrt_a_[pa] * sqrt_b_[m + 1] * sqrt_b_[m + 2]) * at(i - nb + 2, j);
                        hr += std::conj(E2) * sqrt_a_[pa] * at(i - nb, j);
                    }
                    acc -= I * hr;

                    if (c1) acc += w1 * at(i, k1);
                    if (c2) acc += w2 * at(i, k2);
                    if (c3) acc += w3 * at(i, k3);
                    if (c4) acc += w4 * at(i, k4);

                    // Jump terms.
                    if (pa + 1 < na && c3) {
                        acc += (2.0 * kappa * sqrt_a_[pa + 1] * sqrt_a_[q + 1]) * at(i + nb, j + nb);
                    }
                    if (m + 1 < nb && n + 1 < nb) {
                        acc += (decay_rate * sqrt_b_[m + 1] * sqrt_b_[n + 1]) * at(i + 1, j + 1);
                    }
                    if (m >= 1 && n >= 1) {
                        acc += (heat_rate * sqrt_b_[m] * sqrt_b_[n]) * at(i - 1, j - 1);
                    }
                    return acc;
                };

                for (int pa = 0; pa <= q; ++pa) {
                    const int m_end = (pa == q) ? n : nb - 1;
                    const int base = pa * nb;
                    Complex* o = out.data() + static_cast<size_t>(j) * dim + base;

                    // Interior 1 <= m <= nb-2: every term is a contiguous stream in m.
                    // Absent terms read from a zero buffer; coefficients vanishing at
                    // the ladder ends are folded into the per-m tables.
                    const int lo = 1, hi = std::min(m_end, nb - 2);
                    if (hi >= lo) {
                        const Complex* zero = zeros_.data();
                        const bool up = pa + 1 < na, dn = pa >= 1;
                        const Complex* rj = col(j) + base;
                        const Complex* up2 = up ? rj + nb - 2 : zero;
                        const Complex* up0 = up ? rj + nb : zero;
                        const Complex* dn2 = dn ? rj - nb + 2 : zero;
                        const Complex* dn0 = dn ? rj - nb : zero;
                        const Complex* s1 = c1 ? col(k1) + base : zero;
                        const Complex* s2 = c2 ? col(k2) + base : zero;
                        const Complex* s3 = c3 ? col(k3) + base : zero;
                        const Complex* s4 = c4 ? col(k4) + base : zero;
                        const Complex* ja = (up && c3) ? col(j + nb) + base + nb : zero;
                        const Complex* jb = (n + 1 < nb) ? col(j + 1) + base + 1 : zero;
                        const Complex* jh = (n >= 1) ? col(j - 1) + base - 1 : zero;

                        const double diag0 = -(kappa * (pa + q) + down_[n]);
                        const double ga = up ? g * sqrt_a_[pa + 1] : 0.0;
                        const double gb = dn ? g * sqrt_a_[pa] : 0.0;
                        // -i * E2 sqrt(p+1) and -i * E2^* sqrt(p)
                        const Complex eu = up ? -I * E2 * sqrt_a_[pa + 1] : 0.0;
                        const Complex ed = dn ? -I * std::conj(E2) * sqrt_a_[pa] : 0.0;
                        const double ka = (up && c3) ? 2.0 * kappa * sqrt_a_[pa + 1] * sqrt_a_[q + 1] : 0.0;
                        const double kb = (n + 1 < nb) ? decay_rate * sqrt_b_[n + 1] : 0.0;
                        const double kh = (n >= 1) ? heat_rate * sqrt_b_[n] : 0.0;

                        for (int m = lo; m <= hi; ++m) {
                            // -i * g (...) rho: multiply the real sum by -i at the end.
                            const Complex hreal = (ga * pair_up_[m]) * up2[m] + (gb * pair_dn_[m]) * dn2[m];
                            Complex acc = (diag0 - down_[m]) * rj[m];
                            acc += Complex(hreal.imag(), -hreal.real());
                            acc += cmul(eu, up0[m]) + cmul(ed, dn0[m]);
                            acc += cmul(w1, s1[m]) + cmul(w2, s2[m]) + cmul(w3, s3[m]) + cmul(w4, s4[m]);
                            acc += ka * ja[m] + (kb * sqrt_b_[m + 1]) * jb[m] + (kh * sqrt_b_[m]) * jh[m];
                            o[m] = acc;
                        }
                    }
                    o[0] = element(pa, 0);
                    for (int m = std::max(hi + 1, lo); m <= m_end; ++m) {
                        o[m] = element(pa, m);
                    }
                }
            }
        }
        for (int j = 0; j < dim; ++j) {
            for (int i = j + 1; i < dim; ++i) {
                out(i, j) = std::conj(out(j, i));
            }
        }
    }

    OperatorMatrix operator()(const OperatorMatrix& rho) const {
        OperatorMatrix out;
        apply(rho, out);
        return out;
    }

private:
    SystemParams p_;
    std::vector<double> sqrt_a_;
    std::vector<double> sqrt_b_;
    std::vector<double> bbd_;
    std::vector<double> down_;  // anticommutator weights of the mechanical dissipators
    std::vector<double> pair_up_;  // sqrt(m(m-1)), zero below m = 2
    std::vector<double> pair_dn_;  // sqrt((m+1)(m+2)), zero where m+2 leaves the space
    std::vector<Complex> zeros_;

    static Complex cmul(Complex a, Complex b) {
        return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
    }
};

/// Right-hand side of the two-phonon loss equation obtained by eliminating the cavity:
///   d rho_b/dt = gamma2 (2 b^2 rho b^dagger^2 - b^dagger^2 b^2 rho - rho b^dagger^2 b^2),  gamma2 = g^2/kappa.
class ReducedLiouvillian {
public:
    explicit ReducedLiouvillian(const SystemParams& p) : p_(p) {
        p_.validate();
        const int nb = p_.N_b;
        pair_.resize(nb);
        loss_.resize(nb);
        for (int m = 0; m < nb; ++m) {
            pair_[m] = (m + 2 < nb) ? std::sqrt((m + 1.0) * (m + 2.0)) : 0.0;
            loss_[m] = m * (m - 1.0);
        }
    }

    const SystemParams& params() const noexcept { return p_; }
    int dim() const noexcept { return p_.N_b; }

    void apply(const OperatorMatrix& rho, OperatorMatrix& out) const {
        const int nb = p_.N_b;
        if (rho.rows() != nb || rho.cols() != nb) {
            throw DimensionMismatch("reduced Liouvillian expects a " + std::to_string(nb) + "x" +
                                    std::to_string(nb) + " density matrix");
        }
        out.resize(nb, nb);
        const double g2 = p_.gamma2();
        for (int n = 0; n < nb; ++n) {
            for (int m = 0; m < nb; ++m) {
                Complex acc = -(loss_[m] + loss_[n]) * rho(m, n);
                if (m + 2 < nb && n + 2 < nb) {
                    acc += (2.0 * pair_[m] * pair_[n]) * rho(m + 2, n + 2);
                }
                out(m, n) = g2 * acc;
            }
        }
    }

    OperatorMatrix operator()(const OperatorMatrix& rho) const {
        OperatorMatrix out;
        apply(rho, out);
        return out;
    }

private:
    SystemParams p_;
    std::vector<double> pair_;
    std::vector<double> loss_;
};

inline OperatorMatrix lindblad_rhs(const DensityMatrix& rho, const SystemParams& p) {
    if (!rho.is_composite() || rho.cavity_dim() != p.N_a || rho.mech_dim() != p.N_b) {
        throw DimensionMismatch("lindblad_rhs: state is not on the (" + std::to_string(p.N_a) + ", " +
                                std::to_string(p.N_b) + ") composite space");
    }
    return FullLiouvillian(p)(rho.matrix());
}

inline OperatorMatrix reduced_rhs(const DensityMatrix& rho_b, const SystemParams& p) {
    if (rho_b.is_composite() || rho_b.mech_dim() != p.N_b) {
        throw DimensionMismatch("reduced_rhs: state is not a single-mode state of dimension " +
                                std::to_string(p.N_b));
    }
    return ReducedLiouvillian(p)(rho_b.matrix());
}

}  // namespace optocat
