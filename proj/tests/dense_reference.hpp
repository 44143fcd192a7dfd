#pragma once

// Dense matrix-product versions of the master equations, used only as a
// reference for the structured kernels.

#include <random>

#include "optocat/fock.hpp"
#include "optocat/model.hpp"

namespace optocat::testing {

inline OperatorMatrix dissipator(const OperatorMatrix& L, const OperatorMatrix& rho) {
    const OperatorMatrix Ld = L.adjoint();
    const OperatorMatrix LdL = Ld * L;
    return 2.0 * L * rho * Ld - LdL * rho - rho * LdL;
}

inline OperatorMatrix dense_lindblad(const OperatorMatrix& rho, const SystemParams& p) {
    const ModeDim da(p.N_a), db(p.N_b);
    const OperatorMatrix H = effective_hamiltonian(p);
    const OperatorMatrix a = tensor(annihilation_op(da), identity_op(db));
    const OperatorMatrix b = tensor(identity_op(da), annihilation_op(db));
    const Complex i(0.0, 1.0);
    OperatorMatrix out = -i * (H * rho - rho * H) + p.kappa * dissipator(a, rho);
    if (p.gamma_m > 0.0) {
        out += p.gamma_m * (p.n_th + 1.0) * dissipator(b, rho);
        out += p.gamma_m * p.n_th * dissipator(b.adjoint(), rho);
    }
    return out;
}

inline OperatorMatrix dense_reduced(const OperatorMatrix& rho, const SystemParams& p) {
    const OperatorMatrix b = annihilation_op(ModeDim(p.N_b));
    return p.gamma2() * dissipator(b * b, rho);
}

/// Random Hermitian, positive, unit-trace matrix.
inline OperatorMatrix random_density(int dim, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    OperatorMatrix x(dim, dim);
    for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) x(r, c) = Complex(n(rng), n(rng));
    }
    OperatorMatrix rho = x * x.adjoint();
    rho /= rho.trace();
    return 0.5 * (rho + rho.adjoint());
}

}  // namespace optocat::testing
