#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dense_reference.hpp"
#include "optocat/model.hpp"
#include "optocat/oracle.hpp"

using namespace optocat;
using optocat::testing::dense_lindblad;
using optocat::testing::dense_reduced;
using optocat::testing::random_density;

namespace {

SystemParams small(double gamma_m = 0.0, double n_th = 0.0) {
    SystemParams p;
    p.g = 0.37;
    p.E2 = Complex(0.4, -0.25);
    p.gamma_m = gamma_m;
    p.n_th = n_th;
    p.N_a = 3;
    p.N_b = 7;
    return p;
}

double max_abs(const OperatorMatrix& m) { return m.cwiseAbs().maxCoeff(); }

StateVector dark_state(const SystemParams& p) {
    const auto psi_b = oracle::dark_state_recursion(dark_state_eigenvalue(p), oracle::Parity::even, ModeDim(p.N_b));
    Amplitudes amps = Amplitudes::Zero(p.dim());
    amps.head(p.N_b) = psi_b.amplitudes();  // cavity in |0>
    return StateVector::normalized(amps);
}

}  // namespace

TEST(Params, Validation) {
    SystemParams p;
    EXPECT_NO_THROW(p.validate());
    p.N_b = 3;
    EXPECT_THROW(p.validate(), InvalidDimension);
    p = {};
    p.n_th = -1.0;
    EXPECT_THROW(p.validate(), InvalidArgument);
    p = {};
    p.kappa = 0.0;
    EXPECT_THROW(p.validate(), InvalidArgument);
    EXPECT_THROW(effective_hamiltonian(SystemParams{.N_b = 3}), InvalidDimension);
}

TEST(Hamiltonian, PairElement) {
    SystemParams p;
    p.g = 0.3;
    const OperatorMatrix H = effective_hamiltonian(p);
    const int bra = 1 * p.N_b + 0, ket = 0 * p.N_b + 2;
    EXPECT_NEAR(std::abs(H(bra, ket) - Complex(p.g * std::sqrt(2.0))), 0.0, 1e-15);
    EXPECT_LT(max_abs(H - H.adjoint()), 1e-15);
}

TEST(Hamiltonian, ZeroCouplingAndDrive) {
    SystemParams p;
    p.g = 0.0;
    EXPECT_EQ(max_abs(effective_hamiltonian(p)), 0.0);
}

TEST(Hamiltonian, AnnihilatesDarkState) {
    SystemParams p;
    p.g = 0.1;
    p.E2 = 0.5;
    p.N_a = 3;
    p.N_b = 60;
    const auto psi = dark_state(p);
    EXPECT_LT((effective_hamiltonian(p) * psi.amplitudes()).norm(), 1e-8);
}

TEST(DarkEigenvalue, ComplexDrive) {
    SystemParams p;
    p.g = 0.2;
    p.E2 = Complex(0.3, 0.4);
    EXPECT_NEAR(std::abs(dark_state_eigenvalue(p) - Complex(-1.5, 2.0)), 0.0, 1e-15);
    SystemParams q = p;
    q.N_b = 60;
    const auto psi = dark_state(q);
    EXPECT_LT((effective_hamiltonian(q) * psi.amplitudes()).norm(), 1e-8);
}

TEST(Lindblad, VacuumIsFixedWithoutDrive) {
    SystemParams p;
    const auto vac = DensityMatrix::pure(fock_state(0, ModeDim(p.dim())));
    const auto rho = DensityMatrix::composite(vac.matrix(), p.N_a, p.N_b);
    EXPECT_EQ(max_abs(lindblad_rhs(rho, p)), 0.0);
}

TEST(Lindblad, DarkStateIsStationary) {
    for (double E0 : {-1.0, -5.0}) {
        SystemParams p;
        p.g = 0.1;
        p.E2 = -E0 * p.g;
        p.N_a = 3;
        p.N_b = 60;
        const auto rho = DensityMatrix::composite(dark_state(p).projector(), p.N_a, p.N_b);
        EXPECT_LT(max_abs(lindblad_rhs(rho, p)), 1e-8) << "E0 = " << E0;
    }
}

TEST(Lindblad, MatchesDenseReference) {
    int seed = 1;
    for (const auto& p : {small(), small(0.3, 0.0), small(0.2, 1.7)}) {
        const OperatorMatrix rho = random_density(p.dim(), seed++);
        const OperatorMatrix fast = lindblad_rhs(DensityMatrix::composite(rho, p.N_a, p.N_b), p);
        const OperatorMatrix ref = dense_lindblad(rho, p);
        EXPECT_LT(max_abs(fast - ref), 1e-13 * std::max(1.0, max_abs(ref)));
    }
}

TEST(Lindblad, Linear) {
    const auto p = small(0.1, 0.5);
    const OperatorMatrix r1 = random_density(p.dim(), 11), r2 = random_density(p.dim(), 12);
    const OperatorMatrix mix = 0.3 * r1 + 0.7 * r2;
    const OperatorMatrix lhs = lindblad_rhs(DensityMatrix::composite(mix, p.N_a, p.N_b), p);
    const OperatorMatrix rhs = 0.3 * lindblad_rhs(DensityMatrix::composite(r1, p.N_a, p.N_b), p) +
                               0.7 * lindblad_rhs(DensityMatrix::composite(r2, p.N_a, p.N_b), p);
    EXPECT_LT(max_abs(lhs - rhs), 1e-13);
}

TEST(Lindblad, TracelessAndHermitian) {
    const auto p = small(0.2, 1.0);
    for (unsigned s = 20; s < 25; ++s) {
        const OperatorMatrix out =
            lindblad_rhs(DensityMatrix::composite(random_density(p.dim(), s), p.N_a, p.N_b), p);
        EXPECT_LT(std::abs(out.trace()), 1e-10);
        EXPECT_LT(max_abs(out - out.adjoint()), 1e-12);
    }
}

TEST(Lindblad, ParityConservedWithoutDamping) {
    const auto p = small();
    const OperatorMatrix parity = mechanical_parity_op(p.N_a, p.N_b);
    for (unsigned s = 30; s < 35; ++s) {
        const OperatorMatrix out =
            lindblad_rhs(DensityMatrix::composite(random_density(p.dim(), s), p.N_a, p.N_b), p);
        EXPECT_LT(std::abs((parity * out).trace()), 1e-8);
    }
}

TEST(Lindblad, DimensionMismatch) {
    const auto p = small();
    const auto rho = DensityMatrix::composite(random_density(2 * p.N_b, 3), 2, p.N_b);
    EXPECT_THROW(lindblad_rhs(rho, p), DimensionMismatch);
    EXPECT_THROW(lindblad_rhs(DensityMatrix::pure(fock_state(0, ModeDim(p.N_b))), p), DimensionMismatch);
}

TEST(Reduced, LowStatesAreDark) {
    SystemParams p;
    p.N_b = 6;
    for (int n : {0, 1}) {
        EXPECT_EQ(max_abs(reduced_rhs(DensityMatrix::pure(fock_state(n, ModeDim(6))), p)), 0.0);
    }
}

TEST(Reduced, TwoPhononExample) {
    SystemParams p;
    p.g = 0.3;
    p.N_b = 6;
    const OperatorMatrix out = reduced_rhs(DensityMatrix::pure(fock_state(2, ModeDim(6))), p);
    OperatorMatrix expected = OperatorMatrix::Zero(6, 6);
    expected(0, 0) = 4.0 * p.gamma2();
    expected(2, 2) = -4.0 * p.gamma2();
    EXPECT_LT(max_abs(out - expected), 1e-15);
}

TEST(Reduced, MatchesDenseAndKeepsParity) {
    SystemParams p;
    p.g = 0.2;
    p.N_b = 9;
    const OperatorMatrix parity = parity_op(ModeDim(9));
    for (unsigned s = 40; s < 45; ++s) {
        const OperatorMatrix rho = random_density(9, s);
        const OperatorMatrix out = reduced_rhs(DensityMatrix::single_mode(rho), p);
        EXPECT_LT(max_abs(out - dense_reduced(rho, p)), 1e-14);
        EXPECT_LT(std::abs((parity * out).trace()), 1e-14);
        EXPECT_LT(std::abs(out.trace()), 1e-14);
        EXPECT_LT(max_abs(out - out.adjoint()), 1e-14);
    }
}

TEST(Reduced, DimensionMismatch) {
    SystemParams p;
    EXPECT_THROW(reduced_rhs(DensityMatrix::pure(fock_state(0, ModeDim(5))), p), DimensionMismatch);
}

TEST(Stiffness, Terms) {
    SystemParams p;
    p.g = 0.1;
    p.N_b = 40;
    p.E2 = 0.5;
    EXPECT_DOUBLE_EQ(stiffness(p), 4.0);
    p.gamma_m = 0.01;
    p.n_th = 20;
    EXPECT_DOUBLE_EQ(stiffness(p), 8.4);
    EXPECT_DOUBLE_EQ(stiffness(p, ModelKind::reduced), 16.0);
}
