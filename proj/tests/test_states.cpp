#include <gtest/gtest.h>

#include <limits>

#include "oracles.hpp"
#include "qfid/measures.hpp"
#include "qfid/states.hpp"

using namespace qfid;

TEST(DensityMatrix, AcceptsValidStates) {
    EXPECT_NO_THROW(DensityMatrix::from_matrix(ComplexMatrix::identity(4) * cplx(0.25)));
    EXPECT_NO_THROW(bell_phi_plus());
    EXPECT_EQ(maximally_mixed(2).dim(), 2u);
}

TEST(DensityMatrix, RejectsInvalidInput) {
    EXPECT_THROW(DensityMatrix::from_matrix(ComplexMatrix(2, 4)), ValidationError);
    EXPECT_THROW(DensityMatrix::from_matrix(ComplexMatrix::identity(3) * cplx(1.0 / 3.0)), ValidationError);
    EXPECT_THROW(DensityMatrix::from_matrix(ComplexMatrix::identity(1)), ValidationError);

    auto nan = ComplexMatrix::identity(2) * cplx(0.5);
    nan(0, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(DensityMatrix::from_matrix(nan), ValidationError);

    ComplexMatrix non_hermitian{{0.5, 0.1}, {0.0, 0.5}};
    EXPECT_THROW(DensityMatrix::from_matrix(non_hermitian), ValidationError);

    EXPECT_THROW(DensityMatrix::from_matrix(ComplexMatrix::identity(2)), ValidationError);

    ComplexMatrix negative{{1.2, 0.0}, {0.0, -0.2}};
    EXPECT_THROW(DensityMatrix::from_matrix(negative), ValidationError);
}

TEST(DensityMatrix, ToleranceEdges) {
    ComplexMatrix near{{0.5 + 5e-9, 0.0}, {0.0, 0.5}};
    EXPECT_NO_THROW(DensityMatrix::from_matrix(near));
    ComplexMatrix far{{0.5 + 5e-8, 0.0}, {0.0, 0.5}};
    EXPECT_THROW(DensityMatrix::from_matrix(far), ValidationError);
}

TEST(Bloch, QubitBasisStates) {
    const auto zero = pure_state({1.0, 0.0});
    const auto r = to_bloch(zero);
    EXPECT_NEAR(r(0), 1.0, 1e-15);
    EXPECT_NEAR(r(1), 0.0, 1e-15);
    EXPECT_NEAR(r(2), 0.0, 1e-15);
    EXPECT_NEAR(r(3), 1.0, 1e-15);
}

TEST(Bloch, SingletCorrelations) {
    const auto r = to_bloch(bell_psi_minus());
    EXPECT_NEAR(r(0, 0), 1.0, 1e-14);
    for (int m = 1; m < 4; ++m) EXPECT_NEAR(r(m, m), -1.0, 1e-14);
    EXPECT_NEAR(r(1, 2), 0.0, 1e-14);
}

TEST(Bloch, RoundTrip) {
    RandomStream rng(11, 0);
    for (std::size_t dim : {2u, 4u}) {
        for (int i = 0; i < 20; ++i) {
            const auto rho = random_mixed(dim, rng);
            const auto back = from_bloch(to_bloch(rho));
            EXPECT_LT(max_abs_diff(back.matrix(), rho.matrix()), 1e-14);
        }
    }
}

TEST(Bloch, RejectsUnphysicalVector) {
    BlochCorrelation r{1, {1.0, 0.0, 0.0, 1.5}};
    EXPECT_THROW(from_bloch(r), ValidationError);
    BlochCorrelation wrong{2, {1.0, 0.0}};
    EXPECT_THROW(from_bloch(wrong), ValidationError);
}

TEST(RandomStates, MixedStatesAreValid) {
    RandomStream rng(12, 0);
    for (int i = 0; i < 200; ++i) {
        const auto rho = random_mixed(4, rng);
        EXPECT_NO_THROW(DensityMatrix::from_matrix(rho.matrix()));
    }
}

TEST(RandomStates, PureStatesHaveUnitPurity) {
    RandomStream rng(13, 0);
    for (int i = 0; i < 50; ++i) EXPECT_NEAR(purity(random_pure(4, rng)), 1.0, 1e-13);
}

TEST(RandomStates, HilbertSchmidtMeanPurity) {
    // E[Tr rho^2] = 2d / (d^2 + 1) for the square Ginibre ensemble.
    RandomStream rng(14, 0);
    double sum = 0.0;
    constexpr int n = 20000;
    for (int i = 0; i < n; ++i) sum += oracle::purity(oracle::to_eigen(random_mixed(4, rng)));
    EXPECT_NEAR(sum / n, 8.0 / 17.0, 0.003);
}

TEST(RandomStates, DeterministicPerStream) {
    const RandomEnsemble ens{4, StateMeasure::hilbert_schmidt, 99};
    auto a = ens.stream(3);
    auto b = ens.stream(3);
    auto c = ens.stream(4);
    const auto ra = ens.draw(a);
    EXPECT_EQ(ra, ens.draw(b));
    EXPECT_NE(ra, ens.draw(c));
}

TEST(RandomStates, ParseMeasure) {
    EXPECT_EQ(parse_measure("hilbert-schmidt"), StateMeasure::hilbert_schmidt);
    EXPECT_EQ(parse_measure("haar-pure"), StateMeasure::haar_pure);
    EXPECT_THROW(parse_measure("bures"), ValidationError);
}

TEST(Rearrangement, GroupsCopiesByQubit) {
    RandomStream rng(15, 0);
    const auto rho1 = random_mixed(4, rng);
    const auto rho2 = random_mixed(4, rng);
    const auto r = rearrange_pair(rho1, rho2);
    // A1 A2 B1 B2: tracing the B qubits leaves the A marginals of both copies.
    const auto a1 = partial_trace(rho1.matrix(), {0}, {2, 2});
    const auto a2 = partial_trace(rho2.matrix(), {0}, {2, 2});
    EXPECT_LT(max_abs_diff(partial_trace(r, {0, 1}, {2, 2, 2, 2}), kron(a1, a2)), 1e-14);
    const auto b1 = partial_trace(rho1.matrix(), {1}, {2, 2});
    const auto b2 = partial_trace(rho2.matrix(), {1}, {2, 2});
    EXPECT_LT(max_abs_diff(partial_trace(r, {2, 3}, {2, 2, 2, 2}), kron(b1, b2)), 1e-14);
}

TEST(Rearrangement, RejectsQubits) {
    EXPECT_THROW(rearrange_pair(maximally_mixed(2), maximally_mixed(2)), ValidationError);
}
