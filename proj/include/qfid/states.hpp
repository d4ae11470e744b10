// states.hpp
// Validated density matrices, Bloch/correlation-matrix conversion,
// random-state ensembles and the two-copy mode rearrangement.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qfid/errors.hpp"
#include "qfid/linalg.hpp"
#include "qfid/random.hpp"

namespace qfid {

inline constexpr double kStateHermitianTol = 1e-10;
inline constexpr double kStateTraceTol = 1e-8;
inline constexpr double kStateNegativityTol = 1e-8;

class DensityMatrix {
public:
    // Validates a raw matrix; never renormalizes.
    static DensityMatrix from_matrix(ComplexMatrix raw) {
        if (!raw.is_square()) throw ValidationError("density matrix must be square");
        if (!is_power_of_two(raw.rows()) || raw.rows() < 2) {
            throw ValidationError("density matrix dimension must be a power of two >= 2, got " +
                                  std::to_string(raw.rows()));
        }
        for (const auto& z : raw.data())
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw ValidationError("density matrix has non-finite entries");
        const std::size_t d = raw.rows();
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = r; c < d; ++c)
                if (std::abs(raw(r, c) - std::conj(raw(c, r))) > kStateHermitianTol)
                    throw ValidationError("density matrix is not Hermitian (tolerance 1e-10)");
        const cplx tr = raw.trace();
        if (std::abs(tr - 1.0) > kStateTraceTol) {
            throw ValidationError("density matrix trace is " + std::to_string(tr.real()) +
                                  ", expected 1 (tolerance 1e-8)");
        }
        const auto eig = hermitian_eig(raw);
        if (eig.eigenvalues.front() < -kStateNegativityTol) {
            throw ValidationError("density matrix has negative eigenvalue " +
                                  std::to_string(eig.eigenvalues.front()) + " (tolerance 1e-8)");
        }
        return DensityMatrix(std::move(raw));
    }

    // For matrices that are PSD with unit trace by construction.
    static DensityMatrix from_trusted(ComplexMatrix m) { return DensityMatrix(std::move(m)); }

    std::size_t dim() const noexcept { return m_.rows(); }
    std::size_t qubits() const { return qubit_count(m_.rows()); }
    const ComplexMatrix& matrix() const noexcept { return m_; }

    friend bool operator==(const DensityMatrix&, const DensityMatrix&) = default;

private:
    explicit DensityMatrix(ComplexMatrix m) : m_(std::move(m)) {}
    ComplexMatrix m_;
};

// Pure state |psi><psi| from a (not necessarily normalized) vector.
inline DensityMatrix pure_state(std::span<const cplx> amplitudes) {
    double norm2 = 0.0;
    for (const auto& a : amplitudes) norm2 += std::norm(a);
    if (norm2 == 0.0) throw ValidationError("pure_state: zero vector");
    const std::size_t d = amplitudes.size();
    ComplexMatrix m(d, d);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) m(r, c) = amplitudes[r] * std::conj(amplitudes[c]) / norm2;
    return DensityMatrix::from_matrix(std::move(m));
}

inline DensityMatrix pure_state(std::initializer_list<cplx> amplitudes) {
    return pure_state(std::span(amplitudes.begin(), amplitudes.size()));
}

inline DensityMatrix maximally_mixed(std::size_t dim) {
    return DensityMatrix::from_matrix(ComplexMatrix::identity(dim) * cplx(1.0 / static_cast<double>(dim)));
}

// Bell states on two qubits.
inline DensityMatrix bell_phi_plus() {
    const double h = 1.0 / std::sqrt(2.0);
    return pure_state({h, 0.0, 0.0, h});
}
inline DensityMatrix bell_psi_minus() {
    const double h = 1.0 / std::sqrt(2.0);
    return pure_state({0.0, h, -h, 0.0});
}

// ---------------------------------------------------------------------------
// Bloch / correlation representation

// R_m = Tr(rho sigma_m) for a qubit, R_mn = Tr(rho sigma_m (x) sigma_n) for
// two qubits; values are stored row-major (index 4 m + n).
struct BlochCorrelation {
    std::size_t qubits = 0;
    std::vector<double> values;

    double operator()(std::size_t m) const { return values.at(m); }
    double operator()(std::size_t m, std::size_t n) const { return values.at(4 * m + n); }
};

namespace detail {

inline ComplexMatrix pauli_string(std::size_t index, std::size_t qubits) {
    ComplexMatrix out = ComplexMatrix::identity(1);
    for (std::size_t q = 0; q < qubits; ++q) {
        const std::size_t shift = 2 * (qubits - 1 - q);
        out = kron(out, pauli(static_cast<int>((index >> shift) & 3U)));
    }
    return out;
}

}  // namespace detail

inline BlochCorrelation to_bloch(const DensityMatrix& rho) {
    const std::size_t n = rho.qubits();
    if (n != 1 && n != 2) throw ValidationError("to_bloch supports one- and two-qubit states");
    BlochCorrelation out{n, std::vector<double>(std::size_t{1} << (2 * n))};
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = trace_of_product(detail::pauli_string(i, n), rho.matrix()).real();
    return out;
}

// rho = 2^-n sum R_i sigma_i; validated like from_matrix.
inline DensityMatrix from_bloch(const BlochCorrelation& r) {
    if ((r.qubits != 1 && r.qubits != 2) || r.values.size() != (std::size_t{1} << (2 * r.qubits))) {
        throw ValidationError("from_bloch: expected 4 or 16 coefficients");
    }
    const std::size_t d = std::size_t{1} << r.qubits;
    ComplexMatrix m(d, d);
    for (std::size_t i = 0; i < r.values.size(); ++i)
        if (r.values[i] != 0.0) m += detail::pauli_string(i, r.qubits) * cplx(r.values[i] / static_cast<double>(d));
    return DensityMatrix::from_matrix(std::move(m));
}

// ---------------------------------------------------------------------------
// Random states

enum class StateMeasure { haar_pure, hilbert_schmidt };

inline std::string_view to_string(StateMeasure m) {
    return m == StateMeasure::haar_pure ? "haar-pure" : "hilbert-schmidt";
}

inline StateMeasure parse_measure(std::string_view s) {
    if (s == "haar-pure" || s == "pure") return StateMeasure::haar_pure;
    if (s == "hilbert-schmidt" || s == "hs" || s == "hilbert-schmidt-mixed") return StateMeasure::hilbert_schmidt;
    throw ValidationError("unknown state measure '" + std::string(s) + "'");
}

// Haar-random pure state from a normalized complex Gaussian vector.
inline DensityMatrix random_pure(std::size_t dim, RandomStream& rng) {
    std::vector<cplx> psi(dim);
    double norm2 = 0.0;
    for (auto& a : psi) {
        a = rng.complex_normal();
        norm2 += std::norm(a);
    }
    ComplexMatrix m(dim, dim);
    for (std::size_t r = 0; r < dim; ++r) {
        m(r, r) = std::norm(psi[r]) / norm2;
        for (std::size_t c = r + 1; c < dim; ++c) {
            m(r, c) = psi[r] * std::conj(psi[c]) / norm2;
            m(c, r) = std::conj(m(r, c));
        }
    }
    return DensityMatrix::from_trusted(std::move(m));
}

// Hilbert-Schmidt random mixed state: G G^dagger / Tr(G G^dagger), G square Ginibre.
inline DensityMatrix random_mixed(std::size_t dim, RandomStream& rng) {
    std::vector<cplx> g(dim * dim);
    for (auto& z : g) z = rng.complex_normal();
    ComplexMatrix m(dim, dim);
    double tr = 0.0;
    for (std::size_t r = 0; r < dim; ++r) {
        for (std::size_t c = r; c < dim; ++c) {
            cplx s = 0.0;
            for (std::size_t k = 0; k < dim; ++k) s += g[r * dim + k] * std::conj(g[c * dim + k]);
            m(r, c) = s;
        }
        m(r, r) = m(r, r).real();
        tr += m(r, r).real();
    }
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = r; c < dim; ++c) {
            m(r, c) /= tr;
            m(c, r) = std::conj(m(r, c));
        }
    return DensityMatrix::from_trusted(std::move(m));
}

inline DensityMatrix random_state(std::size_t dim, StateMeasure measure, RandomStream& rng) {
    return measure == StateMeasure::haar_pure ? random_pure(dim, rng) : random_mixed(dim, rng);
}

// A reproducible source of random states: stream i of (seed) always yields
// the same sequence.
struct RandomEnsemble {
    std::size_t dim = 4;
    StateMeasure measure = StateMeasure::hilbert_schmidt;
    std::uint64_t seed = 0;

    RandomStream stream(std::uint64_t index) const { return RandomStream(seed, index); }
    DensityMatrix draw(RandomStream& rng) const { return random_state(dim, measure, rng); }
};

// ---------------------------------------------------------------------------
// Two-copy rearrangement

// (rho1 (x) rho2)' = S_{A2B1} (rho1 (x) rho2) S_{A2B1}.
// Input order A1 B1 A2 B2 becomes A1 A2 B1 B2, so V_{A1A2} (x) V_{B1B2}
// acts on qubit pairs (0,1) and (2,3).
inline ComplexMatrix rearrange_pair(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    if (rho1.dim() != 4 || rho2.dim() != 4) throw ValidationError("rearrange_pair expects two-qubit states");
    return permute_qubits(kron(rho1.matrix(), rho2.matrix()), {0, 2, 1, 3});
}

}  // namespace qfid
