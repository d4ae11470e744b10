// measures.hpp
// Scalar functionals of one or two states: purity, overlaps, Uhlmann-Jozsa
// fidelity, sub/superfidelity, the generalized power mean and the Bures
// distance.

#pragma once

#include <cmath>
#include <limits>
#include <optional>

#include "qfid/errors.hpp"
#include "qfid/linalg.hpp"
#include "qfid/states.hpp"

namespace qfid {

namespace detail {

inline void require_same_dim(const DensityMatrix& a, const DensityMatrix& b, const char* what) {
    if (a.dim() != b.dim()) throw ValidationError(std::string(what) + ": states have different dimensions");
}

}  // namespace detail

// Tr(rho^2)
inline double purity(const DensityMatrix& rho) {
    return trace_of_product(rho.matrix(), rho.matrix()).real();
}

inline double linear_entropy(const DensityMatrix& rho) { return 1.0 - purity(rho); }

// O = Tr(rho1 rho2)
inline double overlap1(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    detail::require_same_dim(rho1, rho2, "overlap1");
    return trace_of_product(rho1.matrix(), rho2.matrix()).real();
}

// O = 2^-n sum_i R1_i R2_i, the same overlap from the Pauli coefficients.
inline double overlap1_bloch(const BlochCorrelation& r1, const BlochCorrelation& r2) {
    if (r1.qubits != r2.qubits) throw ValidationError("overlap1_bloch: qubit counts differ");
    double s = 0.0;
    for (std::size_t i = 0; i < r1.values.size(); ++i) s += r1.values[i] * r2.values[i];
    return s / static_cast<double>(std::size_t{1} << r1.qubits);
}

// O' = Tr(rho1 rho2 rho1 rho2)
inline double overlap2(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    detail::require_same_dim(rho1, rho2, "overlap2");
    const ComplexMatrix p = rho1.matrix() * rho2.matrix();
    return trace_of_product(p, p).real();
}

// Eigenvalues below this fraction of the largest one are round-off and are
// dropped before square roots; otherwise a pure input would contribute
// sqrt(1e-17) ~ 3e-9 per null direction.
inline constexpr double kSpectralCut = 16.0 * std::numeric_limits<double>::epsilon();

namespace detail {

inline double spectral_root(double l, double lmax) { return l > kSpectralCut * lmax ? std::sqrt(l) : 0.0; }

}  // namespace detail

// Uhlmann-Jozsa fidelity [Tr sqrt(sqrt(rho1) rho2 sqrt(rho1))]^2.
inline double fidelity(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    detail::require_same_dim(rho1, rho2, "fidelity");
    const auto e1 = hermitian_eig(rho1.matrix());
    const double max1 = e1.eigenvalues.back();
    const ComplexMatrix s = apply_spectral(e1, [&](double l) { return detail::spectral_root(l, max1); });
    const ComplexMatrix inner = (s * rho2.matrix() * s).hermitian_part();
    const auto eig = hermitian_eig(inner);
    const double max2 = eig.eigenvalues.back();
    double root = 0.0;
    for (double l : eig.eigenvalues) root += detail::spectral_root(l, max2);
    return root * root;
}

inline double root_fidelity(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    return std::sqrt(fidelity(rho1, rho2));
}

// Closed form for qubits: O + sqrt((1 - chi1)(1 - chi2)).
inline double fidelity_qubit(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    if (rho1.dim() != 2 || rho2.dim() != 2) throw ValidationError("fidelity_qubit expects single-qubit states");
    const double s = std::max(0.0, (1.0 - purity(rho1)) * (1.0 - purity(rho2)));
    return overlap1(rho1, rho2) + std::sqrt(s);
}

inline constexpr double kRadicandClamp = 1e-12;

// E from the two overlaps: O + sqrt(2 (O^2 - O')).
inline double subfidelity_from_overlaps(double o, double o2) {
    double radicand = 2.0 * (o * o - o2);
    if (radicand < 0.0) {
        if (radicand < -kRadicandClamp) {
            throw NumericalError("subfidelity: radicand " + std::to_string(radicand) + " is below -1e-12");
        }
        radicand = 0.0;
    }
    return o + std::sqrt(radicand);
}

// G from the overlap and the two purities: O + sqrt((1 - chi1)(1 - chi2)).
inline double superfidelity_from_overlaps(double o, double chi1, double chi2) {
    return o + std::sqrt(std::max(0.0, (1.0 - chi1) * (1.0 - chi2)));
}

inline double subfidelity(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    return subfidelity_from_overlaps(overlap1(rho1, rho2), overlap2(rho1, rho2));
}

inline double superfidelity(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    return superfidelity_from_overlaps(overlap1(rho1, rho2), purity(rho1), purity(rho2));
}

inline double bures_distance_from_fidelity(double f) {
    return std::sqrt(std::max(0.0, 2.0 * (1.0 - std::sqrt(std::clamp(f, 0.0, 1.0)))));
}

inline double bures_distance(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    return bures_distance_from_fidelity(fidelity(rho1, rho2));
}

// ---------------------------------------------------------------------------
// Generalized power mean of (E, G)

inline constexpr double kInfiniteExponent = 1e6;

// [w E^m + (1 - w) G^m]^(1/m), evaluated in the log domain. m = 0 gives the
// weighted geometric mean, |m| > 1e6 the limits (min / max over the entries
// with nonzero weight). The result is clamped into [min(E,G), max(E,G)].
inline double generalized_mean(double e, double g, double m, double w) {
    if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("generalized_mean: weight must lie in [0, 1]");
    if (!(e >= 0.0) || !(g >= 0.0) || std::isnan(m)) {
        throw ValidationError("generalized_mean: E and G must be non-negative");
    }
    const double lo = std::min(e, g), hi = std::max(e, g);
    auto clamp = [&](double x) { return std::clamp(x, lo, hi); };
    if (w == 1.0) return e;
    if (w == 0.0) return g;
    if (m > kInfiniteExponent) return hi;
    if (m < -kInfiniteExponent) return lo;
    if (e == 0.0 || g == 0.0) {
        // a zero entry with positive weight
        if (m <= 0.0) return 0.0;
        const double other = e == 0.0 ? g : e;
        const double other_w = e == 0.0 ? 1.0 - w : w;
        return clamp(std::exp(std::log(other) + std::log(other_w) / m));
    }
    const double le = std::log(e), lg = std::log(g);
    if (m == 0.0) return clamp(std::exp(w * le + (1.0 - w) * lg));
    const double d = le - lg;
    double log_mean;
    if (m * d <= 0.0) {
        log_mean = lg + std::log1p(w * std::expm1(m * d)) / m;
    } else {
        log_mean = le + std::log1p((1.0 - w) * std::expm1(-m * d)) / m;
    }
    return clamp(std::exp(log_mean));
}

// Power-mean parameters plus the RMS error they achieved on some dataset.
struct MeanParams {
    double m = 1.0;
    double w = 0.5;
    double delta = 0.0;
};

// Least-squares optimum over random two-qubit pairs as published
// (m = -2.13, w = 0.568, Delta = 0.0278); used as the default estimator.
inline constexpr MeanParams kPublishedMeanParams{-2.13, 0.568, 0.0278};

// ---------------------------------------------------------------------------
// One-pass report

struct FidelityReport {
    std::size_t dim = 0;
    double overlap = 0.0;         // O
    double overlap2 = 0.0;        // O'
    double purity1 = 0.0;         // chi1
    double purity2 = 0.0;         // chi2
    double linear_entropy1 = 0.0;
    double linear_entropy2 = 0.0;
    double subfidelity = 0.0;     // E
    double superfidelity = 0.0;   // G
    double fidelity = 0.0;        // F
    double mean_estimate = 0.0;   // F-bar
    MeanParams mean_params{};
    double bures = 0.0;
    std::optional<double> fidelity_qubit;  // closed form, qubit inputs only
};

inline FidelityReport make_report(const DensityMatrix& rho1, const DensityMatrix& rho2,
                                  MeanParams params = kPublishedMeanParams) {
    detail::require_same_dim(rho1, rho2, "report");
    FidelityReport r;
    r.dim = rho1.dim();
    const ComplexMatrix p = rho1.matrix() * rho2.matrix();
    r.overlap = p.trace().real();
    r.overlap2 = trace_of_product(p, p).real();
    r.purity1 = purity(rho1);
    r.purity2 = purity(rho2);
    r.linear_entropy1 = 1.0 - r.purity1;
    r.linear_entropy2 = 1.0 - r.purity2;
    r.subfidelity = subfidelity_from_overlaps(r.overlap, r.overlap2);
    r.superfidelity = superfidelity_from_overlaps(r.overlap, r.purity1, r.purity2);
    r.fidelity = fidelity(rho1, rho2);
    r.mean_params = params;
    r.mean_estimate = generalized_mean(r.subfidelity, r.superfidelity, params.m, params.w);
    r.bures = bures_distance_from_fidelity(r.fidelity);
    if (r.dim == 2) r.fidelity_qubit = r.overlap + std::sqrt(std::max(0.0, r.linear_entropy1 * r.linear_entropy2));
    return r;
}

}  // namespace qfid
