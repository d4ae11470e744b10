// secondorder.hpp
// Second-order overlap O' = Tr(rho1 rho2 rho1 rho2): the four-Pauli trace
// kernel, the permutation operator H, the eight-qubit operator form and a
// click-level estimator built from four V blocks plus an inner V stage.
//
// Eight-qubit register order is A1 B1 A2 B2 A3 B3 A4 B4 (qubits 0..7), with
// input rho1 (x) rho1 (x) rho2 (x) rho2, i.e. copies (A1B1), (A2B2) carry
// rho1 and (A3B3), (A4B4) carry rho2. Qubit inputs use A1 A2 A3 A4.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "qfid/errors.hpp"
#include "qfid/linalg.hpp"
#include "qfid/measures.hpp"
#include "qfid/protocol.hpp"
#include "qfid/states.hpp"

namespace qfid {

// ---------------------------------------------------------------------------
// Kernel K_mnkl = Tr(s_m s_n s_k s_l)

namespace detail {

inline constexpr int kd(int a, int b) { return a == b ? 1 : 0; }

// Levi-Civita symbol on indices 1..3; zero if any index is 0.
inline constexpr int levi_civita(int a, int b, int c) {
    if (a == 0 || b == 0 || c == 0) return 0;
    return (a - b) * (b - c) * (c - a) / 2;
}

inline void require_pauli_index(int i) {
    if (i < 0 || i > 3) throw ValidationError("Pauli index must lie in 0..3");
}

}  // namespace detail

// Closed form of the kernel.
inline cplx kernel(int m, int n, int k, int l) {
    using detail::kd;
    using detail::levi_civita;
    for (int i : {m, n, k, l}) detail::require_pauli_index(i);
    const double re = kd(m, n) * kd(k, l) + kd(n, k) * kd(m, l) - kd(m, k) * kd(n, l) +
                      2 * kd(m, 0) * kd(n, l) * kd(m, k) + 2 * kd(l, 0) * kd(n, l) * kd(m, k) -
                      4 * kd(m, 0) * kd(n, 0) * kd(k, 0) * kd(l, 0);
    const double im = kd(m, 0) * levi_civita(n, k, l) + kd(n, 0) * levi_civita(k, l, m) +
                      kd(k, 0) * levi_civita(l, m, n) + kd(l, 0) * levi_civita(m, n, k);
    return 2.0 * cplx(re, im);
}

// Trace of the 2x2 product.
inline cplx kernel_direct(int m, int n, int k, int l) {
    return (pauli(m) * pauli(n) * pauli(k) * pauli(l)).trace();
}

class PauliKernel {
public:
    PauliKernel() {
        for (int m = 0; m < 4; ++m)
            for (int n = 0; n < 4; ++n)
                for (int k = 0; k < 4; ++k)
                    for (int l = 0; l < 4; ++l) {
                        const cplx v = kernel(m, n, k, l);
                        values_[index(m, n, k, l)] = v;
                        if (v != cplx{}) nonzero_.push_back({m, n, k, l});
                    }
    }

    cplx operator()(int m, int n, int k, int l) const { return values_[index(m, n, k, l)]; }
    const std::vector<std::array<int, 4>>& nonzero() const noexcept { return nonzero_; }

    static const PauliKernel& instance() {
        static const PauliKernel k;
        return k;
    }

private:
    static std::size_t index(int m, int n, int k, int l) {
        return static_cast<std::size_t>(((m * 4 + n) * 4 + k) * 4 + l);
    }
    std::array<cplx, 256> values_{};
    std::vector<std::array<int, 4>> nonzero_;
};

// ---------------------------------------------------------------------------
// Operators

// H = (1/16) sum K_mnkl s_m (x) s_n (x) s_k (x) s_l, a 16x16 permutation matrix.
inline const ComplexMatrix& h_operator() {
    static const ComplexMatrix h = [] {
        const auto& kern = PauliKernel::instance();
        ComplexMatrix out(16, 16);
        for (const auto& t : kern.nonzero()) {
            out += kron_all({pauli(t[0]), pauli(t[1]), pauli(t[2]), pauli(t[3])}) *
                   (kern(t[0], t[1], t[2], t[3]) / 16.0);
        }
        return out;
    }();
    return h;
}

// (S34 S23) H (S23 S34), qubits numbered 1..4.
inline ComplexMatrix h_swap_conjugated() {
    const ComplexMatrix s23 = swap_operator(1, 2, 4);
    const ComplexMatrix s34 = swap_operator(2, 3, 4);
    return s34 * s23 * h_operator() * s23 * s34;
}

// (1/8) S23 (V12 (x) V34) S23 V34.
inline ComplexMatrix h_swap_decomposition() {
    const ComplexMatrix s23 = swap_operator(1, 2, 4);
    const ComplexMatrix v = v_operator();
    const ComplexMatrix v34 = kron(ComplexMatrix::identity(4), v);
    return (s23 * kron(v, v) * s23 * v34) * cplx(1.0 / 8.0);
}

inline bool is_permutation_matrix(const ComplexMatrix& m, double tol = 1e-14) {
    if (!m.is_square()) return false;
    const std::size_t n = m.rows();
    std::vector<int> col_count(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
        int ones = 0;
        for (std::size_t c = 0; c < n; ++c) {
            const cplx z = m(r, c);
            if (std::abs(z - 1.0) <= tol) {
                ++ones;
                ++col_count[c];
            } else if (std::abs(z) > tol) {
                return false;
            }
        }
        if (ones != 1) return false;
    }
    for (int c : col_count)
        if (c != 1) return false;
    return true;
}

namespace detail {

inline void require_overlap2_inputs(const DensityMatrix& rho1, const DensityMatrix& rho2, const char* what) {
    if (rho1.dim() != rho2.dim()) throw ValidationError(std::string(what) + ": states have different dimensions");
    if (rho1.dim() != 2 && rho1.dim() != 4) throw ValidationError(std::string(what) + ": expected qubit or two-qubit states");
}

// V-block pairs and inner V targets of the eight-qubit (or four-qubit) layout.
struct SecondOrderLayout {
    std::size_t qubits;
    std::vector<std::array<std::size_t, 2>> blocks;  // V blocks
    std::vector<std::array<std::size_t, 2>> inner;   // I (x) V factors, one per side
    std::vector<std::size_t> block_order;            // permutation putting block b on qubits (2b, 2b+1)
    double normalization;                            // O' = Tr[...] * normalization
};

inline SecondOrderLayout layout_for(std::size_t dim) {
    if (dim == 4) {
        return {8, {{0, 4}, {2, 6}, {1, 5}, {3, 7}}, {{4, 6}, {5, 7}}, {0, 4, 2, 6, 1, 5, 3, 7}, 1.0 / 64.0};
    }
    return {4, {{0, 2}, {1, 3}}, {{2, 3}}, {0, 2, 1, 3}, 1.0 / 8.0};
}

inline ComplexMatrix product_of_v(const std::vector<std::array<std::size_t, 2>>& pairs, std::size_t n) {
    ComplexMatrix out = ComplexMatrix::identity(std::size_t{1} << n);
    for (const auto& p : pairs) out = out * embed(v_operator(), {p[0], p[1]}, n);
    return out;
}

// (V (x) V)' : the outer V blocks, and (I (x) V): the inner factors.
struct Eq32Factors {
    ComplexMatrix outer;
    ComplexMatrix inner;
};

inline const Eq32Factors& eq32_factors(std::size_t dim) {
    static const Eq32Factors two_qubit = [] {
        const auto l = layout_for(4);
        return Eq32Factors{product_of_v(l.blocks, l.qubits), product_of_v(l.inner, l.qubits)};
    }();
    static const Eq32Factors qubit = [] {
        const auto l = layout_for(2);
        return Eq32Factors{product_of_v(l.blocks, l.qubits), product_of_v(l.inner, l.qubits)};
    }();
    return dim == 4 ? two_qubit : qubit;
}

inline ComplexMatrix doubled_input(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    return kron_all({rho1.matrix(), rho1.matrix(), rho2.matrix(), rho2.matrix()});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Three routes to O'

// Pauli-kernel contraction of the Bloch/correlation coefficients.
inline double overlap2_via_kernel(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    detail::require_overlap2_inputs(rho1, rho2, "overlap2_via_kernel");
    const auto& kern = PauliKernel::instance();
    const auto r1 = to_bloch(rho1);
    const auto r2 = to_bloch(rho2);
    const auto& nz = kern.nonzero();
    if (rho1.dim() == 2) {
        cplx s = 0.0;
        for (const auto& t : nz) s += kern(t[0], t[1], t[2], t[3]) * r1(t[0]) * r2(t[1]) * r1(t[2]) * r2(t[3]);
        return s.real() / 16.0;
    }
    cplx s = 0.0;
    for (const auto& x : nz) {
        const cplx kx = kern(x[0], x[1], x[2], x[3]);
        for (const auto& y : nz) {
            const double coeff = r1(x[0], y[0]) * r2(x[1], y[1]) * r1(x[2], y[2]) * r2(x[3], y[3]);
            if (coeff != 0.0) s += kx * kern(y[0], y[1], y[2], y[3]) * coeff;
        }
    }
    return s.real() / 256.0;
}

// Tr[(H (x) H) (rho1 (x) rho2 (x) rho1 (x) rho2)] with the input regrouped
// from A1 B1 A2 B2 A3 B3 A4 B4 to A1 A2 A3 A4 B1 B2 B3 B4.
inline double overlap2_via_h(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    if (rho1.dim() != 4 || rho2.dim() != 4) throw ValidationError("overlap2_via_h expects two-qubit states");
    const ComplexMatrix input = kron_all({rho1.matrix(), rho2.matrix(), rho1.matrix(), rho2.matrix()});
    const ComplexMatrix regrouped = permute_qubits(input, {0, 2, 4, 6, 1, 3, 5, 7});
    static const ComplexMatrix hh = kron(h_operator(), h_operator());
    return trace_of_product(hh, regrouped).real();
}

// Both orderings of the factorized operator form:
// first = Tr[(V(x)V)' (I(x)V) rho'] / 64, second = Tr[(I(x)V) (V(x)V)' rho'] / 64
// (1/8 for qubits), rho' = rho1 (x) rho1 (x) rho2 (x) rho2.
struct Eq32Traces {
    double first = 0.0;
    double second = 0.0;
};

inline Eq32Traces overlap2_orderings(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    detail::require_overlap2_inputs(rho1, rho2, "overlap2_via_operator");
    const auto layout = detail::layout_for(rho1.dim());
    const auto& f = detail::eq32_factors(rho1.dim());
    static const ComplexMatrix outer_inner_4 = detail::eq32_factors(4).outer * detail::eq32_factors(4).inner;
    static const ComplexMatrix inner_outer_4 = detail::eq32_factors(4).inner * detail::eq32_factors(4).outer;
    const ComplexMatrix input = detail::doubled_input(rho1, rho2);
    if (rho1.dim() == 4) {
        return {trace_of_product(outer_inner_4, input).real() * layout.normalization,
                trace_of_product(inner_outer_4, input).real() * layout.normalization};
    }
    return {trace_of_product(f.outer * f.inner, input).real() * layout.normalization,
            trace_of_product(f.inner * f.outer, input).real() * layout.normalization};
}

inline double overlap2_via_operator(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    return overlap2_orderings(rho1, rho2).first;
}

inline constexpr double kCommutationTol = 1e-12;

// The two factors of the operator form give the same expectation on the
// doubled input.
inline bool commutation_check(const DensityMatrix& rho1, const DensityMatrix& rho2, double tol = kCommutationTol) {
    const auto t = overlap2_orderings(rho1, rho2);
    return std::abs(t.first - t.second) <= tol;
}

// ---------------------------------------------------------------------------
// Sampled estimator

// How the inner I (x) V = 2 I - 4 P- stage enters a round.
//   split      - unbiased: each filtered combination Q is realized as one of
//                {no filter, pass Q, pass 1 - Q} with weights (3/2) w (+1, +1, -1);
//   sequential - filter Q applied before the V blocks with weight w; biased
//                whenever the outer and inner factors fail to commute on the
//                filtered state.
enum class InnerStage { split, sequential };

inline std::string_view to_string(InnerStage s) { return s == InnerStage::split ? "split" : "sequential"; }

inline InnerStage parse_inner_stage(std::string_view s) {
    if (s == "split") return InnerStage::split;
    if (s == "sequential") return InnerStage::sequential;
    throw ValidationError("unknown inner stage '" + std::string(s) + "'");
}

struct SecondOrderConfig {
    StrategyKind kind = StrategyKind::removable_bs;
    double eta = 1.0;
    std::uint64_t rounds = 100000;
    std::uint64_t seed = 0;
    Normalization normalization = Normalization::reference;
    InnerStage inner = InnerStage::split;
    unsigned workers = 1;
};

inline RoundPlan second_order_plan(const DensityMatrix& rho1, const DensityMatrix& rho2, StrategyKind kind, double eta,
                                   InnerStage stage = InnerStage::split) {
    detail::require_overlap2_inputs(rho1, rho2, "estimate_overlap2");
    if (!(eta > 0.0 && eta <= 1.0)) throw ValidationError("detector efficiency must lie in (0, 1]");
    const auto layout = detail::layout_for(rho1.dim());
    const std::size_t n = layout.qubits;
    const std::size_t sides = layout.inner.size();
    const std::size_t n_inner = std::size_t{1} << sides;
    const std::size_t n_blocks = layout.blocks.size();
    const std::size_t n_masks = std::size_t{1} << n_blocks;

    const ComplexMatrix rho = detail::doubled_input(rho1, rho2);
    auto expectations = [&](const ComplexMatrix& sigma) {
        return block_expectations(permute_qubits(sigma, layout.block_order));
    };

    struct Branch {
        BlockExpectations e;
        std::int32_t weight;
        double probability;
    };
    std::vector<std::vector<Branch>> branches(n_inner);
    const BlockExpectations open = expectations(rho);
    for (std::size_t c = 0; c < n_inner; ++c) {
        std::int32_t w = 1;
        ComplexMatrix q = ComplexMatrix::identity(rho.rows());
        for (std::size_t s = 0; s < sides; ++s) {
            if ((c >> s) & 1U) {
                w *= kSingletWeight;
                q = q * embed(singlet_projector(), {layout.inner[s][0], layout.inner[s][1]}, n);
            } else {
                w *= 2;
            }
        }
        if (c == 0) {
            branches[c].push_back({open, w, 1.0});
            continue;
        }
        const ComplexMatrix q_rho = q * rho;
        const ComplexMatrix q_rho_q = q * q_rho.adjoint();
        if (stage == InnerStage::sequential) {
            branches[c].push_back({expectations(q_rho_q), w, 1.0});
            continue;
        }
        const ComplexMatrix comp = rho - q_rho - q_rho.adjoint() + q_rho_q;
        const std::int32_t half = 3 * w / 2;
        branches[c].push_back({open, half, 1.0 / 3.0});
        branches[c].push_back({expectations(q_rho_q), half, 1.0 / 3.0});
        branches[c].push_back({expectations(comp), -half, 1.0 / 3.0});
    }

    RoundPlan plan;
    plan.order = 2;
    plan.kind = kind;
    plan.eta = eta;
    plan.blocks = n_blocks;
    std::vector<std::size_t> offset(n_inner);
    for (std::size_t c = 0; c < n_inner; ++c) {
        offset[c] = plan.configurations.size();
        for (const auto& br : branches[c])
            for (std::size_t mask = 0; mask < n_masks; ++mask) {
                RoundConfiguration cfg;
                cfg.settings = settings_from_mask(mask, n_blocks);
                cfg.conclusive_value = br.weight;
                for (auto s : cfg.settings) cfg.conclusive_value *= block_value(s, kind);
                cfg.probability = br.probability / static_cast<double>(n_inner * n_masks);
                cfg.reference = c == 0 && mask == n_masks - 1;
                attach_distribution(cfg, br.e, kind, eta);
                plan.configurations.push_back(std::move(cfg));
            }
    }
    plan.reference_probability = 1.0 / static_cast<double>(n_inner * n_masks);
    plan.reference_coincidence = std::pow(traits(kind).identity_coincidence, static_cast<double>(n_blocks));

    std::vector<std::size_t> branch_count(n_inner);
    for (std::size_t c = 0; c < n_inner; ++c) branch_count[c] = branches[c].size();
    plan.schedule = [kind, n_inner, n_masks, offset, branch_count](std::uint64_t k, RandomStream& rng) {
        const std::size_t c = static_cast<std::size_t>(k % n_inner);
        const std::size_t mask = pick_block_mask(kind, n_masks, k / n_inner, rng);
        const std::size_t br = branch_count[c] > 1 ? static_cast<std::size_t>(rng.below(branch_count[c])) : 0;
        return offset[c] + br * n_masks + mask;
    };
    return plan;
}

inline ProtocolTally estimate_overlap2(const DensityMatrix& rho1, const DensityMatrix& rho2,
                                       const SecondOrderConfig& cfg) {
    const auto plan = second_order_plan(rho1, rho2, cfg.kind, cfg.eta, cfg.inner);
    return run_rounds(plan, cfg.rounds, cfg.seed, cfg.normalization, cfg.workers);
}

inline ProtocolTally estimate_overlap2(const DensityMatrix& rho1, const DensityMatrix& rho2, double eta,
                                       std::uint64_t rounds, std::uint64_t seed) {
    SecondOrderConfig cfg;
    cfg.eta = eta;
    cfg.rounds = rounds;
    cfg.seed = seed;
    return estimate_overlap2(rho1, rho2, cfg);
}

}  // namespace qfid
