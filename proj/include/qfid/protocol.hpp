// protocol.hpp
// Click-level simulation of the V-block overlap measurement.
//
// A V block receives two photons (two qubits) and is run in one of two
// settings per round:
//   singlet  - balanced beam splitter, coincidence with probability
//              eta^2 <P->, recorded value -4;
//   identity - the strategy-specific "no interference" arrangement,
//              coincidence with probability eta^2 c_id independent of the
//              state, recorded value v_id, with c_id v_id = 2.
// The block therefore estimates V = 2 I - 4 P- up to the factor eta^2 / 2.
// A round's outcome a_k is the product of all block values when every
// block registers a coincidence and 0 otherwise.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qfid/errors.hpp"
#include "qfid/linalg.hpp"
#include "qfid/random.hpp"
#include "qfid/states.hpp"

namespace qfid {

enum class StrategyKind { base_random_routing, removable_bs, mach_zehnder, shifted_bs, hom_overlap };

inline constexpr std::array<StrategyKind, 5> kAllStrategies{
    StrategyKind::base_random_routing, StrategyKind::removable_bs, StrategyKind::mach_zehnder,
    StrategyKind::shifted_bs, StrategyKind::hom_overlap};

struct StrategyTraits {
    std::string_view name;
    double identity_coincidence;  // c_id
    int identity_weight;          // v_id
    bool time_multiplexed;        // deterministic setting schedule
};

inline constexpr int kSingletWeight = -4;

inline constexpr StrategyTraits traits(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::base_random_routing: return {"base", 1.0, 2, false};
        case StrategyKind::removable_bs: return {"removable-bs", 1.0, 2, true};
        case StrategyKind::mach_zehnder: return {"mach-zehnder", 1.0, 2, true};
        case StrategyKind::shifted_bs: return {"shifted-bs", 0.25, 8, true};
        case StrategyKind::hom_overlap: return {"hom-overlap", 0.5, 4, true};
    }
    return {"base", 1.0, 2, false};
}

inline std::string_view to_string(StrategyKind kind) { return traits(kind).name; }

inline StrategyKind parse_strategy(std::string_view s) {
    for (auto k : kAllStrategies)
        if (traits(k).name == s) return k;
    if (s == "base-random-routing") return StrategyKind::base_random_routing;
    throw ValidationError("unknown strategy '" + std::string(s) + "'");
}

// Largest per-block conclusive fraction at eta = 1 over all block states:
// half the rounds in each setting, the singlet setting saturating at
// lambda_max(P-) = 1 and the identity setting at c_id.
inline double strategy_success_probability(StrategyKind kind) {
    constexpr double singlet_max = 1.0;  // P- is a rank-one projector
    return 0.5 * singlet_max + 0.5 * traits(kind).identity_coincidence;
}

enum class BlockSetting : std::uint8_t { singlet = 0, identity = 1 };

// ---------------------------------------------------------------------------
// Click distributions

// e[S] = Tr[(prod_{b in S} P-_b) sigma] for every subset S of blocks, where
// block b is qubits (2b, 2b+1). sigma may be subnormalized (e[0] = Tr sigma).
struct BlockExpectations {
    std::size_t blocks = 0;
    std::vector<double> subset;
};

inline BlockExpectations block_expectations(const ComplexMatrix& sigma) {
    const std::size_t n = qubit_count(sigma.rows());
    if (n % 2 != 0 || n == 0) throw ValidationError("block_expectations: need an even number of qubits");
    const std::size_t blocks = n / 2;
    const ComplexMatrix p = singlet_projector();
    const ComplexMatrix id = ComplexMatrix::identity(4);
    BlockExpectations out{blocks, std::vector<double>(std::size_t{1} << blocks)};
    for (std::size_t s = 0; s < out.subset.size(); ++s) {
        ComplexMatrix op = ComplexMatrix::identity(1);
        for (std::size_t b = 0; b < blocks; ++b) op = kron(op, ((s >> b) & 1U) ? p : id);
        out.subset[s] = trace_of_product(op, sigma).real();
    }
    return out;
}

// Probability of each click pattern (bit b set = block b registered a
// coincidence). Patterns sum to 1; mass missing from a subnormalized state
// lands on the empty pattern.
inline std::vector<double> joint_click_distribution(const BlockExpectations& e, std::span<const BlockSetting> settings,
                                                    StrategyKind kind, double eta) {
    if (settings.size() != e.blocks) throw ValidationError("joint_click_distribution: one setting per block");
    if (!(eta > 0.0 && eta <= 1.0)) throw ValidationError("detector efficiency must lie in (0, 1]");
    const double eta2 = eta * eta;
    const double cid = traits(kind).identity_coincidence;
    // coincidence operator of block b: alpha_b I + beta_b P-
    std::vector<double> alpha(e.blocks), beta(e.blocks);
    for (std::size_t b = 0; b < e.blocks; ++b) {
        if (settings[b] == BlockSetting::singlet) {
            alpha[b] = 0.0;
            beta[b] = eta2;
        } else {
            alpha[b] = eta2 * cid;
            beta[b] = 0.0;
        }
    }
    const std::size_t n = std::size_t{1} << e.blocks;
    std::vector<double> probs(n, 0.0);
    for (std::size_t pattern = 0; pattern < n; ++pattern) {
        double p = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            double coef = 1.0;
            for (std::size_t b = 0; b < e.blocks && coef != 0.0; ++b) {
                const bool click = (pattern >> b) & 1U;
                const bool proj = (s >> b) & 1U;
                const double a = click ? alpha[b] : 1.0 - alpha[b];
                const double c = click ? beta[b] : -beta[b];
                coef *= proj ? c : a;
            }
            if (coef != 0.0) p += coef * e.subset[s];
        }
        probs[pattern] = p;
    }
    probs[0] += 1.0 - e.subset[0];
    for (auto& p : probs) p = std::max(p, 0.0);
    return probs;
}

// Two-block table for a rearranged two-copy state (A1 A2 B1 B2 order).
inline std::array<double, 4> joint_click_distribution(const ComplexMatrix& rearranged, BlockSetting setting_a,
                                                      BlockSetting setting_b, StrategyKind kind, double eta) {
    if (rearranged.rows() != 16) throw ValidationError("joint_click_distribution expects a four-qubit state");
    const std::array<BlockSetting, 2> s{setting_a, setting_b};
    const auto v = joint_click_distribution(block_expectations(rearranged), s, kind, eta);
    return {v[0], v[1], v[2], v[3]};
}

// ---------------------------------------------------------------------------
// Round engine

// One way a round can be configured. A round draws its configuration from
// the plan's schedule, then a click pattern from `cumulative`.
struct RoundConfiguration {
    std::vector<BlockSetting> settings;
    std::int32_t conclusive_value = 0;  // a_k when every block coincides
    double probability = 0.0;           // nominal frequency in the schedule
    bool reference = false;             // all-identity configuration counted by K0
    std::vector<double> cumulative;     // click-pattern CDF
    double all_click_probability = 0.0;
};

struct RoundPlan {
    int order = 1;
    StrategyKind kind = StrategyKind::base_random_routing;
    double eta = 1.0;
    std::size_t blocks = 0;
    std::vector<RoundConfiguration> configurations;
    std::function<std::size_t(std::uint64_t, RandomStream&)> schedule;
    double reference_probability = 0.0;  // nominal frequency of the reference configuration
    double reference_coincidence = 1.0;  // c_id^blocks

    // Exact expectation of the reference-normalized estimator (ratio of expectations).
    double expected_estimate() const {
        double ea = 0.0, ez = 0.0;
        for (const auto& c : configurations) {
            ea += c.probability * c.all_click_probability * c.conclusive_value;
            if (c.reference) ez += c.probability * c.all_click_probability;
        }
        return reference_probability * reference_coincidence * ea / ez;
    }
};

inline std::int32_t block_value(BlockSetting s, StrategyKind kind) {
    return s == BlockSetting::singlet ? kSingletWeight : traits(kind).identity_weight;
}

// Fills the click CDF of a configuration from the state its blocks see.
inline void attach_distribution(RoundConfiguration& c, const BlockExpectations& e, StrategyKind kind, double eta) {
    const auto probs = joint_click_distribution(e, c.settings, kind, eta);
    c.cumulative.resize(probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        c.cumulative[i] = acc;
    }
    for (auto& x : c.cumulative) x /= acc;
    c.all_click_probability = probs.back() / acc;
}

inline std::vector<BlockSetting> settings_from_mask(std::size_t mask, std::size_t blocks) {
    std::vector<BlockSetting> s(blocks);
    for (std::size_t b = 0; b < blocks; ++b) s[b] = ((mask >> b) & 1U) ? BlockSetting::identity : BlockSetting::singlet;
    return s;
}

enum class Normalization { reference, per_bucket };

inline std::string_view to_string(Normalization n) { return n == Normalization::reference ? "reference" : "per-bucket"; }

inline Normalization parse_normalization(std::string_view s) {
    if (s == "reference" || s == "k0") return Normalization::reference;
    if (s == "per-bucket" || s == "bucket") return Normalization::per_bucket;
    throw ValidationError("unknown normalization '" + std::string(s) + "'");
}

struct ConfigurationSummary {
    double probability = 0.0;
    bool reference = false;
};

struct ProtocolTally {
    int order = 1;
    StrategyKind kind = StrategyKind::base_random_routing;
    double eta = 1.0;
    std::uint64_t rounds = 0;
    std::uint64_t seed = 0;
    std::size_t blocks = 0;
    Normalization normalization = Normalization::reference;
    double reference_probability = 0.0;
    double reference_coincidence = 1.0;
    std::vector<ConfigurationSummary> configurations;

    std::vector<std::int32_t> outcomes;     // a_k
    std::vector<std::uint16_t> configs;     // configuration index of round k

    std::uint64_t k0 = 0;                   // conclusive rounds in the reference configuration
    std::uint64_t conclusive = 0;           // rounds with a_k != 0
    double estimate = 0.0;
    double stderr_ = 0.0;

    std::map<std::int64_t, std::uint64_t> histogram() const {
        std::map<std::int64_t, std::uint64_t> h;
        for (auto a : outcomes) ++h[a];
        return h;
    }
};

class InconclusiveRun : public std::runtime_error {
public:
    InconclusiveRun(const std::string& what, ProtocolTally tally)
        : std::runtime_error(what), tally_(std::move(tally)) {}
    const ProtocolTally& tally() const noexcept { return tally_; }

private:
    ProtocolTally tally_;
};

struct EstimateResult {
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::uint64_t k0 = 0;
};

inline bool is_reference_event(const ProtocolTally& t, std::size_t k) {
    return t.outcomes[k] != 0 && t.configurations[t.configs[k]].reference;
}

// Estimate from stored outcomes. Reference form: sum(a) p_ref c^B / K0, i.e.
// sum(a) / (4 K0) for the base strategy. Per-bucket form: each configuration's
// mean outcome weighted by its nominal frequency, divided by the eta^(2B)
// measured in the reference bucket. Standard errors use the delta method.
inline EstimateResult compute_estimate(const ProtocolTally& t, Normalization norm) {
    const std::size_t n = t.outcomes.size();
    if (n == 0) throw ValidationError("compute_estimate: no rounds");
    EstimateResult r;
    for (std::size_t k = 0; k < n; ++k)
        if (is_reference_event(t, k)) ++r.k0;
    if (r.k0 == 0) return r;
    const double scale = t.reference_probability * t.reference_coincidence;

    if (norm == Normalization::reference) {
        double sum_a = 0.0;
        for (auto a : t.outcomes) sum_a += a;
        const double zbar = static_cast<double>(r.k0) / static_cast<double>(n);
        r.estimate = scale * sum_a / static_cast<double>(r.k0);
        // residuals of the ratio estimator
        double mean_u = 0.0, m2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double u = scale * t.outcomes[k] - r.estimate * (is_reference_event(t, k) ? 1.0 : 0.0);
            const double delta = u - mean_u;
            mean_u += delta / static_cast<double>(k + 1);
            m2 += delta * (u - mean_u);
        }
        const double var_u = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
        r.stderr_ = std::sqrt(var_u / static_cast<double>(n)) / zbar;
        return r;
    }

    const std::size_t nc = t.configurations.size();
    std::vector<double> count(nc, 0.0), sum(nc, 0.0), sum2(nc, 0.0);
    double ref_n = 0.0, ref_z = 0.0, ref_az = 0.0, ref_a = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto c = t.configs[k];
        const double a = t.outcomes[k];
        count[c] += 1.0;
        sum[c] += a;
        sum2[c] += a * a;
        if (t.configurations[c].reference) {
            ref_n += 1.0;
            ref_a += a;
            if (a != 0.0) {
                ref_z += 1.0;
                ref_az += a;
            }
        }
    }
    double num = 0.0, var_num = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
        const double p = t.configurations[c].probability;
        if (p == 0.0) continue;
        if (count[c] == 0.0) {
            r.k0 = 0;  // a configuration was never visited
            return r;
        }
        const double mean = sum[c] / count[c];
        num += p * mean;
        const double var = count[c] > 1.0 ? (sum2[c] - count[c] * mean * mean) / (count[c] - 1.0) : 0.0;
        var_num += p * p * std::max(var, 0.0) / count[c];
    }
    const double cb = t.reference_coincidence;
    const double zbar = ref_z / ref_n;
    const double den = zbar / cb;
    r.estimate = num / den;
    const double var_z = ref_n > 1.0 ? (ref_z - ref_n * zbar * zbar) / (ref_n - 1.0) : 0.0;
    const double cov_az = ref_n > 1.0 ? (ref_az - ref_n * (ref_a / ref_n) * zbar) / (ref_n - 1.0) : 0.0;
    const double p_ref = t.reference_probability;
    const double var_den = std::max(var_z, 0.0) / ref_n / (cb * cb);
    const double cov = p_ref * cov_az / ref_n / cb;
    const double var = (var_num - 2.0 * r.estimate * cov + r.estimate * r.estimate * var_den) / (den * den);
    r.stderr_ = std::sqrt(std::max(var, 0.0));
    return r;
}

inline constexpr std::uint64_t kRoundBlock = 1U << 16;

// Runs `rounds` rounds of a plan. Round block b uses RandomStream(seed, b);
// the tally is independent of the worker count.
inline ProtocolTally run_rounds(const RoundPlan& plan, std::uint64_t rounds, std::uint64_t seed,
                                Normalization norm, unsigned workers = 1) {
    if (rounds == 0) throw ValidationError("need at least one round");
    if (plan.configurations.size() > 65535) throw ValidationError("too many configurations");
    ProtocolTally t;
    t.order = plan.order;
    t.kind = plan.kind;
    t.eta = plan.eta;
    t.rounds = rounds;
    t.seed = seed;
    t.blocks = plan.blocks;
    t.normalization = norm;
    t.reference_probability = plan.reference_probability;
    t.reference_coincidence = plan.reference_coincidence;
    for (const auto& c : plan.configurations) t.configurations.push_back({c.probability, c.reference});
    t.outcomes.resize(rounds);
    t.configs.resize(rounds);

    const std::size_t all = (std::size_t{1} << plan.blocks) - 1;
    const std::uint64_t n_blocks = (rounds + kRoundBlock - 1) / kRoundBlock;
    for_each_block(n_blocks, workers, [&](std::size_t b) {
        RandomStream rng(seed, b);
        const std::uint64_t end = std::min<std::uint64_t>(rounds, (b + 1) * kRoundBlock);
        for (std::uint64_t k = b * kRoundBlock; k < end; ++k) {
            const std::size_t ci = plan.schedule(k, rng);
            const auto& c = plan.configurations[ci];
            const double u = rng.uniform();
            std::size_t pattern = 0;
            while (pattern < all && u >= c.cumulative[pattern]) ++pattern;
            t.configs[k] = static_cast<std::uint16_t>(ci);
            t.outcomes[k] = pattern == all ? c.conclusive_value : 0;
        }
    });

    for (auto a : t.outcomes)
        if (a != 0) ++t.conclusive;
    const auto est = compute_estimate(t, norm);
    t.k0 = est.k0;
    t.estimate = est.estimate;
    t.stderr_ = est.stderr_;
    if (est.k0 == 0) {
        throw InconclusiveRun("inconclusive run: no conclusive rounds in the reference configuration", std::move(t));
    }
    return t;
}

// ---------------------------------------------------------------------------
// First-order overlap

struct StrategyConfig {
    StrategyKind kind = StrategyKind::base_random_routing;
    double eta = 1.0;
    std::uint64_t rounds = 10000;
    std::uint64_t seed = 0;
    Normalization normalization = Normalization::reference;
    unsigned workers = 1;
};

// Gamma = S_{A2B1} (V_{A1A2} (x) V_{B1B2}) S_{A2B1} on A1 B1 A2 B2;
// Tr[Gamma (rho1 (x) rho2)] = 4 Tr(rho1 rho2).
inline ComplexMatrix gamma_operator() {
    const ComplexMatrix s = swap_operator(1, 2, 4);
    const ComplexMatrix v = v_operator();
    return s * kron(v, v) * s;
}

// Settings schedule shared by both protocols: deterministic cycling for the
// time-multiplexed strategies, independent uniform settings for the base one.
inline std::size_t pick_block_mask(StrategyKind kind, std::size_t n_masks, std::uint64_t slot, RandomStream& rng) {
    return traits(kind).time_multiplexed ? static_cast<std::size_t>(slot % n_masks)
                                         : static_cast<std::size_t>(rng.below(n_masks));
}

// Plan for the first-order overlap. Two-qubit inputs use two V blocks on the
// rearranged pair; qubit inputs use a single block on rho1 (x) rho2.
inline RoundPlan first_order_plan(const DensityMatrix& rho1, const DensityMatrix& rho2, StrategyKind kind,
                                  double eta) {
    if (rho1.dim() != rho2.dim()) throw ValidationError("estimate_overlap: states have different dimensions");
    if (rho1.dim() != 2 && rho1.dim() != 4) throw ValidationError("estimate_overlap supports qubit and two-qubit states");
    if (!(eta > 0.0 && eta <= 1.0)) throw ValidationError("detector efficiency must lie in (0, 1]");
    const ComplexMatrix sigma =
        rho1.dim() == 4 ? rearrange_pair(rho1, rho2) : kron(rho1.matrix(), rho2.matrix());
    const auto e = block_expectations(sigma);

    RoundPlan plan;
    plan.order = 1;
    plan.kind = kind;
    plan.eta = eta;
    plan.blocks = e.blocks;
    const std::size_t n_masks = std::size_t{1} << e.blocks;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
        RoundConfiguration c;
        c.settings = settings_from_mask(mask, e.blocks);
        c.conclusive_value = 1;
        for (auto s : c.settings) c.conclusive_value *= block_value(s, kind);
        c.probability = 1.0 / static_cast<double>(n_masks);
        c.reference = mask == n_masks - 1;
        attach_distribution(c, e, kind, eta);
        plan.configurations.push_back(std::move(c));
    }
    plan.reference_probability = 1.0 / static_cast<double>(n_masks);
    plan.reference_coincidence = std::pow(traits(kind).identity_coincidence, static_cast<double>(e.blocks));
    plan.schedule = [kind, n_masks](std::uint64_t k, RandomStream& rng) {
        return pick_block_mask(kind, n_masks, k, rng);
    };
    return plan;
}

inline ProtocolTally estimate_overlap(const DensityMatrix& rho1, const DensityMatrix& rho2,
                                      const StrategyConfig& cfg) {
    const auto plan = first_order_plan(rho1, rho2, cfg.kind, cfg.eta);
    return run_rounds(plan, cfg.rounds, cfg.seed, cfg.normalization, cfg.workers);
}

}  // namespace qfid
