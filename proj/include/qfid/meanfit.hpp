// meanfit.hpp
// Monte-Carlo (E, G, F) datasets over random state pairs and the
// least-squares fit of the power-mean parameters (m, w).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "qfid/measures.hpp"
#include "qfid/random.hpp"
#include "qfid/states.hpp"

namespace qfid {

struct Triple {
    double e = 0.0;
    double g = 0.0;
    double f = 0.0;
};

// Where the pairs come from. Each pair draws rho1 then rho2 from one stream.
struct PairSpec {
    std::size_t dim = 4;
    StateMeasure first = StateMeasure::hilbert_schmidt;
    StateMeasure second = StateMeasure::hilbert_schmidt;
    std::uint64_t seed = 0;
};

struct TripleDataset {
    PairSpec spec{};
    std::vector<Triple> records;

    std::size_t size() const noexcept { return records.size(); }
};

// Pairs are generated in blocks of this many; block b uses RandomStream(seed, b),
// so the dataset does not depend on the worker count.
inline constexpr std::size_t kPairBlock = 4096;

inline Triple triple_for(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    const ComplexMatrix p = rho1.matrix() * rho2.matrix();
    const double o = p.trace().real();
    const double o2 = trace_of_product(p, p).real();
    return {subfidelity_from_overlaps(o, o2), superfidelity_from_overlaps(o, purity(rho1), purity(rho2)),
            fidelity(rho1, rho2)};
}

inline TripleDataset sample_triples(std::size_t n, const PairSpec& spec, unsigned workers = 1) {
    if (n == 0) throw ValidationError("sample_triples: need at least one pair");
    TripleDataset ds{spec, std::vector<Triple>(n)};
    const std::size_t blocks = (n + kPairBlock - 1) / kPairBlock;
    for_each_block(blocks, workers, [&](std::size_t b) {
        RandomStream rng(spec.seed, b);
        const std::size_t end = std::min(n, (b + 1) * kPairBlock);
        for (std::size_t i = b * kPairBlock; i < end; ++i) {
            const auto rho1 = random_state(spec.dim, spec.first, rng);
            const auto rho2 = random_state(spec.dim, spec.second, rng);
            ds.records[i] = triple_for(rho1, rho2);
        }
    });
    return ds;
}

// Log-domain view of a dataset for repeated power-mean evaluation.
class PreparedTriples {
public:
    explicit PreparedTriples(const TripleDataset& ds) {
        const std::size_t n = ds.size();
        e_.resize(n);
        g_.resize(n);
        f_.resize(n);
        log_e_.resize(n);
        log_g_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& t = ds.records[i];
            e_[i] = t.e;
            g_[i] = t.g;
            f_[i] = t.f;
            log_e_[i] = t.e > 0.0 ? std::log(t.e) : -std::numeric_limits<double>::infinity();
            log_g_[i] = t.g > 0.0 ? std::log(t.g) : -std::numeric_limits<double>::infinity();
        }
    }

    std::size_t size() const noexcept { return f_.size(); }

    // RMS of F-bar(E, G; m, w) - F. Same arithmetic as generalized_mean.
    double delta(double m, double w) const {
        if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("delta: weight must lie in [0, 1]");
        if (size() == 0) throw ValidationError("delta: empty dataset");
        double sum = 0.0;
        const std::size_t n = size();
        const bool plain = w > 0.0 && w < 1.0 && std::abs(m) <= kInfiniteExponent && m != 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double fbar;
            const double e = e_[i], g = g_[i];
            if (plain && e > 0.0 && g > 0.0) {
                const double d = log_e_[i] - log_g_[i];
                const double lm = m * d <= 0.0 ? log_g_[i] + std::log1p(w * std::expm1(m * d)) / m
                                               : log_e_[i] + std::log1p((1.0 - w) * std::expm1(-m * d)) / m;
                fbar = std::clamp(std::exp(lm), std::min(e, g), std::max(e, g));
            } else {
                fbar = generalized_mean(e, g, m, w);
            }
            const double r = fbar - f_[i];
            sum += r * r;
        }
        return std::sqrt(sum / static_cast<double>(n));
    }

private:
    std::vector<double> e_, g_, f_, log_e_, log_g_;
};

inline double delta(const TripleDataset& ds, double m, double w) { return PreparedTriples(ds).delta(m, w); }

// ---------------------------------------------------------------------------
// Optimizer

inline constexpr double kFitMinExponent = -20.0;
inline constexpr double kFitMaxExponent = 20.0;

// 41 exponents: 0 and +/- 20 log-spaced magnitudes in [0.05, 20].
inline std::vector<double> exponent_grid() {
    std::vector<double> grid{0.0};
    constexpr int k = 20;
    const double lo = std::log(0.05), hi = std::log(20.0);
    for (int i = 0; i < k; ++i) {
        const double mag = std::exp(lo + (hi - lo) * i / (k - 1));
        grid.push_back(mag);
        grid.push_back(-mag);
    }
    std::sort(grid.begin(), grid.end());
    return grid;
}

// 21 weights 0, 0.05, ..., 1.
inline std::vector<double> weight_grid() {
    std::vector<double> grid(21);
    for (int i = 0; i <= 20; ++i) grid[i] = i / 20.0;
    return grid;
}

namespace detail {

struct SimplexResult {
    std::array<double, 2> x{};
    double value = 0.0;
    int iterations = 0;
};

// Nelder-Mead in two dimensions; stops when every vertex is within `tol`
// (per coordinate) of the best one.
inline SimplexResult nelder_mead(const std::function<double(std::array<double, 2>)>& f, std::array<double, 2> x0,
                                 std::array<double, 2> step, double tol, int max_iter = 5000) {
    using Point = std::array<double, 2>;
    std::array<Point, 3> pts{x0, Point{x0[0] + step[0], x0[1]}, Point{x0[0], x0[1] + step[1]}};
    std::array<double, 3> val{f(pts[0]), f(pts[1]), f(pts[2])};
    auto lerp = [](const Point& a, const Point& b, double t) {
        return Point{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
    };
    int it = 0;
    for (; it < max_iter; ++it) {
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return val[a] < val[b]; });
        const Point best = pts[idx[0]], mid = pts[idx[1]], worst = pts[idx[2]];
        const double fb = val[idx[0]], fm = val[idx[1]], fw = val[idx[2]];
        double spread = 0.0;
        for (int k = 1; k < 3; ++k)
            for (int c = 0; c < 2; ++c) spread = std::max(spread, std::abs(pts[idx[k]][c] - best[c]));
        if (spread < tol) break;

        const Point centroid{(best[0] + mid[0]) / 2.0, (best[1] + mid[1]) / 2.0};
        const Point refl = lerp(centroid, worst, -1.0);
        const double fr = f(refl);
        Point next = refl;
        double fnext = fr;
        if (fr < fb) {
            const Point exp = lerp(centroid, worst, -2.0);
            const double fe = f(exp);
            if (fe < fr) {
                next = exp;
                fnext = fe;
            }
        } else if (fr >= fm) {
            const Point con = fr < fw ? lerp(centroid, worst, -0.5) : lerp(centroid, worst, 0.5);
            const double fc = f(con);
            if (fc < std::min(fr, fw)) {
                next = con;
                fnext = fc;
            } else {
                // shrink toward best
                for (int k = 1; k < 3; ++k) {
                    pts[idx[k]] = lerp(best, pts[idx[k]], 0.5);
                    val[idx[k]] = f(pts[idx[k]]);
                }
                continue;
            }
        }
        pts[idx[2]] = next;
        val[idx[2]] = fnext;
    }
    int b = 0;
    for (int k = 1; k < 3; ++k)
        if (val[k] < val[b]) b = k;
    return {pts[b], val[b], it};
}

}  // namespace detail

struct FitResult {
    MeanParams best{};
    MeanParams grid_best{};
    double arithmetic_delta = 0.0;  // Delta at m = 1, w = 1/2
    int refinement_iterations = 0;
};

inline constexpr double kFitTolerance = 1e-6;

// Coarse 41 x 21 grid over (m, w), then Nelder-Mead from the best cell with
// m clamped to [-20, 20] and w to [0, 1].
inline FitResult fit_mean(const PreparedTriples& data) {
    FitResult out;
    out.arithmetic_delta = data.delta(1.0, 0.5);
    MeanParams best{1.0, 0.5, out.arithmetic_delta};
    for (double m : exponent_grid())
        for (double w : weight_grid()) {
            const double d = data.delta(m, w);
            if (d < best.delta) best = {m, w, d};
        }
    out.grid_best = best;

    auto clamp_params = [](std::array<double, 2> x) {
        return std::array<double, 2>{std::clamp(x[0], kFitMinExponent, kFitMaxExponent), std::clamp(x[1], 0.0, 1.0)};
    };
    auto objective = [&](std::array<double, 2> x) {
        const auto c = clamp_params(x);
        return data.delta(c[0], c[1]);
    };
    const std::array<double, 2> step{std::max(0.1 * std::abs(best.m), 0.05), 0.05};
    const auto nm = detail::nelder_mead(objective, {best.m, best.w}, step, kFitTolerance);
    out.refinement_iterations = nm.iterations;
    const auto x = clamp_params(nm.x);
    const double d = data.delta(x[0], x[1]);
    if (d <= best.delta) best = {x[0], x[1], d};
    out.best = best;
    return out;
}

inline MeanParams optimize(const TripleDataset& ds) {
    if (ds.size() == 0) throw ValidationError("optimize: empty dataset");
    return fit_mean(PreparedTriples(ds)).best;
}

// The four estimator panels: E (m = -inf), fitted mean, arithmetic mean, G (m = +inf).
struct PanelSpec {
    const char* name;
    double m;
    double w;
};

inline std::array<PanelSpec, 4> figure_panels(const MeanParams& fitted) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {PanelSpec{"subfidelity", -inf, 0.5}, PanelSpec{"optimized", fitted.m, fitted.w},
            PanelSpec{"arithmetic", 1.0, 0.5}, PanelSpec{"superfidelity", inf, 0.5}};
}

}  // namespace qfid
