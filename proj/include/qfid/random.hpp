// random.hpp
// Seeded random streams and a small block-parallel driver.
//
// Every stream is a std::mt19937_64 keyed by (seed, stream index) through
// std::seed_seq, whose algorithm is fixed by the standard. The variates
// below are computed here rather than with <random> distributions, whose
// output is implementation-defined, so a (seed, stream) pair yields the same
// numbers on every conforming toolchain.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace qfid {

class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        engine_.seed(seq);
    }

    std::uint64_t next() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal (Marsaglia polar method).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    // Circular complex Gaussian with E|z|^2 = 1.
    std::complex<double> complex_normal() {
        constexpr double k = 0.70710678118654752440;
        const double re = normal();
        const double im = normal();
        return {k * re, k * im};
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Runs fn(block) for block in [0, n_blocks) on up to `workers` threads.
// Blocks are claimed dynamically, so callers must make each block's output
// depend only on the block index (e.g. RandomStream(seed, block)).
template <class Fn>
void for_each_block(std::size_t n_blocks, unsigned workers, Fn&& fn) {
    workers = std::max(1U, workers);
    if (workers == 1 || n_blocks <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        const unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(workers, n_blocks));
        pool.reserve(n_threads);
        for (unsigned t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t b = next++; b < n_blocks; b = next++) {
                    try {
                        fn(b);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next = n_blocks;
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace qfid
