#pragma once

// Deterministic chunked Monte Carlo reduction. Trials are cut into fixed-size
// chunks, chunk k draws from lane k of the caller's stream, and partial sums
// are combined in chunk order, so results do not depend on the worker count.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include "twophoton/rng.hpp"

namespace twophoton {

inline constexpr std::size_t kTrialsPerChunk = 4096;

struct Execution {
    unsigned workers = 0; // 0: hardware concurrency

    unsigned resolved() const noexcept
    {
        if (workers > 0)
            return workers;
        return std::max(1u, std::thread::hardware_concurrency());
    }
};

// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double x) noexcept
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Runs fn(index) for index in [0, count) on up to `exec` workers and returns
// the results in index order.
template <class Result, class Fn>
std::vector<Result> parallel_map(std::size_t count, Execution exec, Fn&& fn)
{
    std::vector<Result> out(count);
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(exec.resolved(), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count)
                return;
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next = count;
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back(worker);
    pool.clear();
    if (error)
        std::rethrow_exception(error);
    return out;
}

// Accumulated moments of a set of real-valued samples (one per column).
template <std::size_t N>
struct Moments {
    std::array<double, N> sum{};
    std::array<double, N> sum_sq{};
    std::size_t count = 0;
};

// Evaluates `trial(engine) -> std::array<double, N>` `trials` times using
// chunked substreams of `stream`, returning per-column sums in a
// worker-count-independent order.
template <std::size_t N, class Trial>
Moments<N> monte_carlo(std::size_t trials, RngStream stream, Execution exec, Trial&& trial)
{
    const std::size_t chunks = (trials + kTrialsPerChunk - 1) / kTrialsPerChunk;
    struct Partial {
        std::array<double, N> sum{};
        std::array<double, N> sum_sq{};
    };
    auto partials = parallel_map<Partial>(chunks, exec, [&](std::size_t c) {
        PhiloxEngine engine(stream, static_cast<std::uint32_t>(c));
        const std::size_t begin = c * kTrialsPerChunk;
        const std::size_t end = std::min(trials, begin + kTrialsPerChunk);
        std::array<CompensatedSum, N> s, s2;
        for (std::size_t i = begin; i < end; ++i) {
            const std::array<double, N> v = trial(engine);
            for (std::size_t k = 0; k < N; ++k) {
                s[k].add(v[k]);
                s2[k].add(v[k] * v[k]);
            }
        }
        Partial p;
        for (std::size_t k = 0; k < N; ++k) {
            p.sum[k] = s[k].value();
            p.sum_sq[k] = s2[k].value();
        }
        return p;
    });
    Moments<N> m;
    std::array<CompensatedSum, N> s, s2;
    for (const auto& p : partials)
        for (std::size_t k = 0; k < N; ++k) {
            s[k].add(p.sum[k]);
            s2[k].add(p.sum_sq[k]);
        }
    for (std::size_t k = 0; k < N; ++k) {
        m.sum[k] = s[k].value();
        m.sum_sq[k] = s2[k].value();
    }
    m.count = trials;
    return m;
}

// Mean and standard error of column k.
template <std::size_t N>
std::pair<double, double> mean_and_stderr(const Moments<N>& m, std::size_t k)
{
    const double n = static_cast<double>(m.count);
    const double mean = m.sum[k] / n;
    const double var = std::max(0.0, m.sum_sq[k] / n - mean * mean) * n / std::max(1.0, n - 1.0);
    return {mean, std::sqrt(var / n)};
}

} // namespace twophoton
