#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fdist {

using Complex = std::complex<double>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

/// Invalid user input: bad parameters, malformed configuration, unknown tags.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical precondition does not hold (J <= 0 where a positive Jacobian
/// is required, a point outside the unit disk for the hyperbolic weight, ...).
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Broken internal invariant. Never expected for module-built inputs.
class InternalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fixed-tree pairwise summation. The reduction order depends only on the
/// length of the input, so results do not change with the thread count.
double pairwise_sum(std::span<const double> values);

/// Area-weighted sum restricted to an optional element mask (empty = all).
double masked_sum(std::span<const double> values, std::span<const char> mask);

void set_thread_count(int n);
int thread_count();

/// Runs body(i) for i in [0, n). Each index is written by exactly one worker,
/// so element-wise kernels give identical results at any thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_chunk = 2048)
{
    const int threads = thread_count();
    const std::size_t kMinChunk = std::max<std::size_t>(min_chunk, 1);
    if (threads <= 1 || n < 2 * kMinChunk) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(threads, n / kMinChunk);
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        pool.emplace_back([begin, end, &body] {
            for (std::size_t i = begin; i < end; ++i) body(i);
        });
    }
}

/// Column sums of kernel(i, acc), where the kernel adds `width` values into acc.
/// Elements are grouped in fixed blocks whose partial sums are reduced
/// pairwise, so the result does not depend on the thread count.
template <class Kernel>
std::vector<double> blocked_sums(std::size_t n, std::size_t width, Kernel&& kernel)
{
    constexpr std::size_t kBlock = 512;
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(blocks * width, 0.0);
    parallel_for(
        blocks,
        [&](std::size_t b) {
            double* acc = partial.data() + b * width;
            const std::size_t end = std::min(n, (b + 1) * kBlock);
            for (std::size_t i = b * kBlock; i < end; ++i) kernel(i, acc);
        },
        8);
    std::vector<double> out(width), column(blocks);
    for (std::size_t k = 0; k < width; ++k) {
        for (std::size_t b = 0; b < blocks; ++b) column[b] = partial[b * width + k];
        out[k] = pairwise_sum(column);
    }
    return out;
}

} // namespace fdist
