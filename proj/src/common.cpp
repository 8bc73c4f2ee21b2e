#include "fdist/common.hpp"

#include <atomic>

namespace fdist {

namespace {

std::atomic<int> g_threads{1};

double pairwise_sum_impl(const double* data, std::size_t n)
{
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum_impl(data, half) + pairwise_sum_impl(data + half, n - half);
}

} // namespace

double pairwise_sum(std::span<const double> values)
{
    return pairwise_sum_impl(values.data(), values.size());
}

double masked_sum(std::span<const double> values, std::span<const char> mask)
{
    if (mask.empty()) return pairwise_sum(values);
    if (mask.size() != values.size())
        throw InternalError("masked_sum: mask length does not match values");
    std::vector<double> picked(values.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i)
        if (mask[i]) picked[i] = values[i];
    return pairwise_sum(picked);
}

void set_thread_count(int n)
{
    if (n < 1) throw ConfigError("thread count must be >= 1");
    g_threads.store(n);
}

int thread_count() { return g_threads.load(); }

} // namespace fdist
