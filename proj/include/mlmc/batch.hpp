#pragma once

// Keyed batch sampling. Sample i on level l is a pure function of
// (seed, l, i), so index ranges can be split into fixed chunks and evaluated
// on any number of threads. Chunk boundaries depend only on the range and the
// per-chunk statistics are merged in chunk order, which makes the result
// bit-identical for every worker count.

#include <algorithm>
#include <atomic>
#include <concepts>
#include <cstdint>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mlmc/error.hpp"
#include "mlmc/random.hpp"
#include "mlmc/statistics.hpp"

namespace mlmc {

/// Same as LevelSample for a sampler producing several outputs from one path.
struct MultiLevelSample {
    std::vector<double> corrections;
    std::vector<double> fines;
    double cost = 0.0;
};

/// A coupled sampler maps a key (seed, level, sample index) to one sample.
template <class S>
concept LevelSampler = requires(const S& s, const StreamKey& key) {
    { s(key) } -> std::convertible_to<LevelSample>;
};

template <class S>
concept MultiLevelSampler = requires(const S& s, const StreamKey& key) {
    { s(key) } -> std::convertible_to<MultiLevelSample>;
};

inline constexpr std::int64_t kBatchChunk = 1024;

namespace detail {

[[noreturn]] inline void throw_non_finite(const StreamKey& key)
{
    throw NonFinite("non-finite sample on level " + std::to_string(key.level) + ", sample " +
                    std::to_string(key.sample_index));
}

inline void check_finite(double v, const StreamKey& key)
{
    if (!std::isfinite(v))
        throw_non_finite(key);
}

template <class Sampler>
void add_sample(std::span<LevelStats> out, const Sampler& sampler, const StreamKey& key)
{
    if constexpr (LevelSampler<Sampler>) {
        const LevelSample s = sampler(key);
        check_finite(s.correction, key);
        check_finite(s.fine, key);
        out[0].add(s.correction, s.fine, s.cost);
    } else {
        const MultiLevelSample s = sampler(key);
        if (s.corrections.size() != out.size() || s.fines.size() != out.size())
            throw BadInput("multi-output sampler returned the wrong number of outputs");
        for (std::size_t m = 0; m < out.size(); ++m) {
            check_finite(s.corrections[m], key);
            check_finite(s.fines[m], key);
            out[m].add(s.corrections[m], s.fines[m], s.cost);
        }
    }
}

}  // namespace detail

/// Accumulates samples [begin, end) of one level into one LevelStats per
/// output. `workers` <= 1 runs on the calling thread.
template <class Sampler>
    requires LevelSampler<Sampler> || MultiLevelSampler<Sampler>
std::vector<LevelStats> accumulate_samples(const Sampler& sampler, std::uint64_t seed, int level,
                                           std::int64_t begin, std::int64_t end, std::size_t outputs,
                                           int workers = 1)
{
    std::vector<LevelStats> total(outputs);
    for (auto& s : total)
        s.level = level;
    if (end <= begin)
        return total;

    const std::int64_t chunks = (end - begin + kBatchChunk - 1) / kBatchChunk;
    std::vector<std::vector<LevelStats>> partial(static_cast<std::size_t>(chunks), total);

    auto run_chunk = [&](std::int64_t c) {
        auto& out = partial[static_cast<std::size_t>(c)];
        const std::int64_t lo = begin + c * kBatchChunk;
        const std::int64_t hi = std::min(end, lo + kBatchChunk);
        StreamKey key;
        key.seed = seed;
        key.level = static_cast<std::uint32_t>(level);
        for (std::int64_t i = lo; i < hi; ++i) {
            key.sample_index = static_cast<std::uint64_t>(i);
            detail::add_sample(std::span<LevelStats>(out), sampler, key);
        }
    };

    const int threads = static_cast<int>(std::min<std::int64_t>(std::max(workers, 1), chunks));
    if (threads <= 1) {
        for (std::int64_t c = 0; c < chunks; ++c)
            run_chunk(c);
    } else {
        std::atomic<std::int64_t> next{0};
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::int64_t c; (c = next.fetch_add(1)) < chunks;)
                        run_chunk(c);
                } catch (...) {
                    errors[static_cast<std::size_t>(t)] = std::current_exception();
                    next.store(chunks);
                }
            });
        }
        for (auto& th : pool)
            th.join();
        for (const auto& e : errors)
            if (e)
                std::rethrow_exception(e);
    }

    for (const auto& p : partial)
        for (std::size_t m = 0; m < outputs; ++m)
            total[m] += p[m];
    return total;
}

}  // namespace mlmc
