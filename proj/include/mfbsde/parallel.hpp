#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace mfbsde {

/// Rows per work block. Blocks are fixed by the data size alone, so the
/// partition (and therefore every reduction) is independent of the worker count.
inline constexpr std::size_t kBlockRows = 2048;

/// Calls fn(begin, end, block) for every block of [0, count), spreading blocks
/// over `workers` threads. Blocks must write to disjoint outputs.
void parallel_blocks(std::size_t count, unsigned workers,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

inline std::size_t block_count(std::size_t count) { return (count + kBlockRows - 1) / kBlockRows; }

/// Pairwise summation with fixed, size-determined association. Leaves hold
/// 128 consecutive values, so adjacent pairs are always summed together.
double tree_sum(std::span<const double> values);

/// Pairwise combination of per-block partials in a fixed order.
template <typename T>
T tree_combine(std::vector<T> parts) {
    if (parts.empty()) return T{};
    while (parts.size() > 1) {
        std::vector<T> next;
        next.reserve((parts.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < parts.size(); i += 2) next.push_back(parts[i] + parts[i + 1]);
        if (parts.size() % 2 == 1) next.push_back(parts.back());
        parts = std::move(next);
    }
    return parts.front();
}

}  // namespace mfbsde
