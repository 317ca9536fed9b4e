#include "mfbsde/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace mfbsde {

void parallel_blocks(std::size_t count, unsigned workers,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    const std::size_t blocks = block_count(count);
    auto run = [&](std::size_t b) { fn(b * kBlockRows, std::min(count, (b + 1) * kBlockRows), b); };
    if (workers <= 1 || blocks <= 1) {
        for (std::size_t b = 0; b < blocks; ++b) run(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t b = next++; b < blocks; b = next++) run(b);
    };
    std::vector<std::thread> pool;
    const unsigned used = static_cast<unsigned>(std::min<std::size_t>(workers, blocks));
    pool.reserve(used - 1);
    for (unsigned w = 1; w < used; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

double tree_sum(std::span<const double> values) {
    constexpr std::size_t leaf = 128;
    if (values.size() <= leaf) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    std::size_t mid = ((values.size() / 2 + leaf - 1) / leaf) * leaf;
    if (mid >= values.size()) mid = leaf;
    return tree_sum(values.first(mid)) + tree_sum(values.subspan(mid));
}

}  // namespace mfbsde
