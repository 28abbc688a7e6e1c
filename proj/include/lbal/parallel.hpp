#ifndef LBAL_PARALLEL_HPP
#define LBAL_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lbal {

namespace detail {
inline std::atomic<unsigned> g_num_threads{1};
}

inline void set_num_threads(unsigned n) { detail::g_num_threads = std::max(1u, n); }
inline unsigned num_threads() { return detail::g_num_threads; }

// Runs fn(i) for i in [begin, end) over contiguous blocks. Callers only write
// to slot i, so results do not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, Fn&& fn) {
    const std::size_t count = end > begin ? end - begin : 0;
    const std::size_t workers = std::min<std::size_t>(num_threads(), count);
    if (workers <= 1 || count < 64) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t block = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = begin + w * block;
        const std::size_t hi = std::min(end, lo + block);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi, w] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace lbal

#endif  // LBAL_PARALLEL_HPP
