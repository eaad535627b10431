#ifndef SWARM_INIT_PARALLEL_HPP
#define SWARM_INIT_PARALLEL_HPP

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace swarm_init {

/// Runs job(i) for i in [0, count) on up to `threads` workers. Index i always
/// goes to worker i mod threads, and no two workers share an index.
template <class Job>
void parallel_for(int count, int threads, Job&& job) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) job(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int i = t; i < count; i += threads) job(i);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace swarm_init

#endif  // SWARM_INIT_PARALLEL_HPP
