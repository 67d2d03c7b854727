#include "endofair/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace endofair {

std::size_t thread_budget() {
    static const std::size_t n = [] {
        if (const char* env = std::getenv("ENDOFAIR_THREADS")) {
            const long v = std::atol(env);
            if (v >= 1) return static_cast<std::size_t>(v);
        }
        const unsigned hc = std::thread::hardware_concurrency();
        return static_cast<std::size_t>(hc ? hc : 1);
    }();
    return n;
}

namespace {

thread_local bool in_worker = false;

// One shared pool, lazily started. Work items are half-open index ranges of a
// single parallel_for call; the caller participates and waits for completion.
class Pool {
public:
    static Pool& instance() {
        static Pool* pool = new Pool(thread_budget()); // leaked: workers live for the process
        return *pool;
    }

    void run(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& fn,
             std::size_t chunk) {
        std::unique_lock<std::mutex> lock(mu_);
        job_fn_ = &fn;
        job_next_.store(begin, std::memory_order_relaxed);
        job_end_ = end;
        job_chunk_ = chunk;
        active_ = workers_.size();
        ++generation_;
        cv_work_.notify_all();
        lock.unlock();

        work_loop(fn); // caller thread joins in

        std::unique_lock<std::mutex> wait_lock(mu_);
        cv_done_.wait(wait_lock, [this] { return active_ == 0; });
        job_fn_ = nullptr;
    }

private:
    explicit Pool(std::size_t threads) {
        for (std::size_t t = 1; t < threads; ++t)
            workers_.emplace_back([this] { worker_main(); });
    }

    void worker_main() {
        in_worker = true;
        std::size_t seen = 0;
        for (;;) {
            const std::function<void(std::size_t)>* fn = nullptr;
            {
                std::unique_lock<std::mutex> lock(mu_);
                cv_work_.wait(lock, [&] { return generation_ != seen; });
                seen = generation_;
                fn = job_fn_;
            }
            if (fn) work_loop(*fn);
            {
                std::lock_guard<std::mutex> lock(mu_);
                if (--active_ == 0) cv_done_.notify_all();
            }
        }
    }

    void work_loop(const std::function<void(std::size_t)>& fn) {
        for (;;) {
            const std::size_t i = job_next_.fetch_add(job_chunk_, std::memory_order_relaxed);
            if (i >= job_end_) return;
            const std::size_t stop = std::min(i + job_chunk_, job_end_);
            for (std::size_t k = i; k < stop; ++k) fn(k);
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable cv_work_, cv_done_;
    const std::function<void(std::size_t)>* job_fn_ = nullptr;
    std::atomic<std::size_t> job_next_{0};
    std::size_t job_end_ = 0;
    std::size_t job_chunk_ = 1;
    std::size_t active_ = 0;
    std::size_t generation_ = 0;
};

} // namespace

void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& fn,
                  std::size_t grain) {
    if (begin >= end) return;
    const std::size_t n = end - begin;
    if (in_worker || thread_budget() == 1 || n <= grain) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
        return;
    }
    const std::size_t chunk = std::max<std::size_t>(grain, n / (4 * thread_budget()) + 1);
    Pool::instance().run(begin, end, fn, chunk);
}

} // namespace endofair
