#ifndef MPMFG_PARALLEL_HPP
#define MPMFG_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mpmfg {

/// Worker-count setting threaded through the simulators. 1 means serial.
struct Execution {
   std::size_t threads = 1;
};

/// Runs fn(i) for i in [0, n) over contiguous chunks. Each index must write only
/// its own output slot; results are then independent of the thread count.
template < class Fn >
void parallel_for(std::size_t n, const Execution& exec, Fn&& fn)
{
   const std::size_t workers = std::min(std::max< std::size_t >(exec.threads, 1), n);
   if(workers <= 1) {
      for(std::size_t i = 0; i < n; ++i) fn(i);
      return;
   }
   std::exception_ptr error;
   std::mutex error_mutex;
   std::vector< std::thread > pool;
   pool.reserve(workers);
   const std::size_t chunk = (n + workers - 1) / workers;
   for(std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      if(lo >= hi) break;
      pool.emplace_back([&, lo, hi] {
         try {
            for(std::size_t i = lo; i < hi; ++i) fn(i);
         } catch(...) {
            std::lock_guard lock(error_mutex);
            if(! error) error = std::current_exception();
         }
      });
   }
   for(auto& t : pool) t.join();
   if(error) std::rethrow_exception(error);
}

}  // namespace mpmfg

#endif  // MPMFG_PARALLEL_HPP
