#include "semreg/common.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace semreg {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorKind::InsufficientObservations: return "InsufficientObservations";
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::EmptyObservations: return "EmptyObservations";
    case ErrorKind::EmptyView: return "EmptyView";
    case ErrorKind::NoValidViews: return "NoValidViews";
    case ErrorKind::TrackingLost: return "TrackingLost";
    case ErrorKind::EmptyCrop: return "EmptyCrop";
    case ErrorKind::NoCorrespondences: return "NoCorrespondences";
    case ErrorKind::AllCandidatesFailed: return "AllCandidatesFailed";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

namespace {
std::atomic<int> g_threads{0};
}

void set_num_threads(int n) { g_threads = std::max(0, n); }

int num_threads() {
  int n = g_threads.load();
  if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return n;
}

void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  grain = std::max<std::size_t>(grain, 1);
  const std::size_t chunks = (n + grain - 1) / grain;
  const int workers = static_cast<int>(std::min<std::size_t>(chunks, num_threads()));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c * grain, std::min(n, (c + 1) * grain));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    try {
      for (std::size_t c = next++; c < chunks; c = next++)
        fn(c * grain, std::min(n, (c + 1) * grain));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = chunks;
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int i = 1; i < workers; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace semreg
