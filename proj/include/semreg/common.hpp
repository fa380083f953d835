#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace semreg {

/// Failure categories surfaced by the library. The CLI maps these onto exit codes.
enum class ErrorKind {
  InvalidArgument,
  NonPositiveDepth,
  InsufficientObservations,
  DegenerateGeometry,
  EmptyObservations,
  EmptyView,
  NoValidViews,
  TrackingLost,
  EmptyCrop,
  NoCorrespondences,
  AllCandidatesFailed,
  UnknownLabel,
  IoFailure,
  ParseError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Worker count used by parallel_for. 0 selects hardware concurrency.
void set_num_threads(int n);
int num_threads();

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries depend
/// only on n and grain, never on the thread count, so per-chunk partial results
/// can be reduced in a fixed order.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace semreg
