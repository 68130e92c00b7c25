#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace efsa {

enum class ErrorKind {
  shape,
  config,
  contract,
  ingest,
  lookup,
  degenerate,
  adaptation,
  training,
  missing_artifact,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t state = kFnvOffset);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset);

std::uint64_t splitmix64(std::uint64_t x);

std::string hex_u64(std::uint64_t v);

// Deterministic RNG with hand-rolled distributions so generated values depend
// only on the seed, not on the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) {
    double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  // Uniform integer in [0, n).
  std::int64_t uniform_index(std::int64_t n) {
    return static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(n));
  }

  double gaussian();

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Runs fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries are a
// function of n and chunk size only, so outputs written per index are
// identical for any thread count. Exceptions from workers are rethrown.
void parallel_for(std::int64_t n, int threads, std::int64_t chunk,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace efsa
