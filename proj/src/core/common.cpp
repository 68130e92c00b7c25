#include "core/common.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace efsa {

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t state) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = state;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= static_cast<std::uint64_t>(p[i]);
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state) {
  return fnv1a64(bytes.data(), bytes.size(), state);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string hex_u64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform(0.0, 1.0);
  } while (u1 <= 0.0);
  double u2 = uniform(0.0, 1.0);
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

void parallel_for(std::int64_t n, int threads, std::int64_t chunk,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  if (chunk <= 0) chunk = 1;
  std::int64_t n_chunks = (n + chunk - 1) / chunk;
  if (threads <= 1 || n_chunks <= 1) {
    for (std::int64_t c = 0; c < n_chunks; ++c) {
      std::int64_t lo = c * chunk;
      fn(lo, std::min(n, lo + chunk));
    }
    return;
  }

  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> workers;
  std::int64_t per_worker = std::min<std::int64_t>(threads, n_chunks);
  for (std::int64_t w = 0; w < per_worker; ++w) {
    workers.emplace_back([&, w]() {
      try {
        for (std::int64_t c = w; c < n_chunks; c += per_worker) {
          std::int64_t lo = c * chunk;
          fn(lo, std::min(n, lo + chunk));
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace efsa
