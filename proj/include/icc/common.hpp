#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace icc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// 1 ksi in MPa; used when converting the tabulated ksi inputs.
inline constexpr double kKsiToMPa = 6.894757293168361;

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, int iterations)
      : std::runtime_error(what), iterations(iterations) {}
  int iterations;
};

class MeshError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// splitmix64; used to derive independent seed streams per purpose so that
// changing one sampling budget never perturbs another stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_str(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named stream derivation: seed -> purpose -> optional indices.
inline std::uint64_t derive_seed(std::uint64_t master, const std::string& purpose,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(master ^ hash_str(purpose));
  h = splitmix64(h ^ a);
  return splitmix64(h ^ b);
}

// Static-partition parallel loop. Work items must be independent; callers
// that need deterministic output reduce results in index order afterwards.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                         int threads = 0) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  if (n == 0) return;
  if (threads == 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t nt = std::min<std::size_t>(threads, n);
  pool.reserve(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += nt) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Process-wide default worker count, set once by the CLI --threads flag.
int default_threads();
void set_default_threads(int n);

}  // namespace icc
