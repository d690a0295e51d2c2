#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tradebench {

// Error with a machine-readable kind ("invalid-horizon", "malformed-input", ...).
// Tests and the CLI dispatch on kind(); what() carries the human detail.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

[[noreturn]] inline void fail(std::string kind, const std::string& message) {
  throw Error(std::move(kind), message);
}

// 64-bit FNV-1a. Used for prompt/cache keys, content hashes and symbol salts.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64_update(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;

std::string to_hex(std::uint64_t value);

// splitmix64 step; advances state and returns the next output.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Child-seed derivation. index 0 maps to the base seed itself so that the
// first grid element is reproducible from the configured seed alone.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
  if (index == 0) return base;
  std::uint64_t s = index;
  return base ^ splitmix64(s);
}

// Deterministic generator. Everything is built on splitmix64 so streams are
// bit-stable across compilers and standard libraries; std::normal_distribution
// is deliberately avoided (its algorithm is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double normal();                        // Box-Muller, 2 draws per variate
  double student_t(int nu);               // Z / sqrt(chi2_nu / nu)
  double unit_student_t(int nu);          // student_t scaled to unit variance
  double lognormal(double mu, double sigma);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t state_;
};

// Fixed-format helpers used everywhere a number reaches a file. Keeping the
// formatting in one place is what makes reruns byte-identical.
std::string format_full(double value);    // round-trip precision, %.17g trimmed
std::string format_fixed(double value, int decimals);

}  // namespace tradebench
