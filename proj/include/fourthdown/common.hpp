#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fourthdown {

/// Schema-level or configuration failure; aborts the whole operation.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model fit that cannot produce a usable estimate (separation, empty pool, ...).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid caller-supplied game state or argument.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent sub-seeds from (seed, index).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// std distributions are implementation-defined; these two keep draws
// reproducible across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

enum class LogLevel { debug, info, warn, error };

void set_log_level(LogLevel level);
void log(LogLevel level, std::string_view msg);
inline void log_info(std::string_view msg) { log(LogLevel::info, msg); }
inline void log_warn(std::string_view msg) { log(LogLevel::warn, msg); }

/// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(std::string_view bytes);
/// SHA-256 of a file's contents; throws SchemaError when unreadable.
std::string file_sha256(const std::string& path);

}  // namespace fourthdown
