#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace riskbo {

inline constexpr const char* kVersion = "0.3.0";

// Error hierarchy. Every failure the engine reports derives from Error so
// callers can catch at the granularity they need.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error
{
public:
  ParseError(const std::string& msg, std::size_t line)
    : Error("line " + std::to_string(line) + ": " + msg), line_(line)
  {
  }
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

struct SchemaError : Error { using Error::Error; };
struct DegenerateError : Error { using Error::Error; };
struct SizeError : Error { using Error::Error; };
struct EncodingError : Error { using Error::Error; };
struct CoverageError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct TrainingError : Error { using Error::Error; };
struct OptimizerError : Error { using Error::Error; };
struct PairingError : Error { using Error::Error; };
struct SearchError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

inline void log_warning(std::string_view msg)
{
  std::cerr << "warning: " << msg << '\n';
}

inline void log_info(std::string_view msg)
{
  std::cerr << msg << '\n';
}

// splitmix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept
{
  return mix64(mix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x2545f4914f6cdd1dULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::uint64_t a,
                                    std::uint64_t b) noexcept
{
  return derive_seed(derive_seed(seed, a), b);
}

// FNV-1a, 64 bit.
class Digest
{
public:
  Digest& update(const void* data, std::size_t n) noexcept
  {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Digest& update(std::string_view s) noexcept
  {
    update(s.data(), s.size());
    const char sep = '\x1f';
    return update(&sep, 1);
  }
  Digest& update(double v) noexcept { return update(&v, sizeof v); }
  Digest& update(std::uint64_t v) noexcept { return update(&v, sizeof v); }

  std::uint64_t value() const noexcept { return h_; }
  std::string hex() const
  {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    auto v = h_;
    for (int i = 15; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = digits[v & 0xf];
      v >>= 4;
    }
    return out;
  }

private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

// Number of elements in the ceil(frac * n) convention, clamped to [1, n].
// The epsilon absorbs representation error such as 0.1 * 30 = 3.0000000000000004.
inline std::size_t ceil_count(double frac, std::size_t n)
{
  const double raw = frac * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  if (k < 1) k = 1;
  if (k > n) k = n;
  return k;
}

inline double mean_of(std::span<const double> v)
{
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

} // namespace riskbo
