#ifndef SPIN_CORE_HPP
#define SPIN_CORE_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace spin {

// Finite real sequence of length N. Every operation in the library consumes
// and produces these.
using SignalVector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

enum class ErrorCode {
  DimensionMismatch,
  EqualPoints,
  DegenerateManifold,
  NotOrthonormal,
  Divergent,
  SingularDenominator,
  TemplateTooLarge,
  ZeroReference,
  ZeroTruth,
  NonFiniteIterate,
  InvalidArgument,
  Config,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EqualPoints: return "EqualPoints";
    case ErrorCode::DegenerateManifold: return "DegenerateManifold";
    case ErrorCode::NotOrthonormal: return "NotOrthonormal";
    case ErrorCode::Divergent: return "Divergent";
    case ErrorCode::SingularDenominator: return "SingularDenominator";
    case ErrorCode::TemplateTooLarge: return "TemplateTooLarge";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::ZeroTruth: return "ZeroTruth";
    case ErrorCode::NonFiniteIterate: return "NonFiniteIterate";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

inline void require_same_size(Index a, Index b, const char* context) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch, std::string(context) + " (" + std::to_string(a) +
                                                   " vs " + std::to_string(b) + ")");
  }
}

inline bool all_finite(const SignalVector& v) { return v.allFinite(); }

// Seeding. Every randomized construction takes a 64-bit seed; derived
// streams are produced by mixing (seed, index) so that per-trial and
// per-sample randomness is independent of evaluation order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ (index * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

inline SignalVector gaussian_vector(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SignalVector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline SignalVector gaussian_vector(Index n, std::uint64_t seed) {
  Rng rng(seed);
  return gaussian_vector(n, rng);
}

}  // namespace spin

#endif  // SPIN_CORE_HPP
