#ifndef SPIN_GEOMETRY_HPP
#define SPIN_GEOMETRY_HPP

#include <cmath>
#include <cstdint>
#include <string>

#include "spin/core.hpp"
#include "spin/manifolds.hpp"
#include "spin/measurement.hpp"

namespace spin {

inline constexpr double kEqualPointsThreshold = 1e-14;

// Unit vector along the difference of two distinct points.
class Secant {
 public:
  const SignalVector& direction() const { return u_; }

  friend Secant make_secant(const SignalVector& a, const SignalVector& a_prime);

 private:
  explicit Secant(SignalVector u) : u_(std::move(u)) {}
  SignalVector u_;
};

inline Secant make_secant(const SignalVector& a, const SignalVector& a_prime) {
  require_same_size(a.size(), a_prime.size(), "secant endpoints");
  SignalVector d = a - a_prime;
  const double len = d.norm();
  require(len >= kEqualPointsThreshold, ErrorCode::EqualPoints,
          "secant undefined for coincident points");
  return Secant(d / len);
}

enum class EstimateKind { Incoherence, Rip, MutualCoherence };

inline const char* to_string(EstimateKind k) {
  switch (k) {
    case EstimateKind::Incoherence: return "incoherence";
    case EstimateKind::Rip: return "rip";
    case EstimateKind::MutualCoherence: return "mutual-coherence";
  }
  return "unknown";
}

struct GeometryEstimate {
  EstimateKind kind = EstimateKind::Incoherence;
  double value = 0.0;
  std::int64_t sample_count = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline constexpr int kDistinctAttempts = 64;

// Two distinct points of one manifold, drawn from derived seeds.
inline std::pair<SignalVector, SignalVector> distinct_pair(const ManifoldModel& m,
                                                           std::uint64_t seed) {
  SignalVector p = m.sample_point(derive_seed(seed, 0));
  for (int attempt = 1; attempt <= kDistinctAttempts; ++attempt) {
    SignalVector q = m.sample_point(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    if ((p - q).norm() >= kEqualPointsThreshold) return {std::move(p), std::move(q)};
  }
  throw Error(ErrorCode::DegenerateManifold, "manifold did not produce two distinct points");
}

}  // namespace detail

// Draws unit secants of the direct-sum manifold A + B.
class SumSecantSampler {
 public:
  SumSecantSampler(ManifoldModel a, ManifoldModel b) : a_(std::move(a)), b_(std::move(b)) {
    require_same_size(a_.dimension(), b_.dimension(), "sum manifold components");
  }

  Index dimension() const { return a_.dimension(); }

  // Unnormalized difference (a1 + b1) - (a2 + b2) for sample i.
  SignalVector difference(std::uint64_t seed, std::uint64_t i) const {
    const std::uint64_t s = derive_seed(seed, i);
    for (int attempt = 0; attempt < detail::kDistinctAttempts; ++attempt) {
      const std::uint64_t base = derive_seed(s, static_cast<std::uint64_t>(attempt));
      SignalVector d = a_.sample_point(derive_seed(base, 0)) + b_.sample_point(derive_seed(base, 1)) -
                       a_.sample_point(derive_seed(base, 2)) - b_.sample_point(derive_seed(base, 3));
      if (d.norm() >= kEqualPointsThreshold) return d;
    }
    throw Error(ErrorCode::DegenerateManifold, "sum manifold did not produce two distinct points");
  }

  Secant sample(std::uint64_t seed, std::uint64_t i) const {
    const SignalVector d = difference(seed, i);
    return make_secant(d, SignalVector::Zero(d.size()));
  }

 private:
  ManifoldModel a_;
  ManifoldModel b_;
};

// Sampled lower bound on the incoherence sup |<u, u'>| over secants u of A
// and u' of B. Pair i depends only on (seed, i), so growing n_pairs can only
// raise the estimate.
inline GeometryEstimate estimate_incoherence(const ManifoldModel& manifold_a,
                                             const ManifoldModel& manifold_b,
                                             std::int64_t n_pairs, std::uint64_t seed) {
  require(n_pairs >= 1, ErrorCode::InvalidArgument, "n_pairs must be positive");
  require_same_size(manifold_a.dimension(), manifold_b.dimension(), "incoherence manifolds");
  double best = 0.0;
  for (std::int64_t i = 0; i < n_pairs; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
    auto [a1, a2] = detail::distinct_pair(manifold_a, derive_seed(s, 0));
    auto [b1, b2] = detail::distinct_pair(manifold_b, derive_seed(s, 1));
    const Secant u = make_secant(a1, a2);
    const Secant v = make_secant(b1, b2);
    best = std::max(best, std::min(1.0, std::abs(u.direction().dot(v.direction()))));
  }
  return {EstimateKind::Incoherence, best, n_pairs, seed};
}

// Sampled lower bound on the RIP constant over secants of A + B:
// max |(||Phi d||^2 / ||d||^2) - 1|. Using the ratio keeps the identity
// operator at exactly zero.
inline GeometryEstimate estimate_rip(const MeasurementOperator& phi,
                                     const SumSecantSampler& secant_source, std::int64_t n_samples,
                                     std::uint64_t seed) {
  require(n_samples >= 1, ErrorCode::InvalidArgument, "n_samples must be positive");
  require_same_size(phi.cols(), secant_source.dimension(), "operator columns vs signal length");
  double best = 0.0;
  for (std::int64_t i = 0; i < n_samples; ++i) {
    const SignalVector d = secant_source.difference(seed, static_cast<std::uint64_t>(i));
    const double ratio = phi.apply(d).squaredNorm() / d.squaredNorm();
    best = std::max(best, std::abs(ratio - 1.0));
  }
  return {EstimateKind::Rip, best, n_samples, seed};
}

inline double mutual_coherence(const OrthonormalBasis& basis_a, const OrthonormalBasis& basis_b) {
  require_same_size(basis_a.size(), basis_b.size(), "basis sizes");
  if (basis_a.is_canonical() && basis_b.is_canonical()) return 1.0;
  if (basis_a.is_canonical()) return basis_b.matrix().cwiseAbs().maxCoeff();
  if (basis_b.is_canonical()) return basis_a.matrix().cwiseAbs().maxCoeff();
  return (basis_a.matrix().transpose() * basis_b.matrix()).cwiseAbs().maxCoeff();
}

// Validating overload for raw matrices.
inline double mutual_coherence(const Eigen::MatrixXd& basis_a, const Eigen::MatrixXd& basis_b) {
  return mutual_coherence(OrthonormalBasis::from_matrix(basis_a),
                          OrthonormalBasis::from_matrix(basis_b));
}

struct PairsBound {
  double epsilon_bound = 0.0;
  bool recoverable = false;
};

// Incoherence bound mu (K1 + K2) for sparse-in-basis pairs, and whether the
// total sparsity is under the sufficient recovery level 1 / (11 mu).
inline PairsBound pairs_bound(double mu, std::int64_t k1, std::int64_t k2) {
  require(mu > 0.0 && mu <= 1.0, ErrorCode::InvalidArgument, "mu must lie in (0, 1]");
  require(k1 >= 0 && k2 >= 0, ErrorCode::InvalidArgument, "sparsities must be nonnegative");
  const double total = static_cast<double>(k1 + k2);
  return {mu * total, total < 1.0 / (11.0 * mu)};
}

// delta < (1 - 11 eps) / (3 + 7 eps), which in particular forces eps < 1/11.
inline bool recovery_condition(double delta, double epsilon) {
  if (!(delta >= 0.0) || !(epsilon >= 0.0) || epsilon > 1.0) return false;
  if (!(epsilon < 1.0 / 11.0)) return false;
  return delta < (1.0 - 11.0 * epsilon) / (3.0 + 7.0 * epsilon);
}

struct ConvergenceConstants {
  double alpha = 0.0;
  double c_noise = 0.0;
  double beta = 0.0;
};

// Thrown when alpha >= 1; carries the computed alpha and C.
class DivergentError : public Error {
 public:
  DivergentError(double alpha, double c_noise)
      : Error(ErrorCode::Divergent, "alpha = " + std::to_string(alpha) + " >= 1, beta undefined"),
        alpha_(alpha), c_noise_(c_noise) {}
  double alpha() const noexcept { return alpha_; }
  double c_noise() const noexcept { return c_noise_; }

 private:
  double alpha_;
  double c_noise_;
};

// Per-iteration contraction psi_{k+1} <= alpha psi_k + C ||e||^2 and the
// asymptotic noise gain beta = C / (1 - alpha).
inline ConvergenceConstants convergence_constants(double delta, double epsilon) {
  require(delta >= 0.0 && delta < 1.0 && epsilon >= 0.0 && epsilon < 1.0,
          ErrorCode::SingularDenominator, "requires 0 <= delta < 1 and 0 <= epsilon < 1");
  const double ratio = (1.0 + delta) / (1.0 - delta) * (epsilon / (1.0 - epsilon));
  const double denom = 1.0 - 4.0 * ratio;
  require(denom > 0.0, ErrorCode::SingularDenominator, "shared denominator is not positive");
  const double alpha = (2.0 * delta / (1.0 - delta) + 6.0 * ratio) / denom;
  const double c_noise = (0.5 + 5.0 * ratio) / denom;
  if (alpha >= 1.0) throw DivergentError(alpha, c_noise);
  return {alpha, c_noise, c_noise / (1.0 - alpha)};
}

// ceil(log(||z||^2 / (2 nu)) / log(1 / alpha)), clamped below at zero.
inline std::int64_t iteration_bound(double z_norm_sq, double nu, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  require(nu > 0.0 && z_norm_sq >= 0.0, ErrorCode::InvalidArgument, "nu > 0, ||z||^2 >= 0");
  const double ratio = z_norm_sq / (2.0 * nu);
  if (ratio <= 1.0) return 0;
  const double t = std::ceil(std::log(ratio) / std::log(1.0 / alpha));
  return t <= 0.0 ? 0 : static_cast<std::int64_t>(t);
}

// Measurement count heuristic ceil(c (K_a + K_b) ln N).
inline std::int64_t suggest_measurements(std::int64_t k_a, std::int64_t k_b, std::int64_t n,
                                         double c = 1.5) {
  require(n >= 2 && k_a >= 0 && k_b >= 0 && c > 0.0, ErrorCode::InvalidArgument,
          "suggest_measurements arguments");
  return static_cast<std::int64_t>(
      std::ceil(c * static_cast<double>(k_a + k_b) * std::log(static_cast<double>(n))));
}

}  // namespace spin

#endif  // SPIN_GEOMETRY_HPP
