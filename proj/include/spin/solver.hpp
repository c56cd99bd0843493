#ifndef SPIN_SOLVER_HPP
#define SPIN_SOLVER_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "spin/core.hpp"
#include "spin/manifolds.hpp"
#include "spin/measurement.hpp"

namespace spin {

enum class StopRule { FixedIterations, PsiThreshold, RelativeChange };

inline const char* to_string(StopRule r) {
  switch (r) {
    case StopRule::FixedIterations: return "fixed-T";
    case StopRule::PsiThreshold: return "psi-threshold";
    case StopRule::RelativeChange: return "relative-change";
  }
  return "unknown";
}

struct SpinConfig {
  double eta = 0.6;
  std::int64_t max_iters = 500;
  double nu = 1e-10;
  StopRule stop_rule = StopRule::RelativeChange;
  double relative_tol = 1e-8;
  double gamma_a = 0.0;
  double gamma_b = 0.0;
  // Keep every iterate (a_k, b_k), k >= 1, in the result.
  bool record_iterates = false;

  void validate() const {
    require(eta > 0.0 && std::isfinite(eta), ErrorCode::InvalidArgument, "eta must be positive");
    require(nu > 0.0, ErrorCode::InvalidArgument, "nu must be positive");
    require(max_iters >= 1, ErrorCode::InvalidArgument, "max_iters must be positive");
    require(relative_tol >= 0.0, ErrorCode::InvalidArgument, "relative_tol must be nonnegative");
    require(gamma_a >= 0.0 && gamma_b >= 0.0, ErrorCode::InvalidArgument,
            "gamma must be nonnegative");
  }
};

struct SpinResult {
  SignalVector a_hat;
  SignalVector b_hat;
  // psi_trace[0] = ||z||^2 / 2, then one entry per iteration.
  std::vector<double> psi_trace;
  std::int64_t iterations_run = 0;
  bool converged = false;
  Parameter parameter_a;
  Parameter parameter_b;
  std::vector<SignalVector> iterates_a;
  std::vector<SignalVector> iterates_b;

  double final_psi() const { return psi_trace.back(); }
};

// psi(a, b) = 1/2 ||z - Phi(a + b)||^2
inline double psi(const SignalVector& z, const MeasurementOperator& phi, const SignalVector& a,
                  const SignalVector& b) {
  require_same_size(a.size(), b.size(), "psi components");
  require_same_size(z.size(), phi.rows(), "psi measurements");
  return 0.5 * (z - phi.apply(a + b)).squaredNorm();
}

// Successive projections onto two manifolds. Starting from a = b = 0, each
// iteration takes the gradient step g = eta Phi^T (z - Phi(a + b)), adds the
// same g to both components and projects each proxy back onto its manifold.
// Note the sign: g is minus eta times the gradient of psi.
inline SpinResult spin(const SignalVector& z, const MeasurementOperator& phi,
                       const ManifoldModel& manifold_a, const ManifoldModel& manifold_b,
                       const SpinConfig& config) {
  config.validate();
  require_same_size(z.size(), phi.rows(), "measurements vs operator rows");
  require_same_size(manifold_a.dimension(), phi.cols(), "manifold A vs operator columns");
  require_same_size(manifold_b.dimension(), phi.cols(), "manifold B vs operator columns");
  require(z.allFinite(), ErrorCode::InvalidArgument, "measurements must be finite");

  const Index n = phi.cols();
  SpinResult res;
  res.a_hat = SignalVector::Zero(n);
  res.b_hat = SignalVector::Zero(n);
  SignalVector r = z;
  double psi_k = 0.5 * r.squaredNorm();
  res.psi_trace.push_back(psi_k);

  // The zero initialization already explains z exactly.
  if (psi_k == 0.0) {
    res.converged = true;
    return res;
  }

  for (std::int64_t k = 0; k < config.max_iters; ++k) {
    const SignalVector g = config.eta * phi.adjoint(r);
    ProjectionOutcome pa = manifold_a.project_gamma(res.a_hat + g, config.gamma_a);
    ProjectionOutcome pb = manifold_b.project_gamma(res.b_hat + g, config.gamma_b);
    res.a_hat = std::move(pa.point);
    res.b_hat = std::move(pb.point);
    res.parameter_a = std::move(pa.parameter);
    res.parameter_b = std::move(pb.parameter);
    if (!res.a_hat.allFinite() || !res.b_hat.allFinite()) {
      throw Error(ErrorCode::NonFiniteIterate,
                  "iterate " + std::to_string(k + 1) + " is not finite; step size too large?");
    }
    r = z - phi.apply(res.a_hat + res.b_hat);
    const double psi_next = 0.5 * r.squaredNorm();
    require(std::isfinite(psi_next), ErrorCode::NonFiniteIterate, "psi is not finite");
    res.psi_trace.push_back(psi_next);
    res.iterations_run = k + 1;
    if (config.record_iterates) {
      res.iterates_a.push_back(res.a_hat);
      res.iterates_b.push_back(res.b_hat);
    }

    bool stop = false;
    switch (config.stop_rule) {
      case StopRule::FixedIterations:
        break;
      case StopRule::PsiThreshold:
        stop = psi_next <= config.nu;
        break;
      case StopRule::RelativeChange:
        stop = psi_next == 0.0 || std::abs(psi_k - psi_next) <= config.relative_tol * psi_k;
        break;
    }
    psi_k = psi_next;
    if (stop) {
      res.converged = true;
      return res;
    }
  }
  res.converged = config.stop_rule == StopRule::FixedIterations;
  return res;
}

inline constexpr double kSnrCapDb = 300.0;

// 10 log10(||truth||^2 / ||estimate - truth||^2), clamped to +-300 dB.
inline double recovery_snr(const SignalVector& truth, const SignalVector& estimate) {
  require_same_size(truth.size(), estimate.size(), "recovery_snr");
  const double energy = truth.squaredNorm();
  require(energy > 0.0, ErrorCode::ZeroTruth, "truth has zero norm");
  const double err = (estimate - truth).squaredNorm();
  if (err == 0.0) return kSnrCapDb;
  return std::clamp(10.0 * std::log10(energy / err), -kSnrCapDb, kSnrCapDb);
}

}  // namespace spin

#endif  // SPIN_SOLVER_HPP
