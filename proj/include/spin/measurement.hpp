#ifndef SPIN_MEASUREMENT_HPP
#define SPIN_MEASUREMENT_HPP

#include <memory>
#include <optional>

#include "spin/core.hpp"

namespace spin {

// Linear map Phi: R^N -> R^M. Either the identity or a dense row-major
// Gaussian matrix that is fully determined by (m, n, seed).
class MeasurementOperator {
 public:
  enum class Kind { Identity, DenseGaussian };

  static MeasurementOperator identity(Index n) {
    require(n >= 1, ErrorCode::InvalidArgument, "dimension must be positive");
    MeasurementOperator op;
    op.kind_ = Kind::Identity;
    op.m_ = n;
    op.n_ = n;
    return op;
  }

  // Entries iid N(0, 1/m), drawn row by row from one seeded stream, so the
  // first rows of a taller operator coincide (up to scale) with a shorter one
  // built from the same seed. m = 0 yields the empty operator.
  static MeasurementOperator gaussian(Index m, Index n, std::uint64_t seed) {
    require(m >= 0 && n >= 1, ErrorCode::InvalidArgument, "operator dimensions");
    MeasurementOperator op;
    op.kind_ = Kind::DenseGaussian;
    op.m_ = m;
    op.n_ = n;
    op.seed_ = seed;
    auto rows = std::make_shared<Matrix>(m, n);
    if (m > 0) {
      Rng rng(seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      const double scale = 1.0 / std::sqrt(static_cast<double>(m));
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) (*rows)(i, j) = normal(rng) * scale;
    }
    op.rows_ = std::move(rows);
    return op;
  }

  static MeasurementOperator from_matrix(Matrix rows) {
    MeasurementOperator op;
    op.kind_ = Kind::DenseGaussian;
    op.m_ = rows.rows();
    op.n_ = rows.cols();
    op.rows_ = std::make_shared<Matrix>(std::move(rows));
    return op;
  }

  Kind kind() const { return kind_; }
  Index rows() const { return m_; }
  Index cols() const { return n_; }
  std::optional<std::uint64_t> seed() const { return seed_; }

  const Matrix& matrix() const {
    require(kind_ == Kind::DenseGaussian, ErrorCode::InvalidArgument, "identity has no matrix");
    return *rows_;
  }

  SignalVector apply(const SignalVector& x) const {
    require_same_size(x.size(), n_, "operator apply");
    if (kind_ == Kind::Identity) return x;
    return *rows_ * x;
  }

  SignalVector adjoint(const SignalVector& r) const {
    require_same_size(r.size(), m_, "operator adjoint");
    if (kind_ == Kind::Identity) return r;
    if (m_ == 0) return SignalVector::Zero(n_);
    return rows_->transpose() * r;
  }

 private:
  Kind kind_ = Kind::Identity;
  Index m_ = 0;
  Index n_ = 0;
  std::optional<std::uint64_t> seed_;
  std::shared_ptr<const Matrix> rows_;
};

inline MeasurementOperator gaussian_operator(Index m, Index n, std::uint64_t seed) {
  return MeasurementOperator::gaussian(m, n, seed);
}

inline SignalVector apply(const MeasurementOperator& phi, const SignalVector& x) {
  return phi.apply(x);
}

inline SignalVector adjoint(const MeasurementOperator& phi, const SignalVector& r) {
  return phi.adjoint(r);
}

struct NoiseSpec {
  std::optional<double> snr_db;
  std::uint64_t seed = 0;
};

// iid Gaussian noise rescaled so that 10 log10(||reference||^2 / ||e||^2)
// equals snr_db exactly; zeros when no SNR is given.
inline SignalVector synthesize_noise(const SignalVector& reference, const NoiseSpec& spec) {
  if (!spec.snr_db) return SignalVector::Zero(reference.size());
  require(std::isfinite(*spec.snr_db), ErrorCode::InvalidArgument, "snr_db must be finite");
  const double ref_energy = reference.squaredNorm();
  require(ref_energy > 0.0, ErrorCode::ZeroReference, "reference signal has zero norm");
  SignalVector e = gaussian_vector(reference.size(), spec.seed);
  const double target = ref_energy * std::pow(10.0, -*spec.snr_db / 10.0);
  e *= std::sqrt(target / e.squaredNorm());
  return e;
}

}  // namespace spin

#endif  // SPIN_MEASUREMENT_HPP
