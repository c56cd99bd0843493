#ifndef SPIN_TESTS_ORACLES_HPP
#define SPIN_TESTS_ORACLES_HPP

// Slow reference computations used to check the library's fast paths.

#include <limits>
#include <vector>

#include "spin/manifolds.hpp"

namespace oracle {

using spin::Index;
using spin::SignalVector;

struct SupportHit {
  std::vector<Index> support;
  double distance_sq = std::numeric_limits<double>::infinity();
};

// Every K-subset in lexicographic order; the first minimum wins.
inline SupportHit best_support(const spin::OrthonormalBasis& basis, Index k, const SignalVector& x) {
  const Index n = basis.size();
  const Eigen::MatrixXd b = basis.matrix();
  SupportHit best;
  std::vector<Index> s(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) s[static_cast<std::size_t>(i)] = i;
  for (;;) {
    // Least-squares fit on the chosen atoms, which for orthonormal atoms is
    // the sum of <b_i, x> b_i.
    SignalVector p = SignalVector::Zero(n);
    for (Index i : s) p += b.col(i).dot(x) * b.col(i);
    const double d = (p - x).squaredNorm();
    if (d < best.distance_sq) best = {s, d};
    Index pos = k - 1;
    while (pos >= 0 && s[static_cast<std::size_t>(pos)] == n - k + pos) --pos;
    if (pos < 0) break;
    ++s[static_cast<std::size_t>(pos)];
    for (Index j = pos + 1; j < k; ++j) s[static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

struct ShiftHit {
  Index row = 0;
  Index col = 0;
  double distance_sq = std::numeric_limits<double>::infinity();
};

// Direct circular shift written independently of the library.
inline SignalVector shifted(const SignalVector& f, Index h, Index w, Index dr, Index dc) {
  SignalVector out(f.size());
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) out[((r + dr) % h) * w + (c + dc) % w] = f[r * w + c];
  return out;
}

// Scan all shifts in flat order; the first minimum wins.
inline ShiftHit best_shift(const SignalVector& f, Index h, Index w, const SignalVector& x) {
  ShiftHit best;
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      const double d = (shifted(f, h, w, r, c) - x).squaredNorm();
      if (d < best.distance_sq) best = {r, c, d};
    }
  }
  return best;
}

// Dense circular convolution with a normalized Gaussian of radius ceil(4 sigma).
inline SignalVector dense_blur(const SignalVector& img, Index h, Index w, double sigma) {
  const Index rad = static_cast<Index>(std::ceil(4.0 * sigma));
  double total = 0.0;
  for (Index a = -rad; a <= rad; ++a)
    for (Index b = -rad; b <= rad; ++b) total += std::exp(-double(a * a + b * b) / (2 * sigma * sigma));
  SignalVector out = SignalVector::Zero(img.size());
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      double acc = 0.0;
      for (Index a = -rad; a <= rad; ++a) {
        for (Index b = -rad; b <= rad; ++b) {
          const Index sr = ((r - a) % h + h) % h;
          const Index sc = ((c - b) % w + w) % w;
          acc += img[sr * w + sc] * std::exp(-double(a * a + b * b) / (2 * sigma * sigma));
        }
      }
      out[r * w + c] = acc / total;
    }
  }
  return out;
}

inline double brute_mutual_coherence(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double best = 0.0;
  for (Index i = 0; i < a.cols(); ++i) {
    for (Index j = 0; j < b.cols(); ++j) {
      double dot = 0.0;
      for (Index r = 0; r < a.rows(); ++r) dot += a(r, i) * b(r, j);
      best = std::max(best, std::abs(dot));
    }
  }
  return best;
}

}  // namespace oracle

#endif  // SPIN_TESTS_ORACLES_HPP
