#ifndef SPIN_CIRCULAR_HPP
#define SPIN_CIRCULAR_HPP

#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "spin/core.hpp"

// Circular (toroidal) shifts and FFT-based circular cross-correlation on
// H x W grids stored row-major. One-dimensional signals use H = 1.
namespace spin::circular {

using Complex = std::complex<double>;
using Spectrum = std::vector<Complex>;

struct Grid {
  Index height = 1;
  Index width = 0;

  Index size() const { return height * width; }
  bool operator==(const Grid&) const = default;
};

// out[(r + dr) mod H, (c + dc) mod W] = f[r, c]
inline SignalVector shift(const SignalVector& f, const Grid& g, Index dr, Index dc) {
  require_same_size(f.size(), g.size(), "circular shift");
  SignalVector out(f.size());
  for (Index r = 0; r < g.height; ++r) {
    const Index rr = (r + dr) % g.height;
    for (Index c = 0; c < g.width; ++c) {
      out[rr * g.width + (c + dc) % g.width] = f[r * g.width + c];
    }
  }
  return out;
}

namespace detail {

inline Eigen::FFT<double>& engine() {
  // The plan cache inside Eigen::FFT is not synchronized.
  thread_local Eigen::FFT<double> fft;
  return fft;
}

inline void transform(Spectrum& data, const Grid& g, bool inverse) {
  auto& fft = engine();
  Spectrum line_in(static_cast<std::size_t>(std::max(g.height, g.width)));
  Spectrum line_out(line_in.size());
  if (g.width > 1) {
    for (Index r = 0; r < g.height; ++r) {
      Complex* row = data.data() + r * g.width;
      std::copy(row, row + g.width, line_in.begin());
      if (inverse) {
        fft.inv(line_out.data(), line_in.data(), g.width);
      } else {
        fft.fwd(line_out.data(), line_in.data(), g.width);
      }
      std::copy(line_out.begin(), line_out.begin() + g.width, row);
    }
  }
  if (g.height > 1) {
    for (Index c = 0; c < g.width; ++c) {
      for (Index r = 0; r < g.height; ++r) line_in[r] = data[r * g.width + c];
      if (inverse) {
        fft.inv(line_out.data(), line_in.data(), g.height);
      } else {
        fft.fwd(line_out.data(), line_in.data(), g.height);
      }
      for (Index r = 0; r < g.height; ++r) data[r * g.width + c] = line_out[r];
    }
  }
}

}  // namespace detail

inline Spectrum forward(const SignalVector& x, const Grid& g) {
  require_same_size(x.size(), g.size(), "forward transform");
  Spectrum data(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i) data[i] = Complex(x[i], 0.0);
  detail::transform(data, g, false);
  return data;
}

// c[dr * W + dc] = <shift(f, dr, dc), x> for every circular shift, given the
// forward spectrum of f.
inline SignalVector correlate(const Spectrum& f_hat, const SignalVector& x, const Grid& g) {
  Spectrum data = forward(x, g);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] *= std::conj(f_hat[i]);
  detail::transform(data, g, true);
  SignalVector c(x.size());
  for (Index i = 0; i < x.size(); ++i) c[i] = data[i].real();
  return c;
}

// Direct O(N^2) version of correlate(); used when the FFT route is not worth it.
inline double correlation_at(const SignalVector& f, const SignalVector& x, const Grid& g, Index dr,
                             Index dc) {
  double acc = 0.0;
  for (Index r = 0; r < g.height; ++r) {
    const Index rr = (r + dr) % g.height;
    for (Index c = 0; c < g.width; ++c) {
      acc += f[r * g.width + c] * x[rr * g.width + (c + dc) % g.width];
    }
  }
  return acc;
}

}  // namespace spin::circular

#endif  // SPIN_CIRCULAR_HPP
