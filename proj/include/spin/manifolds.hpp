#ifndef SPIN_MANIFOLDS_HPP
#define SPIN_MANIFOLDS_HPP

#include <algorithm>
#include <bit>
#include <memory>
#include <numeric>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "spin/circular.hpp"
#include "spin/core.hpp"

namespace spin {

inline constexpr double kOrthonormalityTolerance = 1e-8;

// N x N matrix whose columns are orthonormal. The canonical basis is kept
// implicit so that large-N sparse models do not allocate N^2 doubles.
class OrthonormalBasis {
 public:
  static OrthonormalBasis canonical(Index n) {
    require(n >= 1, ErrorCode::InvalidArgument, "basis size must be positive");
    OrthonormalBasis b;
    b.n_ = n;
    return b;
  }

  static OrthonormalBasis from_matrix(Eigen::MatrixXd columns) {
    require(columns.rows() == columns.cols() && columns.rows() >= 1, ErrorCode::NotOrthonormal,
            "basis matrix must be square and nonempty");
    const double dev = gram_deviation(columns);
    require(dev <= kOrthonormalityTolerance, ErrorCode::NotOrthonormal,
            "Gram matrix deviates from identity by " + std::to_string(dev));
    OrthonormalBasis b;
    b.n_ = columns.rows();
    b.columns_ = std::make_shared<const Eigen::MatrixXd>(std::move(columns));
    return b;
  }

  // Sylvester-ordered Walsh-Hadamard basis, entries +-1/sqrt(N).
  static OrthonormalBasis hadamard(Index n) {
    require(n >= 1 && std::has_single_bit(static_cast<std::uint64_t>(n)),
            ErrorCode::InvalidArgument, "Hadamard basis needs N a power of two");
    Eigen::MatrixXd h(n, n);
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        h(i, j) = (std::popcount(static_cast<std::uint64_t>(i & j)) % 2 == 0) ? s : -s;
      }
    }
    return from_matrix(std::move(h));
  }

  // Orthonormal DCT-II atoms as columns.
  static OrthonormalBasis dct(Index n) {
    require(n >= 1, ErrorCode::InvalidArgument, "basis size must be positive");
    Eigen::MatrixXd d(n, n);
    const double pi = std::acos(-1.0);
    for (Index k = 0; k < n; ++k) {
      const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
      for (Index i = 0; i < n; ++i) {
        d(i, k) = scale * std::cos(pi * (static_cast<double>(i) + 0.5) * static_cast<double>(k) /
                                   static_cast<double>(n));
      }
    }
    return from_matrix(std::move(d));
  }

  static OrthonormalBasis random(Index n, std::uint64_t seed) {
    require(n >= 1, ErrorCode::InvalidArgument, "basis size must be positive");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd g(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    return from_matrix(std::move(q));
  }

  static double gram_deviation(const Eigen::MatrixXd& columns) {
    const Eigen::MatrixXd gram = columns.transpose() * columns;
    return (gram - Eigen::MatrixXd::Identity(columns.cols(), columns.cols())).cwiseAbs().maxCoeff();
  }

  Index size() const { return n_; }
  bool is_canonical() const { return columns_ == nullptr; }

  Eigen::MatrixXd matrix() const {
    return is_canonical() ? Eigen::MatrixXd::Identity(n_, n_) : *columns_;
  }

  // Coefficients <lambda_i, x>.
  SignalVector analyze(const SignalVector& x) const {
    require_same_size(x.size(), n_, "basis analysis");
    if (is_canonical()) return x;
    return columns_->transpose() * x;
  }

  SignalVector synthesize(const SignalVector& coeffs) const {
    require_same_size(coeffs.size(), n_, "basis synthesis");
    if (is_canonical()) return coeffs;
    return *columns_ * coeffs;
  }

 private:
  Index n_ = 0;
  std::shared_ptr<const Eigen::MatrixXd> columns_;
};

// (row, col) of a circular translation; one-dimensional models use row = 0.
struct Shift {
  Index row = 0;
  Index col = 0;
  bool operator==(const Shift&) const = default;
};

// Support indices (ascending) for sparse models, a shift for template
// models, nothing for the zero manifold.
using Parameter = std::variant<std::monostate, std::vector<Index>, Shift>;

struct ProjectionOutcome {
  SignalVector point;
  double distance_sq = 0.0;
  Parameter parameter;
  // Certified bound on distance_sq - min distance_sq; zero for exact projections.
  double excess_bound = 0.0;
};

// K-sparse signals in an orthonormal basis.
class SparseInBasis {
 public:
  SparseInBasis(Index k, OrthonormalBasis basis) : k_(k), basis_(std::move(basis)) {
    require(k_ >= 0 && k_ <= basis_.size(), ErrorCode::InvalidArgument,
            "sparsity must satisfy 0 <= K <= N");
  }

  // K-sparse over a subset of the basis atoms.
  SparseInBasis(Index k, OrthonormalBasis basis, std::vector<Index> atoms)
      : k_(k), basis_(std::move(basis)) {
    std::sort(atoms.begin(), atoms.end());
    require(std::adjacent_find(atoms.begin(), atoms.end()) == atoms.end() &&
                (atoms.empty() || (atoms.front() >= 0 && atoms.back() < basis_.size())),
            ErrorCode::InvalidArgument, "atoms must be distinct basis indices");
    require(k_ >= 0 && k_ <= static_cast<Index>(atoms.size()), ErrorCode::InvalidArgument,
            "sparsity must not exceed the number of atoms");
    atoms_ = std::make_shared<const std::vector<Index>>(std::move(atoms));
  }

  Index dimension() const { return basis_.size(); }
  Index sparsity() const { return k_; }
  const OrthonormalBasis& basis() const { return basis_; }

  // Keeps the K largest-magnitude coefficients; equal magnitudes resolve to
  // the smaller basis index.
  ProjectionOutcome project(const SignalVector& x) const {
    require_same_size(x.size(), dimension(), "sparse projection");
    const SignalVector coeffs = basis_.analyze(x);
    std::vector<Index> order;
    if (atoms_) {
      order = *atoms_;
    } else {
      order.resize(static_cast<std::size_t>(coeffs.size()));
      std::iota(order.begin(), order.end(), Index{0});
    }
    const auto k = static_cast<std::ptrdiff_t>(k_);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
      const double ma = std::abs(coeffs[a]);
      const double mb = std::abs(coeffs[b]);
      return ma > mb || (ma == mb && a < b);
    });
    std::vector<Index> support(order.begin(), order.begin() + k);
    std::sort(support.begin(), support.end());

    SignalVector kept = SignalVector::Zero(coeffs.size());
    for (Index i : support) kept[i] = coeffs[i];

    ProjectionOutcome out;
    out.point = basis_.synthesize(kept);
    out.distance_sq = (out.point - x).squaredNorm();
    out.parameter = std::move(support);
    return out;
  }

  SignalVector point_from(const std::vector<Index>& support, const SignalVector& values) const {
    require(static_cast<Index>(support.size()) == values.size(), ErrorCode::DimensionMismatch,
            "support/value length");
    SignalVector coeffs = SignalVector::Zero(dimension());
    for (std::size_t i = 0; i < support.size(); ++i) coeffs[support[i]] = values[static_cast<Index>(i)];
    return basis_.synthesize(coeffs);
  }

  // Uniform random K-subset, iid standard normal coefficients.
  SignalVector sample(std::uint64_t seed) const {
    Rng rng(seed);
    std::vector<Index> support;
    if (atoms_) {
      for (Index i : random_support(static_cast<Index>(atoms_->size()), k_, rng)) {
        support.push_back((*atoms_)[static_cast<std::size_t>(i)]);
      }
    } else {
      support = random_support(dimension(), k_, rng);
    }
    SignalVector values = gaussian_vector(k_, rng);
    return point_from(support, values);
  }

  static std::vector<Index> random_support(Index n, Index k, Rng& rng) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index i = 0; i < k; ++i) {
      std::uniform_int_distribution<Index> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<Index> support(idx.begin(), idx.begin() + k);
    std::sort(support.begin(), support.end());
    return support;
  }

 private:
  Index k_;
  OrthonormalBasis basis_;
  std::shared_ptr<const std::vector<Index>> atoms_;
};

// All circular translations of a fixed template on a 1D or 2D grid. The
// matched-filter argmax over shifts is the Euclidean projection because every
// shift has the same norm.
class TranslatedTemplate {
 public:
  static constexpr Index kMaxStride = 16;

  TranslatedTemplate(SignalVector templ, circular::Grid grid) {
    require_same_size(templ.size(), grid.size(), "template/grid size");
    require(grid.height >= 1 && grid.width >= 1, ErrorCode::InvalidArgument, "empty grid");
    require(templ.allFinite() && templ.norm() > 0.0, ErrorCode::InvalidArgument,
            "template must be finite with nonzero norm");
    auto st = std::make_shared<State>();
    st->grid = grid;
    st->norm = templ.norm();
    st->spectrum = circular::forward(templ, grid);
    st->drift_sq = drift_table(templ, st->spectrum, grid);
    st->templ = std::move(templ);
    state_ = std::move(st);
  }

  static TranslatedTemplate one_dimensional(SignalVector templ) {
    const Index n = templ.size();
    return TranslatedTemplate(std::move(templ), circular::Grid{1, n});
  }

  Index dimension() const { return state_->grid.size(); }
  const circular::Grid& grid() const { return state_->grid; }
  const SignalVector& templ() const { return state_->templ; }

  SignalVector point_at(const Shift& s) const {
    return circular::shift(state_->templ, state_->grid, s.row, s.col);
  }

  // Largest ||shift(f, t) - f|| over offsets t of Chebyshev radius <= r.
  double drift(Index radius) const {
    const auto& d = state_->drift_sq;
    const auto r = std::min<std::size_t>(static_cast<std::size_t>(radius), d.size() - 1);
    return std::sqrt(d[r]);
  }

  ProjectionOutcome project(const SignalVector& x) const {
    require_same_size(x.size(), dimension(), "template projection");
    const SignalVector corr = circular::correlate(state_->spectrum, x, state_->grid);
    return finish(x, exact_argmax(x, corr), 0.0);
  }

  // gamma-approximate projection: searches a decimated shift grid, refines
  // locally around the best grid shift and accepts the result only if the
  // drift bound certifies 2 * (max corr - chosen corr) <= gamma. Otherwise the
  // stride is halved, down to the exact search.
  ProjectionOutcome project_gamma(const SignalVector& x, double gamma) const {
    require(gamma >= 0.0 && std::isfinite(gamma), ErrorCode::InvalidArgument,
            "gamma must be finite and nonnegative");
    require_same_size(x.size(), dimension(), "template projection");
    if (gamma == 0.0) return project(x);
    const SignalVector corr = circular::correlate(state_->spectrum, x, state_->grid);
    const double slack = 1e-9 * state_->norm * x.norm();
    for (Index stride = kMaxStride; stride >= 2; stride /= 2) {
      if (auto hit = grid_search(x, corr, stride, slack)) {
        if (hit->second <= gamma) return finish(x, hit->first, hit->second);
      }
    }
    return finish(x, exact_argmax(x, corr), 0.0);
  }

  // Best shift on the stride grid (no refinement, no certificate).
  ProjectionOutcome project_on_grid(const SignalVector& x, Index stride) const {
    require_same_size(x.size(), dimension(), "template projection");
    require(stride >= 1, ErrorCode::InvalidArgument, "stride must be positive");
    const SignalVector corr = circular::correlate(state_->spectrum, x, state_->grid);
    const auto& g = state_->grid;
    const Index rs = g.height > 1 ? stride : 1;
    Index best = 0;
    double best_c = -std::numeric_limits<double>::infinity();
    for (Index r = 0; r < g.height; r += rs) {
      for (Index c = 0; c < g.width; c += stride) {
        if (corr[r * g.width + c] > best_c) {
          best_c = corr[r * g.width + c];
          best = r * g.width + c;
        }
      }
    }
    return finish(x, best, 0.0);
  }

  Shift sample_shift(std::uint64_t seed) const {
    Rng rng(seed);
    std::uniform_int_distribution<Index> rows(0, state_->grid.height - 1);
    std::uniform_int_distribution<Index> cols(0, state_->grid.width - 1);
    const Index r = rows(rng);
    return Shift{r, cols(rng)};
  }

  SignalVector sample(std::uint64_t seed) const { return point_at(sample_shift(seed)); }

 private:
  struct State {
    SignalVector templ;
    circular::Grid grid;
    circular::Spectrum spectrum;
    double norm = 0.0;
    std::vector<double> drift_sq;
  };

  static std::vector<double> drift_table(const SignalVector& f, const circular::Spectrum& f_hat,
                                         const circular::Grid& g) {
    // ||shift(f,t) - f||^2 = 2||f||^2 - 2 R_ff(t)
    const SignalVector auto_corr = circular::correlate(f_hat, f, g);
    const double energy = f.squaredNorm();
    const Index rmax = kMaxStride;
    std::vector<double> table(static_cast<std::size_t>(rmax + 1), 0.0);
    for (Index r = 0; r < g.height; ++r) {
      const Index dr = std::min(r, g.height - r);
      for (Index c = 0; c < g.width; ++c) {
        const Index dc = std::min(c, g.width - c);
        const Index cheb = std::max(dr, dc);
        if (cheb > rmax) continue;
        const double d2 = std::max(0.0, 2.0 * energy - 2.0 * auto_corr[r * g.width + c]);
        auto& slot = table[static_cast<std::size_t>(cheb)];
        slot = std::max(slot, d2 + 1e-12 * energy);
      }
    }
    for (std::size_t i = 1; i < table.size(); ++i) table[i] = std::max(table[i], table[i - 1]);
    return table;
  }

  Shift to_shift(Index flat) const {
    return Shift{flat / state_->grid.width, flat % state_->grid.width};
  }

  ProjectionOutcome finish(const SignalVector& x, Index flat, double excess) const {
    ProjectionOutcome out;
    const Shift s = to_shift(flat);
    out.point = point_at(s);
    out.distance_sq = (out.point - x).squaredNorm();
    out.parameter = s;
    out.excess_bound = excess;
    return out;
  }

  // FFT correlation narrows the field; the final choice among near-maximal
  // shifts is made on directly computed distances, smallest flat index first.
  Index exact_argmax(const SignalVector& x, const SignalVector& corr) const {
    constexpr std::size_t kMaxCandidates = 64;
    const double cmax = corr.maxCoeff();
    const double tol = 1e-9 * state_->norm * x.norm() + 1e-300;
    std::vector<Index> candidates;
    for (Index i = 0; i < corr.size() && candidates.size() < kMaxCandidates; ++i) {
      if (corr[i] >= cmax - tol) candidates.push_back(i);
    }
    if (candidates.size() == 1) return candidates.front();
    Index best = candidates.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (Index flat : candidates) {
      const double d = (point_at(to_shift(flat)) - x).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = flat;
      }
    }
    return best;
  }

  // Returns (flat index, certified excess bound) for one stride.
  std::optional<std::pair<Index, double>> grid_search(const SignalVector& x,
                                                      const SignalVector& corr, Index stride,
                                                      double slack) const {
    const auto& g = state_->grid;
    const bool two_d = g.height > 1;
    if (stride > g.width || (two_d && stride > g.height)) return std::nullopt;
    const Index rs = two_d ? stride : 1;
    Index best = 0;
    double best_c = -std::numeric_limits<double>::infinity();
    for (Index r = 0; r < g.height; r += rs) {
      for (Index c = 0; c < g.width; c += stride) {
        const Index flat = r * g.width + c;
        if (corr[flat] > best_c) {
          best_c = corr[flat];
          best = flat;
        }
      }
    }
    // Every shift lies within Chebyshev radius stride/2 of some grid shift.
    const Index radius = stride / 2;
    const double upper = best_c + x.norm() * drift(radius) + slack;

    const Index br = best / g.width;
    const Index bc = best % g.width;
    const Index rr = two_d ? radius : 0;
    Index local = best;
    double local_c = best_c;
    for (Index dr = -rr; dr <= rr; ++dr) {
      const Index r = ((br + dr) % g.height + g.height) % g.height;
      for (Index dc = -radius; dc <= radius; ++dc) {
        const Index c = ((bc + dc) % g.width + g.width) % g.width;
        const Index flat = r * g.width + c;
        if (corr[flat] > local_c || (corr[flat] == local_c && flat < local)) {
          local_c = corr[flat];
          local = flat;
        }
      }
    }
    return std::make_pair(local, 2.0 * std::max(0.0, upper - local_c));
  }

  std::shared_ptr<const State> state_;
};

class ZeroManifold {
 public:
  explicit ZeroManifold(Index n) : n_(n) {
    require(n >= 1, ErrorCode::InvalidArgument, "dimension must be positive");
  }
  Index dimension() const { return n_; }

  ProjectionOutcome project(const SignalVector& x) const {
    require_same_size(x.size(), n_, "zero projection");
    ProjectionOutcome out;
    out.point = SignalVector::Zero(n_);
    out.distance_sq = x.squaredNorm();
    return out;
  }

  SignalVector sample(std::uint64_t) const { return SignalVector::Zero(n_); }

 private:
  Index n_;
};

// Immutable signal-family descriptor; copies share precomputed state.
class ManifoldModel {
 public:
  using Variant = std::variant<SparseInBasis, TranslatedTemplate, ZeroManifold>;

  ManifoldModel(SparseInBasis m) : v_(std::move(m)) {}
  ManifoldModel(TranslatedTemplate m) : v_(std::move(m)) {}
  ManifoldModel(ZeroManifold m) : v_(std::move(m)) {}

  static ManifoldModel sparse(Index k, OrthonormalBasis basis) {
    return SparseInBasis(k, std::move(basis));
  }
  static ManifoldModel sparse_canonical(Index n, Index k) {
    return SparseInBasis(k, OrthonormalBasis::canonical(n));
  }
  static ManifoldModel translates(SignalVector templ) {
    return TranslatedTemplate::one_dimensional(std::move(templ));
  }
  static ManifoldModel translates(SignalVector templ, Index height, Index width) {
    return TranslatedTemplate(std::move(templ), circular::Grid{height, width});
  }
  static ManifoldModel zero(Index n) { return ZeroManifold(n); }

  const Variant& variant() const { return v_; }

  Index dimension() const {
    return std::visit([](const auto& m) { return m.dimension(); }, v_);
  }

  bool is_zero() const { return std::holds_alternative<ZeroManifold>(v_); }

  ProjectionOutcome project(const SignalVector& x) const {
    return std::visit([&](const auto& m) { return m.project(x); }, v_);
  }

  ProjectionOutcome project_gamma(const SignalVector& x, double gamma) const {
    require(gamma >= 0.0, ErrorCode::InvalidArgument, "gamma must be nonnegative");
    if (const auto* t = std::get_if<TranslatedTemplate>(&v_)) return t->project_gamma(x, gamma);
    return project(x);
  }

  SignalVector sample_point(std::uint64_t seed) const {
    return std::visit([&](const auto& m) { return m.sample(seed); }, v_);
  }

 private:
  Variant v_;
};

inline ProjectionOutcome project(const ManifoldModel& model, const SignalVector& x) {
  return model.project(x);
}

inline ProjectionOutcome project_gamma(const ManifoldModel& model, const SignalVector& x,
                                       double gamma) {
  return model.project_gamma(x, gamma);
}

inline SignalVector sample_point(const ManifoldModel& model, std::uint64_t seed) {
  return model.sample_point(seed);
}

// ---------------------------------------------------------------------------
// Templates. All are returned unnormalized.

namespace detail {

inline SignalVector gaussian_blur(const SignalVector& img, Index h, Index w, double sigma) {
  if (sigma <= 0.0) return img;
  const Index radius = static_cast<Index>(std::ceil(4.0 * sigma));
  std::vector<double> kernel;
  double total = 0.0;
  for (Index dr = -radius; dr <= radius; ++dr) {
    for (Index dc = -radius; dc <= radius; ++dc) {
      const double v = std::exp(-static_cast<double>(dr * dr + dc * dc) / (2.0 * sigma * sigma));
      kernel.push_back(v);
      total += v;
    }
  }
  for (double& k : kernel) k /= total;
  const Index side = 2 * radius + 1;
  SignalVector out = SignalVector::Zero(img.size());
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      const double v = img[r * w + c];
      if (v == 0.0) continue;
      for (Index dr = -radius; dr <= radius; ++dr) {
        const Index rr = ((r + dr) % h + h) % h;
        for (Index dc = -radius; dc <= radius; ++dc) {
          const Index cc = ((c + dc) % w + w) % w;
          out[rr * w + cc] += v * kernel[static_cast<std::size_t>((dr + radius) * side + dc + radius)];
        }
      }
    }
  }
  return out;
}

}  // namespace detail

// Binary disk centered at (h/2, w/2), blurred circularly with a normalized
// Gaussian kernel of standard deviation blur_sigma (0 disables blurring).
inline SignalVector make_disk_template(Index h, Index w, double radius, double blur_sigma) {
  require(h >= 1 && w >= 1 && radius >= 0.0 && blur_sigma >= 0.0, ErrorCode::InvalidArgument,
          "disk template arguments");
  const Index cr = h / 2;
  const Index cc = w / 2;
  const double limit = static_cast<double>(std::min({cr, h - 1 - cr, cc, w - 1 - cc}));
  require(radius <= limit, ErrorCode::TemplateTooLarge, "disk does not fit inside the domain");
  SignalVector img = SignalVector::Zero(h * w);
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      const double dr = static_cast<double>(r - cr);
      const double dc = static_cast<double>(c - cc);
      if (dr * dr + dc * dc <= radius * radius) img[r * w + c] = 1.0;
    }
  }
  return detail::gaussian_blur(img, h, w, blur_sigma);
}

inline SignalVector make_square_template(Index h, Index w, Index side, double blur_sigma) {
  require(h >= 1 && w >= 1 && side >= 1 && blur_sigma >= 0.0, ErrorCode::InvalidArgument,
          "square template arguments");
  require(side <= h && side <= w, ErrorCode::TemplateTooLarge,
          "square does not fit inside the domain");
  SignalVector img = SignalVector::Zero(h * w);
  const Index r0 = h / 2 - side / 2;
  const Index c0 = w / 2 - side / 2;
  for (Index r = r0; r < r0 + side; ++r)
    for (Index c = c0; c < c0 + side; ++c) img[r * w + c] = 1.0;
  return detail::gaussian_blur(img, h, w, blur_sigma);
}

// exp(-t^2 / (2 sigma^2)) with t measured from index n/2.
inline SignalVector make_gaussian_pulse(Index n, double width_sigma) {
  require(n >= 1 && width_sigma > 0.0, ErrorCode::InvalidArgument, "pulse arguments");
  require(6.0 * width_sigma <= static_cast<double>(n), ErrorCode::TemplateTooLarge,
          "pulse (+-3 sigma) does not fit inside the domain");
  SignalVector p(n);
  const double center = static_cast<double>(n / 2);
  for (Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) - center;
    p[i] = std::exp(-t * t / (2.0 * width_sigma * width_sigma));
  }
  return p;
}

}  // namespace spin

#endif  // SPIN_MANIFOLDS_HPP
