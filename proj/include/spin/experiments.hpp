#ifndef SPIN_EXPERIMENTS_HPP
#define SPIN_EXPERIMENTS_HPP

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "spin/core.hpp"
#include "spin/geometry.hpp"
#include "spin/io.hpp"
#include "spin/manifolds.hpp"
#include "spin/measurement.hpp"
#include "spin/solver.hpp"

// Seeded reproductions of the recovery experiments: sparse pairs of bases,
// disk + square images, Gaussian pulse in impulsive noise, the Monte Carlo
// sweep over (M, K'), and geometry diagnostics.
namespace spin::experiments {

enum class Scenario { PairsOfBases, DiskSquare, PulseImpulse, MonteCarlo, EstimateGeometry };
enum class SecondBasis { Hadamard, Dct };
enum class SpikeAmplitudes { Normal, Rademacher };
enum class GeometryModel { Bases, PulseImpulse };

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::PairsOfBases: return "pairs-of-bases";
    case Scenario::DiskSquare: return "disk-square";
    case Scenario::PulseImpulse: return "pulse-impulse";
    case Scenario::MonteCarlo: return "montecarlo";
    case Scenario::EstimateGeometry: return "estimate-geometry";
  }
  return "unknown";
}

inline std::optional<Scenario> parse_scenario(const std::string& name) {
  for (Scenario s : {Scenario::PairsOfBases, Scenario::DiskSquare, Scenario::PulseImpulse,
                     Scenario::MonteCarlo, Scenario::EstimateGeometry}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

// Per-trial stream indices under the trial seed.
namespace stream {
inline constexpr std::uint64_t kComponentA = 1;
inline constexpr std::uint64_t kComponentB = 2;
inline constexpr std::uint64_t kOperator = 3;
inline constexpr std::uint64_t kNoise = 4;
}  // namespace stream

inline std::uint64_t trial_seed(std::uint64_t master_seed, std::int64_t trial) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(trial));
}

// Monte Carlo errors are clamped to this range before averaging: -100 dB
// stands for "numerically exact", +100 dB for a diverged run.
inline constexpr double kErrorFloorDb = -100.0;
inline constexpr double kErrorCeilDb = 100.0;
inline constexpr double kThresholdErrorDb = -40.0;

struct ExperimentSpec {
  Scenario scenario = Scenario::PulseImpulse;
  Index n = 10000;
  Index height = 1;
  Index width = 10000;
  Index m = 150;
  Index k1 = 0;
  Index k2 = 0;
  Index kprime = 10;
  std::optional<double> snr_db;
  std::int64_t trials = 20;
  std::uint64_t master_seed = 0;
  SpinConfig solver;
  std::filesystem::path output_dir = "runs";
  std::vector<Index> m_grid;
  std::vector<Index> kprime_grid;
  double pulse_sigma = 100.0;
  double disk_radius = 5.0;
  Index square_side = 18;
  double blur_sigma = 0.5;
  SecondBasis basis_b = SecondBasis::Hadamard;
  SpikeAmplitudes spikes = SpikeAmplitudes::Normal;
  GeometryModel manifolds = GeometryModel::Bases;
  std::int64_t samples = 500;
  bool save_images = false;
  int threads = 1;

  void validate() const;
};

inline ExperimentSpec default_spec(Scenario scenario) {
  ExperimentSpec s;
  s.scenario = scenario;
  switch (scenario) {
    case Scenario::PairsOfBases:
      s.n = 256;
      s.width = 256;
      s.k1 = 4;
      s.k2 = 4;
      s.kprime = 0;
      s.m = 256;
      s.trials = 50;
      s.solver.eta = 0.6;
      break;
    case Scenario::DiskSquare:
      s.height = 64;
      s.width = 64;
      s.n = 64 * 64;
      s.m = 50;
      s.kprime = 0;
      s.snr_db = 14.0;
      s.trials = 20;
      s.solver.eta = 0.8;
      break;
    case Scenario::PulseImpulse:
      s.n = 10000;
      s.width = 10000;
      s.m = 150;
      s.kprime = 10;
      s.trials = 20;
      s.pulse_sigma = 10.0;
      s.solver.eta = 0.6;
      break;
    case Scenario::MonteCarlo:
      s.n = 2000;
      s.width = 2000;
      s.trials = 50;
      s.pulse_sigma = 10.0;
      s.solver.eta = 0.6;
      s.kprime_grid = {5, 10, 20};
      for (Index m = 25; m <= 400; m += 25) s.m_grid.push_back(m);
      break;
    case Scenario::EstimateGeometry:
      s.n = 64;
      s.width = 64;
      s.k1 = 2;
      s.k2 = 2;
      s.kprime = 10;
      s.m = 32;
      s.samples = 500;
      s.trials = 1;
      break;
  }
  return s;
}

inline void config_require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorCode::Config, what);
}

inline void ExperimentSpec::validate() const {
  config_require(n >= 1 && height >= 1 && width >= 1 && height * width == n,
                 "dimensions must satisfy n = height * width >= 1");
  config_require(trials >= 1, "trials must be positive");
  config_require(threads >= 1, "threads must be positive");
  config_require(samples >= 1, "samples must be positive");
  config_require(!snr_db || std::isfinite(*snr_db), "snr-db must be finite or 'none'");
  try {
    solver.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  switch (scenario) {
    case Scenario::PairsOfBases:
      config_require(k1 >= 0 && k2 >= 0 && k1 <= n && k2 <= n, "k1, k2 must lie in [0, n]");
      config_require(basis_b != SecondBasis::Hadamard ||
                         std::has_single_bit(static_cast<std::uint64_t>(n)),
                     "Hadamard basis needs n a power of two");
      break;
    case Scenario::DiskSquare:
      config_require(height > 1 && width > 1, "disk-square needs a 2D grid");
      config_require(m >= 1 && m <= n, "m must lie in [1, n]");
      break;
    case Scenario::PulseImpulse:
      config_require(m >= 1, "m must be positive");
      config_require(kprime >= 0 && kprime <= n, "kprime must lie in [0, n]");
      break;
    case Scenario::MonteCarlo:
      config_require(!m_grid.empty() && !kprime_grid.empty(), "grids must be nonempty");
      for (Index v : m_grid) config_require(v >= 0, "m-grid values must be nonnegative");
      for (Index v : kprime_grid) config_require(v >= 0 && v <= n, "kprime-grid values in [0, n]");
      break;
    case Scenario::EstimateGeometry:
      config_require(m >= 0, "m must be nonnegative");
      config_require(k1 >= 0 && k2 >= 0 && k1 <= n && k2 <= n && kprime >= 0 && kprime <= n,
                     "sparsity levels must lie in [0, n]");
      config_require(manifolds != GeometryModel::Bases ||
                         std::has_single_bit(static_cast<std::uint64_t>(n)),
                     "bases geometry uses the Hadamard basis: n must be a power of two");
      break;
  }
}

// ---------------------------------------------------------------------------
// Flat key=value configuration. Keys are the CLI flag names without dashes.

using Settings = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline Settings parse_config(std::istream& in, const std::string& origin = "config") {
  Settings out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const auto eq = t.find('=');
    config_require(eq != std::string::npos,
                   origin + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    config_require(!key.empty(), origin + ":" + std::to_string(lineno) + ": empty key");
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

inline Settings read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  config_require(static_cast<bool>(in), "cannot read config file " + path.string());
  return parse_config(in, path.string());
}

namespace detail {

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  config_require(res.ec == std::errc() && res.ptr == end, key + ": not an integer: '" + v + "'");
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  config_require(res.ec == std::errc() && res.ptr == end, key + ": not an unsigned integer: '" + v + "'");
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::istringstream ss(v);
  ss.imbue(std::locale::classic());
  double out = 0.0;
  ss >> out;
  config_require(!ss.fail() && ss.eof() && std::isfinite(out), key + ": not a number: '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v.empty()) return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::Config, key + ": not a boolean: '" + v + "'");
}

// "5,10,20" or "start:stop:step" (inclusive).
inline std::vector<Index> parse_index_list(const std::string& key, const std::string& v) {
  std::vector<Index> out;
  if (v.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(trim(p));
    config_require(parts.size() == 3, key + ": expected start:stop:step");
    const auto a = parse_int(key, parts[0]);
    const auto b = parse_int(key, parts[1]);
    const auto step = parse_int(key, parts[2]);
    config_require(step > 0 && a <= b, key + ": invalid range");
    for (auto x = a; x <= b; x += step) out.push_back(x);
    return out;
  }
  std::stringstream ss(v);
  std::string p;
  while (std::getline(ss, p, ',')) out.push_back(parse_int(key, trim(p)));
  config_require(!out.empty(), key + ": empty list");
  return out;
}

}  // namespace detail

// Applies settings on top of spec; unknown keys are configuration errors.
inline void apply_settings(ExperimentSpec& spec, const Settings& settings) {
  using namespace detail;
  std::optional<Index> n, height, width;
  for (const auto& [key, v] : settings) {
    if (key == "seed") {
      spec.master_seed = parse_uint(key, v);
    } else if (key == "trials") {
      spec.trials = parse_int(key, v);
    } else if (key == "m") {
      spec.m = parse_int(key, v);
    } else if (key == "n") {
      n = parse_int(key, v);
    } else if (key == "height") {
      height = parse_int(key, v);
    } else if (key == "width") {
      width = parse_int(key, v);
    } else if (key == "k1") {
      spec.k1 = parse_int(key, v);
    } else if (key == "k2") {
      spec.k2 = parse_int(key, v);
    } else if (key == "kprime") {
      spec.kprime = parse_int(key, v);
    } else if (key == "snr-db") {
      if (v == "none") {
        spec.snr_db.reset();
      } else {
        spec.snr_db = parse_real(key, v);
      }
    } else if (key == "eta") {
      spec.solver.eta = parse_real(key, v);
    } else if (key == "max-iters") {
      spec.solver.max_iters = parse_int(key, v);
    } else if (key == "nu") {
      spec.solver.nu = parse_real(key, v);
    } else if (key == "tol") {
      spec.solver.relative_tol = parse_real(key, v);
    } else if (key == "stop-rule") {
      if (v == "fixed-T") {
        spec.solver.stop_rule = StopRule::FixedIterations;
      } else if (v == "psi-threshold") {
        spec.solver.stop_rule = StopRule::PsiThreshold;
      } else if (v == "relative-change") {
        spec.solver.stop_rule = StopRule::RelativeChange;
      } else {
        throw Error(ErrorCode::Config, "stop-rule: expected fixed-T, psi-threshold or relative-change");
      }
    } else if (key == "gamma") {
      spec.solver.gamma_a = spec.solver.gamma_b = parse_real(key, v);
    } else if (key == "out") {
      config_require(!v.empty(), "out: empty path");
      spec.output_dir = v;
    } else if (key == "m-grid") {
      spec.m_grid = parse_index_list(key, v);
    } else if (key == "kprime-grid") {
      spec.kprime_grid = parse_index_list(key, v);
    } else if (key == "pulse-sigma") {
      spec.pulse_sigma = parse_real(key, v);
    } else if (key == "disk-radius") {
      spec.disk_radius = parse_real(key, v);
    } else if (key == "square-side") {
      spec.square_side = parse_int(key, v);
    } else if (key == "blur-sigma") {
      spec.blur_sigma = parse_real(key, v);
    } else if (key == "basis") {
      if (v == "hadamard") {
        spec.basis_b = SecondBasis::Hadamard;
      } else if (v == "dct") {
        spec.basis_b = SecondBasis::Dct;
      } else {
        throw Error(ErrorCode::Config, "basis: expected hadamard or dct");
      }
    } else if (key == "spikes") {
      if (v == "normal") {
        spec.spikes = SpikeAmplitudes::Normal;
      } else if (v == "rademacher") {
        spec.spikes = SpikeAmplitudes::Rademacher;
      } else {
        throw Error(ErrorCode::Config, "spikes: expected normal or rademacher");
      }
    } else if (key == "manifolds") {
      if (v == "bases") {
        spec.manifolds = GeometryModel::Bases;
      } else if (v == "pulse-impulse") {
        spec.manifolds = GeometryModel::PulseImpulse;
      } else {
        throw Error(ErrorCode::Config, "manifolds: expected bases or pulse-impulse");
      }
    } else if (key == "samples") {
      spec.samples = parse_int(key, v);
    } else if (key == "save-images") {
      spec.save_images = parse_bool(key, v);
    } else if (key == "threads") {
      spec.threads = static_cast<int>(parse_int(key, v));
    } else {
      throw Error(ErrorCode::Config, "unknown setting '" + key + "'");
    }
  }

  const bool grid_2d = spec.scenario == Scenario::DiskSquare;
  if (n) {
    if (grid_2d) {
      const auto side = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(*n))));
      config_require(side * side == *n, "n must be a perfect square for disk-square");
      spec.height = spec.width = side;
    } else {
      spec.height = 1;
      spec.width = *n;
    }
  }
  if (height) spec.height = *height;
  if (width) spec.width = *width;
  if (n || height || width) spec.n = spec.height * spec.width;
}

// ---------------------------------------------------------------------------
// Trials

struct TrialRecord {
  std::int64_t trial = 0;
  std::uint64_t seed = 0;
  Scenario scenario = Scenario::PulseImpulse;
  Index n = 0;
  Index m = 0;
  Index k1 = 0;
  Index k2 = 0;
  Index kprime = 0;
  std::optional<double> snr_db;
  double eta = 0.0;
  // -1 when the solver diverged (non-finite iterate).
  std::int64_t iterations = 0;
  double final_psi = 0.0;
  double recovery_snr_a_db = 0.0;
  double recovery_snr_b_db = 0.0;
  double recovery_snr_x_db = 0.0;
  bool param_match_a = false;
  bool param_match_b = false;
};

struct TrialRun {
  TrialRecord record;
  std::vector<double> psi_trace;
  // Ground truth and estimates; kept only when images are requested.
  SignalVector truth_a, truth_b, estimate_a, estimate_b;
};

// Component SNR that tolerates an all-zero truth (empty sparse component):
// exact zero estimate is a perfect recovery, anything else the worst case.
inline double component_snr(const SignalVector& truth, const SignalVector& estimate) {
  if (truth.squaredNorm() == 0.0) {
    return estimate.squaredNorm() == 0.0 ? kSnrCapDb : -kSnrCapDb;
  }
  return recovery_snr(truth, estimate);
}

namespace detail {

inline TrialRun solve_and_score(const ExperimentSpec& spec, TrialRecord rec,
                                const SignalVector& z, const MeasurementOperator& phi,
                                const ManifoldModel& ma, const ManifoldModel& mb,
                                const SignalVector& a, const SignalVector& b,
                                const Parameter& truth_a, const Parameter& truth_b) {
  TrialRun run;
  rec.eta = spec.solver.eta;
  try {
    SpinResult res = spin::spin(z, phi, ma, mb, spec.solver);
    rec.iterations = res.iterations_run;
    rec.final_psi = res.final_psi();
    rec.recovery_snr_a_db = component_snr(a, res.a_hat);
    rec.recovery_snr_b_db = component_snr(b, res.b_hat);
    rec.recovery_snr_x_db = component_snr(a + b, res.a_hat + res.b_hat);
    rec.param_match_a = res.iterations_run > 0 ? res.parameter_a == truth_a
                                               : res.a_hat == a;
    rec.param_match_b = res.iterations_run > 0 ? res.parameter_b == truth_b
                                               : res.b_hat == b;
    run.psi_trace = std::move(res.psi_trace);
    if (spec.save_images) {
      run.estimate_a = std::move(res.a_hat);
      run.estimate_b = std::move(res.b_hat);
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonFiniteIterate) throw;
    rec.iterations = -1;
    rec.final_psi = std::numeric_limits<double>::infinity();
    rec.recovery_snr_a_db = rec.recovery_snr_b_db = rec.recovery_snr_x_db = -kSnrCapDb;
    rec.param_match_a = rec.param_match_b = false;
  }
  if (spec.save_images) {
    run.truth_a = a;
    run.truth_b = b;
  }
  run.record = rec;
  return run;
}

inline TrialRecord base_record(const ExperimentSpec& spec, std::int64_t t, std::uint64_t seed) {
  TrialRecord rec;
  rec.trial = t;
  rec.seed = seed;
  rec.scenario = spec.scenario;
  rec.n = spec.n;
  rec.m = spec.m;
  rec.k1 = spec.k1;
  rec.k2 = spec.k2;
  rec.kprime = spec.kprime;
  rec.snr_db = spec.snr_db;
  return rec;
}

inline OrthonormalBasis second_basis(const ExperimentSpec& spec) {
  return spec.basis_b == SecondBasis::Hadamard ? OrthonormalBasis::hadamard(spec.n)
                                               : OrthonormalBasis::dct(spec.n);
}

// Runs fn(i) for i in [0, count) on `threads` workers; results are indexed,
// so the output does not depend on scheduling. The lowest failing index wins.
template <class Fn>
std::vector<TrialRun> run_indexed(std::int64_t count, int threads, Fn fn) {
  std::vector<TrialRun> out(static_cast<std::size_t>(count));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<std::int64_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        out[static_cast<std::size_t>(i)] = fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int n_workers = static_cast<int>(std::min<std::int64_t>(threads, std::max<std::int64_t>(count, 1)));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

inline SignalVector spike_vector(const ExperimentSpec& spec, Index n, Index k, std::uint64_t seed,
                                 std::vector<Index>& support) {
  Rng rng(seed);
  support = SparseInBasis::random_support(n, k, rng);
  SignalVector values = gaussian_vector(k, rng);
  if (spec.spikes == SpikeAmplitudes::Rademacher) {
    for (Index i = 0; i < k; ++i) values[i] = values[i] >= 0.0 ? 1.0 : -1.0;
  }
  SignalVector out = SignalVector::Zero(n);
  for (Index i = 0; i < k; ++i) out[support[static_cast<std::size_t>(i)]] = values[i];
  return out;
}

}  // namespace detail

// a* K1-sparse in the canonical basis, b* K2-sparse in the second basis,
// Phi = identity.
inline TrialRun pairs_of_bases_trial(const ExperimentSpec& spec, std::int64_t t) {
  const std::uint64_t seed = trial_seed(spec.master_seed, t);
  const SparseInBasis sa(spec.k1, OrthonormalBasis::canonical(spec.n));
  const SparseInBasis sb(spec.k2, detail::second_basis(spec));

  Rng rng_a(derive_seed(seed, stream::kComponentA));
  const auto support_a = SparseInBasis::random_support(spec.n, spec.k1, rng_a);
  const SignalVector a = sa.point_from(support_a, gaussian_vector(spec.k1, rng_a));
  Rng rng_b(derive_seed(seed, stream::kComponentB));
  const auto support_b = SparseInBasis::random_support(spec.n, spec.k2, rng_b);
  const SignalVector b = sb.point_from(support_b, gaussian_vector(spec.k2, rng_b));

  const auto phi = MeasurementOperator::identity(spec.n);
  SignalVector x = a + b;
  if (spec.snr_db && x.squaredNorm() > 0.0) {
    x += synthesize_noise(x, NoiseSpec{spec.snr_db, derive_seed(seed, stream::kNoise)});
  }
  auto rec = detail::base_record(spec, t, seed);
  rec.m = spec.n;
  rec.kprime = 0;
  return detail::solve_and_score(spec, rec, phi.apply(x), phi, sa, sb, a, b, support_a, support_b);
}

struct ImageModels {
  ManifoldModel disk;
  ManifoldModel square;
};

inline ImageModels disk_square_models(const ExperimentSpec& spec) {
  return {ManifoldModel::translates(
              make_disk_template(spec.height, spec.width, spec.disk_radius, spec.blur_sigma),
              spec.height, spec.width),
          ManifoldModel::translates(
              make_square_template(spec.height, spec.width, spec.square_side, spec.blur_sigma),
              spec.height, spec.width)};
}

// Shifted disk + shifted square, Gaussian noise added in the image domain,
// Gaussian compressive measurements of the noisy image.
inline TrialRun disk_square_trial(const ExperimentSpec& spec, const ImageModels& models,
                                  std::int64_t t) {
  const std::uint64_t seed = trial_seed(spec.master_seed, t);
  const auto& disk = std::get<TranslatedTemplate>(models.disk.variant());
  const auto& square = std::get<TranslatedTemplate>(models.square.variant());
  const Shift shift_a = disk.sample_shift(derive_seed(seed, stream::kComponentA));
  const Shift shift_b = square.sample_shift(derive_seed(seed, stream::kComponentB));
  const SignalVector a = disk.point_at(shift_a);
  const SignalVector b = square.point_at(shift_b);
  const SignalVector x = a + b;
  const SignalVector noisy =
      x + synthesize_noise(x, NoiseSpec{spec.snr_db, derive_seed(seed, stream::kNoise)});
  const auto phi = gaussian_operator(spec.m, spec.n, derive_seed(seed, stream::kOperator));
  auto rec = detail::base_record(spec, t, seed);
  rec.k1 = rec.k2 = rec.kprime = 0;
  return detail::solve_and_score(spec, rec, phi.apply(noisy), phi, models.disk, models.square, a,
                                 b, shift_a, shift_b);
}

// Randomly shifted Gaussian pulse plus K'-spike impulsive noise, measured by
// an M x N Gaussian operator. m and kprime are explicit so that the Monte
// Carlo sweep can reuse this per grid point.
inline TrialRun pulse_impulse_trial(const ExperimentSpec& spec, const ManifoldModel& pulse_model,
                                    Index m, Index kprime, std::int64_t t) {
  const std::uint64_t seed = trial_seed(spec.master_seed, t);
  const auto& pulse = std::get<TranslatedTemplate>(pulse_model.variant());
  const Shift shift = pulse.sample_shift(derive_seed(seed, stream::kComponentA));
  const SignalVector a = pulse.point_at(shift);
  std::vector<Index> support;
  const SignalVector b =
      detail::spike_vector(spec, spec.n, kprime, derive_seed(seed, stream::kComponentB), support);
  SignalVector x = a + b;
  if (spec.snr_db) {
    x += synthesize_noise(x, NoiseSpec{spec.snr_db, derive_seed(seed, stream::kNoise)});
  }
  const auto phi = gaussian_operator(m, spec.n, derive_seed(seed, stream::kOperator));
  const ManifoldModel spikes = ManifoldModel::sparse_canonical(spec.n, kprime);
  auto rec = detail::base_record(spec, t, seed);
  rec.m = m;
  rec.kprime = kprime;
  rec.k1 = rec.k2 = 0;
  return detail::solve_and_score(spec, rec, phi.apply(x), phi, pulse_model, spikes, a, b, shift,
                                 support);
}

// ---------------------------------------------------------------------------
// Experiments

struct PairsSummary {
  double mu = 0.0;
  double epsilon_bound = 0.0;
  bool recoverable = false;
  double exact_recovery_rate = 0.0;
};

struct MonteCarloCell {
  Index kprime = 0;
  Index m = 0;
  std::int64_t trials = 0;
  double mean_err_db = 0.0;
  double std_err_db = 0.0;
};

struct Threshold {
  Index kprime = 0;
  std::optional<Index> m;
};

struct ExperimentResult {
  std::vector<TrialRun> runs;
  std::optional<PairsSummary> pairs;
  std::vector<MonteCarloCell> summary;
  std::vector<Threshold> thresholds;
  std::vector<GeometryEstimate> geometry;
};

inline double exact_rate(const std::vector<TrialRun>& runs) {
  if (runs.empty()) return 0.0;
  const auto hits = std::count_if(runs.begin(), runs.end(), [](const TrialRun& r) {
    return r.record.param_match_a && r.record.param_match_b;
  });
  return static_cast<double>(hits) / static_cast<double>(runs.size());
}

inline ExperimentResult run_pairs_of_bases(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult out;
  out.runs = detail::run_indexed(spec.trials, spec.threads,
                                 [&](std::int64_t t) { return pairs_of_bases_trial(spec, t); });
  PairsSummary s;
  s.mu = mutual_coherence(OrthonormalBasis::canonical(spec.n), detail::second_basis(spec));
  const PairsBound bound = pairs_bound(s.mu, spec.k1, spec.k2);
  s.epsilon_bound = bound.epsilon_bound;
  s.recoverable = bound.recoverable;
  s.exact_recovery_rate = exact_rate(out.runs);
  out.pairs = s;
  return out;
}

inline ExperimentResult run_disk_square(const ExperimentSpec& spec) {
  spec.validate();
  ImageModels models = [&] {
    try {
      return disk_square_models(spec);
    } catch (const Error& e) {
      throw Error(ErrorCode::Config, e.what());
    }
  }();
  ExperimentResult out;
  out.runs = detail::run_indexed(spec.trials, spec.threads, [&](std::int64_t t) {
    return disk_square_trial(spec, models, t);
  });
  return out;
}

inline ManifoldModel pulse_model(const ExperimentSpec& spec) {
  try {
    return ManifoldModel::translates(make_gaussian_pulse(spec.n, spec.pulse_sigma));
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
}

inline ExperimentResult run_pulse_impulse(const ExperimentSpec& spec) {
  spec.validate();
  const ManifoldModel model = pulse_model(spec);
  ExperimentResult out;
  out.runs = detail::run_indexed(spec.trials, spec.threads, [&](std::int64_t t) {
    return pulse_impulse_trial(spec, model, spec.m, spec.kprime, t);
  });
  return out;
}

// Normalized error 10 log10(||x_hat - x*||^2 / ||x*||^2), clamped.
inline double trial_error_db(const TrialRecord& r) {
  return std::clamp(-r.recovery_snr_x_db, kErrorFloorDb, kErrorCeilDb);
}

inline ExperimentResult run_montecarlo(const ExperimentSpec& spec) {
  spec.validate();
  const ManifoldModel model = pulse_model(spec);
  const auto n_m = static_cast<std::int64_t>(spec.m_grid.size());
  const auto n_k = static_cast<std::int64_t>(spec.kprime_grid.size());
  const std::int64_t total = n_m * n_k * spec.trials;
  ExperimentResult out;
  // Trial t uses the same seed at every grid point.
  out.runs = detail::run_indexed(total, spec.threads, [&](std::int64_t i) {
    const std::int64_t t = i % spec.trials;
    const std::int64_t cell = i / spec.trials;
    const Index m = spec.m_grid[static_cast<std::size_t>(cell % n_m)];
    const Index kprime = spec.kprime_grid[static_cast<std::size_t>(cell / n_m)];
    return pulse_impulse_trial(spec, model, m, kprime, t);
  });

  for (std::int64_t cell = 0; cell < n_m * n_k; ++cell) {
    MonteCarloCell c;
    c.m = spec.m_grid[static_cast<std::size_t>(cell % n_m)];
    c.kprime = spec.kprime_grid[static_cast<std::size_t>(cell / n_m)];
    c.trials = spec.trials;
    std::vector<double> errs;
    for (std::int64_t t = 0; t < spec.trials; ++t) {
      errs.push_back(trial_error_db(out.runs[static_cast<std::size_t>(cell * spec.trials + t)].record));
    }
    const double mean = std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(errs.size());
    double var = 0.0;
    for (double e : errs) var += (e - mean) * (e - mean);
    c.mean_err_db = mean;
    c.std_err_db = errs.size() > 1 ? std::sqrt(var / static_cast<double>(errs.size() - 1)) : 0.0;
    out.summary.push_back(c);
  }

  for (Index kprime : spec.kprime_grid) {
    Threshold th{kprime, std::nullopt};
    for (const auto& c : out.summary) {
      if (c.kprime == kprime && c.mean_err_db <= kThresholdErrorDb && (!th.m || c.m < *th.m)) {
        th.m = c.m;
      }
    }
    out.thresholds.push_back(th);
  }
  return out;
}

inline ExperimentResult run_estimate_geometry(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult out;
  const std::uint64_t seed = spec.master_seed;
  ManifoldModel a = ManifoldModel::zero(spec.n);
  ManifoldModel b = ManifoldModel::zero(spec.n);
  if (spec.manifolds == GeometryModel::Bases) {
    const auto second = detail::second_basis(spec);
    out.geometry.push_back(GeometryEstimate{EstimateKind::MutualCoherence,
                                            mutual_coherence(OrthonormalBasis::canonical(spec.n), second),
                                            static_cast<std::int64_t>(spec.n * spec.n), seed});
    a = ManifoldModel::sparse_canonical(spec.n, spec.k1);
    b = ManifoldModel::sparse(spec.k2, second);
  } else {
    a = pulse_model(spec);
    b = ManifoldModel::sparse_canonical(spec.n, spec.kprime);
  }
  try {
    out.geometry.push_back(estimate_incoherence(a, b, spec.samples, derive_seed(seed, 1)));
    if (spec.m > 0) {
      const auto phi = gaussian_operator(spec.m, spec.n, derive_seed(seed, stream::kOperator));
      out.geometry.push_back(estimate_rip(phi, SumSecantSampler(a, b), spec.samples, derive_seed(seed, 2)));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegenerateManifold) throw Error(ErrorCode::Config, e.what());
    throw;
  }
  return out;
}

inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  switch (spec.scenario) {
    case Scenario::PairsOfBases: return run_pairs_of_bases(spec);
    case Scenario::DiskSquare: return run_disk_square(spec);
    case Scenario::PulseImpulse: return run_pulse_impulse(spec);
    case Scenario::MonteCarlo: return run_montecarlo(spec);
    case Scenario::EstimateGeometry: return run_estimate_geometry(spec);
  }
  throw Error(ErrorCode::Config, "unknown scenario");
}

// ---------------------------------------------------------------------------
// Output files

inline constexpr const char* kTrialsHeader =
    "trial,seed,scenario,n,m,k1,k2,kprime,snr_db,eta,iterations,final_psi,recovery_snr_a_db,"
    "recovery_snr_b_db,recovery_snr_x_db,param_match_a,param_match_b";

inline std::string trial_row(const TrialRecord& r) {
  using io::format_double;
  std::ostringstream s;
  s << r.trial << ',' << r.seed << ',' << to_string(r.scenario) << ',' << r.n << ',' << r.m << ','
    << r.k1 << ',' << r.k2 << ',' << r.kprime << ','
    << (r.snr_db ? format_double(*r.snr_db) : std::string("none")) << ',' << format_double(r.eta)
    << ',' << r.iterations << ',' << format_double(r.final_psi) << ','
    << format_double(r.recovery_snr_a_db) << ',' << format_double(r.recovery_snr_b_db) << ','
    << format_double(r.recovery_snr_x_db) << ',' << (r.param_match_a ? 1 : 0) << ','
    << (r.param_match_b ? 1 : 0);
  return s.str();
}

inline void write_trials_csv(const std::filesystem::path& path, const std::vector<TrialRun>& runs) {
  auto out = io::open_output(path);
  out << kTrialsHeader << '\n';
  for (const auto& r : runs) out << trial_row(r.record) << '\n';
}

inline std::vector<std::pair<std::string, std::string>> metadata(const ExperimentSpec& spec) {
  using io::format_double;
  auto join = [](const std::vector<Index>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
    return s;
  };
  return {
      {"scenario", to_string(spec.scenario)},
      {"master_seed", std::to_string(spec.master_seed)},
      {"trials", std::to_string(spec.trials)},
      {"n", std::to_string(spec.n)},
      {"height", std::to_string(spec.height)},
      {"width", std::to_string(spec.width)},
      {"m", std::to_string(spec.m)},
      {"k1", std::to_string(spec.k1)},
      {"k2", std::to_string(spec.k2)},
      {"kprime", std::to_string(spec.kprime)},
      {"snr_db", spec.snr_db ? format_double(*spec.snr_db) : "none"},
      {"eta", format_double(spec.solver.eta)},
      {"max_iters", std::to_string(spec.solver.max_iters)},
      {"nu", format_double(spec.solver.nu)},
      {"stop_rule", to_string(spec.solver.stop_rule)},
      {"relative_tol", format_double(spec.solver.relative_tol)},
      {"gamma_a", format_double(spec.solver.gamma_a)},
      {"gamma_b", format_double(spec.solver.gamma_b)},
      {"operator", "gaussian entries N(0,1/m); per-trial seed = derive(trial_seed, 3)"},
      {"m_grid", join(spec.m_grid)},
      {"kprime_grid", join(spec.kprime_grid)},
      {"pulse_sigma", format_double(spec.pulse_sigma)},
      {"disk_radius", format_double(spec.disk_radius)},
      {"square_side", std::to_string(spec.square_side)},
      {"blur_sigma", format_double(spec.blur_sigma)},
      {"basis_b", spec.basis_b == SecondBasis::Hadamard ? "hadamard" : "dct"},
      {"spikes", spec.spikes == SpikeAmplitudes::Normal ? "normal" : "rademacher"},
  };
}

inline void write_psi_trace_csv(const std::filesystem::path& path, const ExperimentSpec& spec,
                                const TrialRun& run) {
  auto out = io::open_output(path);
  for (const auto& [k, v] : metadata(spec)) out << "# " << k << '=' << v << '\n';
  out << "# trial=" << run.record.trial << '\n' << "# trial_seed=" << run.record.seed << '\n';
  out << "iteration,psi\n";
  for (std::size_t i = 0; i < run.psi_trace.size(); ++i) {
    out << i << ',' << io::format_double(run.psi_trace[i]) << '\n';
  }
}

inline void write_outputs(const ExperimentSpec& spec, const ExperimentResult& result) {
  const auto& dir = spec.output_dir;
  std::filesystem::create_directories(dir);
  {
    auto meta = io::open_output(dir / "metadata.csv");
    meta << "key,value\n";
    for (const auto& [k, v] : metadata(spec)) meta << k << ',' << v << '\n';
  }
  if (spec.scenario == Scenario::EstimateGeometry) {
    auto out = io::open_output(dir / "geometry.csv");
    out << "kind,value,samples,seed\n";
    for (const auto& g : result.geometry) {
      out << to_string(g.kind) << ',' << io::format_double(g.value) << ',' << g.sample_count << ','
          << g.seed << '\n';
    }
    return;
  }
  write_trials_csv(dir / "trials.csv", result.runs);
  if (spec.scenario != Scenario::MonteCarlo) {
    for (const auto& run : result.runs) {
      write_psi_trace_csv(dir / ("psi_trace_" + std::to_string(run.record.trial) + ".csv"), spec, run);
    }
  }
  if (result.pairs) {
    auto out = io::open_output(dir / "pairs_summary.csv");
    out << "n,k1,k2,mu,epsilon_bound,recoverable,exact_recovery_rate\n";
    out << spec.n << ',' << spec.k1 << ',' << spec.k2 << ',' << io::format_double(result.pairs->mu)
        << ',' << io::format_double(result.pairs->epsilon_bound) << ','
        << (result.pairs->recoverable ? 1 : 0) << ','
        << io::format_double(result.pairs->exact_recovery_rate) << '\n';
  }
  if (spec.scenario == Scenario::MonteCarlo) {
    auto out = io::open_output(dir / "montecarlo_summary.csv");
    out << "kprime,m,trials,mean_err_db,std_err_db\n";
    for (const auto& c : result.summary) {
      out << c.kprime << ',' << c.m << ',' << c.trials << ',' << io::format_double(c.mean_err_db)
          << ',' << io::format_double(c.std_err_db) << '\n';
    }
    auto th = io::open_output(dir / "montecarlo_thresholds.csv");
    th << "kprime,threshold_m\n";
    for (const auto& t : result.thresholds) {
      th << t.kprime << ',' << (t.m ? std::to_string(*t.m) : std::string("none")) << '\n';
    }
  }
  if (spec.save_images && spec.scenario == Scenario::DiskSquare) {
    for (const auto& run : result.runs) {
      const std::string t = std::to_string(run.record.trial);
      io::write_pgm(dir / ("truth_a_" + t + ".pgm"), run.truth_a, spec.height, spec.width);
      io::write_pgm(dir / ("truth_b_" + t + ".pgm"), run.truth_b, spec.height, spec.width);
      if (run.estimate_a.size() == spec.n) {
        io::write_pgm(dir / ("recovered_a_" + t + ".pgm"), run.estimate_a, spec.height, spec.width);
        io::write_pgm(dir / ("recovered_b_" + t + ".pgm"), run.estimate_b, spec.height, spec.width);
      }
    }
  }
}

}  // namespace spin::experiments

#endif  // SPIN_EXPERIMENTS_HPP
