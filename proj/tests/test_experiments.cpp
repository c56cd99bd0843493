#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "spin/experiments.hpp"

using namespace spin;
namespace ex = spin::experiments;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("spin_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

ex::ExperimentSpec small_pulse() {
  auto s = ex::default_spec(ex::Scenario::PulseImpulse);
  s.n = s.width = 512;
  s.m = 60;
  s.kprime = 3;
  s.pulse_sigma = 15.0;
  s.trials = 6;
  return s;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Config, ParsesCommentsAndValues) {
  std::istringstream in("# comment\n\nseed = 7\ntrials=3\nsnr-db = none\nm-grid = 0:100:50\nkprime-grid=5, 10\n");
  auto spec = ex::default_spec(ex::Scenario::MonteCarlo);
  ex::apply_settings(spec, ex::parse_config(in));
  EXPECT_EQ(spec.master_seed, 7u);
  EXPECT_EQ(spec.trials, 3);
  EXPECT_FALSE(spec.snr_db);
  EXPECT_EQ(spec.m_grid, (std::vector<Index>{0, 50, 100}));
  EXPECT_EQ(spec.kprime_grid, (std::vector<Index>{5, 10}));
}

TEST(Config, UnknownKeyAndBadValues) {
  auto spec = ex::default_spec(ex::Scenario::PulseImpulse);
  EXPECT_EQ(code_of([&] { ex::apply_settings(spec, {{"colour", "red"}}); }), ErrorCode::Config);
  EXPECT_EQ(code_of([&] { ex::apply_settings(spec, {{"m", "ten"}}); }), ErrorCode::Config);
  EXPECT_EQ(code_of([&] { ex::apply_settings(spec, {{"eta", "0.5x"}}); }), ErrorCode::Config);
  EXPECT_EQ(code_of([&] { ex::apply_settings(spec, {{"stop-rule", "never"}}); }), ErrorCode::Config);
  std::istringstream in("seed 7\n");
  EXPECT_EQ(code_of([&] { ex::parse_config(in); }), ErrorCode::Config);
}

TEST(Config, DimensionsAndScenarioRules) {
  auto ds = ex::default_spec(ex::Scenario::DiskSquare);
  ex::apply_settings(ds, {{"n", "1024"}});
  EXPECT_EQ(ds.height, 32);
  EXPECT_EQ(ds.width, 32);
  EXPECT_EQ(code_of([&] { ex::apply_settings(ds, {{"n", "1000"}}); }), ErrorCode::Config);

  auto pb = ex::default_spec(ex::Scenario::PairsOfBases);
  ex::apply_settings(pb, {{"n", "100"}});
  EXPECT_EQ(code_of([&] { pb.validate(); }), ErrorCode::Config);
  ex::apply_settings(pb, {{"basis", "dct"}});
  EXPECT_NO_THROW(pb.validate());

  auto pi = ex::default_spec(ex::Scenario::PulseImpulse);
  pi.trials = 0;
  EXPECT_EQ(code_of([&] { pi.validate(); }), ErrorCode::Config);
  pi.trials = 1;
  pi.solver.eta = -1.0;
  EXPECT_EQ(code_of([&] { pi.validate(); }), ErrorCode::Config);
}

TEST(Config, DefaultsAreValid) {
  for (auto s : {ex::Scenario::PairsOfBases, ex::Scenario::DiskSquare, ex::Scenario::PulseImpulse,
                 ex::Scenario::MonteCarlo, ex::Scenario::EstimateGeometry}) {
    EXPECT_NO_THROW(ex::default_spec(s).validate()) << ex::to_string(s);
    EXPECT_EQ(ex::parse_scenario(ex::to_string(s)), s);
  }
  const auto mc = ex::default_spec(ex::Scenario::MonteCarlo);
  EXPECT_EQ(mc.m_grid.front(), 25);
  EXPECT_EQ(mc.m_grid.back(), 400);
  EXPECT_EQ(mc.m_grid.size(), 16u);
  EXPECT_EQ(ex::default_spec(ex::Scenario::DiskSquare).snr_db, std::optional<double>(14.0));
}

TEST(Trials, SeedsDeriveFromMasterAndIndex) {
  auto spec = small_pulse();
  spec.master_seed = 11;
  const auto result = ex::run_pulse_impulse(spec);
  for (const auto& run : result.runs) {
    EXPECT_EQ(run.record.seed, derive_seed(11, static_cast<std::uint64_t>(run.record.trial)));
  }
}

TEST(Trials, ThreadCountDoesNotChangeResults) {
  auto spec = small_pulse();
  const auto one = ex::run_pulse_impulse(spec);
  spec.threads = 3;
  const auto three = ex::run_pulse_impulse(spec);
  ASSERT_EQ(one.runs.size(), three.runs.size());
  for (std::size_t i = 0; i < one.runs.size(); ++i) {
    EXPECT_EQ(ex::trial_row(one.runs[i].record), ex::trial_row(three.runs[i].record));
    EXPECT_EQ(one.runs[i].psi_trace, three.runs[i].psi_trace);
  }
}

TEST(Trials, NoSpikesReducesToSingleManifold) {
  auto spec = small_pulse();
  spec.kprime = 0;
  const auto pulse = ex::pulse_model(spec);
  const auto run = ex::pulse_impulse_trial(spec, pulse, spec.m, 0, 2);

  const std::uint64_t seed = ex::trial_seed(spec.master_seed, 2);
  const auto& t = std::get<TranslatedTemplate>(pulse.variant());
  const SignalVector a = t.point_at(t.sample_shift(derive_seed(seed, ex::stream::kComponentA)));
  const auto phi = gaussian_operator(spec.m, spec.n, derive_seed(seed, ex::stream::kOperator));
  const auto mip = spin::spin(phi.apply(a), phi, pulse, ManifoldModel::zero(spec.n), spec.solver);
  EXPECT_EQ(run.psi_trace, mip.psi_trace);
  EXPECT_EQ(run.record.recovery_snr_a_db, recovery_snr(a, mip.a_hat));
  EXPECT_TRUE(run.record.param_match_b);
}

TEST(PairsOfBases, EmitsCoherenceAndBound) {
  auto spec = ex::default_spec(ex::Scenario::PairsOfBases);
  spec.n = spec.width = 64;
  spec.k1 = spec.k2 = 2;
  spec.trials = 5;
  const auto r = ex::run_pairs_of_bases(spec);
  ASSERT_TRUE(r.pairs);
  EXPECT_DOUBLE_EQ(r.pairs->mu, 0.125);
  EXPECT_DOUBLE_EQ(r.pairs->epsilon_bound, 0.5);
  EXPECT_FALSE(r.pairs->recoverable);
}

TEST(PairsOfBases, EmptySignalsAreTriviallyRecovered) {
  auto spec = ex::default_spec(ex::Scenario::PairsOfBases);
  spec.n = spec.width = 64;
  spec.k1 = spec.k2 = 0;
  spec.trials = 3;
  const auto r = ex::run_pairs_of_bases(spec);
  for (const auto& run : r.runs) {
    EXPECT_EQ(run.psi_trace, std::vector<double>{0.0});
    EXPECT_EQ(run.record.iterations, 0);
    EXPECT_TRUE(run.record.param_match_a && run.record.param_match_b);
    EXPECT_EQ(run.record.recovery_snr_x_db, kSnrCapDb);
  }
}

TEST(PairsOfBases, DefaultConfigurationRate) {
  // Regression value measured on the default seed.
  const auto r = ex::run_pairs_of_bases(ex::default_spec(ex::Scenario::PairsOfBases));
  EXPECT_EQ(r.runs.size(), 50u);
  EXPECT_EQ(r.pairs->exact_recovery_rate, 1.0);
}

TEST(DiskSquare, NoiselessIdentityRecoversShifts) {
  auto spec = ex::default_spec(ex::Scenario::DiskSquare);
  const auto models = ex::disk_square_models(spec);
  const auto& disk = std::get<TranslatedTemplate>(models.disk.variant());
  const auto& square = std::get<TranslatedTemplate>(models.square.variant());
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Shift sa{3 + static_cast<Index>(s), 5};
    const Shift sb{35, 30 + static_cast<Index>(s)};
    const SignalVector x = disk.point_at(sa) + square.point_at(sb);
    const auto res = spin::spin(x, MeasurementOperator::identity(spec.n), models.disk, models.square, SpinConfig{});
    EXPECT_EQ(std::get<Shift>(res.parameter_a), sa);
    EXPECT_EQ(std::get<Shift>(res.parameter_b), sb);
  }
}

TEST(DiskSquare, DefaultConfigurationRate) {
  // Regression value measured on the default seed.
  const auto r = ex::run_disk_square(ex::default_spec(ex::Scenario::DiskSquare));
  EXPECT_EQ(r.runs.size(), 20u);
  EXPECT_EQ(ex::exact_rate(r.runs), 0.75);
}

TEST(MonteCarlo, ZeroMeasurementsGiveZeroDb) {
  auto spec = ex::default_spec(ex::Scenario::MonteCarlo);
  spec.n = spec.width = 512;
  spec.pulse_sigma = 15.0;
  spec.trials = 3;
  spec.m_grid = {0, 120};
  spec.kprime_grid = {2};
  const auto r = ex::run_montecarlo(spec);
  ASSERT_EQ(r.summary.size(), 2u);
  EXPECT_EQ(r.summary[0].m, 0);
  EXPECT_NEAR(r.summary[0].mean_err_db, 0.0, 1e-12);
  EXPECT_EQ(r.summary[0].std_err_db, 0.0);
  EXPECT_LT(r.summary[1].mean_err_db, -40.0);
  ASSERT_EQ(r.thresholds.size(), 1u);
  EXPECT_EQ(r.thresholds[0].m, std::optional<Index>(120));
}

TEST(MonteCarlo, CommonSeedsAcrossGrid) {
  auto spec = ex::default_spec(ex::Scenario::MonteCarlo);
  spec.n = spec.width = 512;
  spec.pulse_sigma = 15.0;
  spec.trials = 2;
  spec.m_grid = {40, 80};
  spec.kprime_grid = {1, 2};
  const auto r = ex::run_montecarlo(spec);
  ASSERT_EQ(r.runs.size(), 8u);
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    EXPECT_EQ(r.runs[i].record.trial, static_cast<std::int64_t>(i % 2));
    EXPECT_EQ(r.runs[i].record.seed, ex::trial_seed(0, static_cast<std::int64_t>(i % 2)));
  }
  EXPECT_EQ(r.runs[2].record.m, 80);
  EXPECT_EQ(r.runs[4].record.kprime, 2);
}

TEST(Geometry, BasesEstimates) {
  auto spec = ex::default_spec(ex::Scenario::EstimateGeometry);
  const auto r = ex::run_estimate_geometry(spec);
  ASSERT_EQ(r.geometry.size(), 3u);
  EXPECT_EQ(r.geometry[0].kind, EstimateKind::MutualCoherence);
  EXPECT_DOUBLE_EQ(r.geometry[0].value, 0.125);
  EXPECT_LE(r.geometry[1].value, 0.5 + 1e-12);
  EXPECT_EQ(r.geometry[2].kind, EstimateKind::Rip);
  EXPECT_EQ(r.geometry[2].sample_count, spec.samples);
}

TEST(Output, FilesAndSchema) {
  auto spec = small_pulse();
  spec.trials = 2;
  spec.output_dir = scratch("schema");
  ex::write_outputs(spec, ex::run_pulse_impulse(spec));
  const std::string trials = slurp(spec.output_dir / "trials.csv");
  EXPECT_EQ(trials.substr(0, trials.find('\n')), ex::kTrialsHeader);
  EXPECT_EQ(std::count(trials.begin(), trials.end(), '\n'), 3);
  EXPECT_EQ(trials.find('\r'), std::string::npos);
  const std::string trace = slurp(spec.output_dir / "psi_trace_1.csv");
  EXPECT_EQ(trace.rfind("# ", 0), 0u);
  EXPECT_NE(trace.find("# eta=0.59999999999999998\n"), std::string::npos);
  EXPECT_NE(trace.find("\niteration,psi\n0,"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(spec.output_dir / "metadata.csv"));
}

TEST(Output, RerunIsByteIdentical) {
  auto spec = small_pulse();
  spec.output_dir = scratch("rerun_a");
  ex::write_outputs(spec, ex::run_pulse_impulse(spec));
  auto again = spec;
  again.output_dir = scratch("rerun_b");
  again.threads = 2;
  ex::write_outputs(again, ex::run_pulse_impulse(again));
  for (const auto& entry : std::filesystem::directory_iterator(spec.output_dir)) {
    const auto name = entry.path().filename();
    if (name == "metadata.csv" || name.string().rfind("psi_trace", 0) == 0) continue;
    EXPECT_EQ(slurp(entry.path()), slurp(again.output_dir / name)) << name;
  }
}

TEST(Output, ImagesWhenRequested) {
  auto spec = ex::default_spec(ex::Scenario::DiskSquare);
  spec.height = spec.width = 32;
  spec.n = 1024;
  spec.trials = 1;
  spec.save_images = true;
  spec.output_dir = scratch("images");
  ex::write_outputs(spec, ex::run_disk_square(spec));
  for (const char* f : {"truth_a_0.pgm", "truth_b_0.pgm", "recovered_a_0.pgm", "recovered_b_0.pgm"}) {
    const auto img = io::read_pgm(spec.output_dir / f);
    EXPECT_EQ(img.height, 32);
    EXPECT_EQ(img.width, 32);
  }
}

TEST(Output, MonteCarloSummaryHeader) {
  auto spec = ex::default_spec(ex::Scenario::MonteCarlo);
  spec.n = spec.width = 256;
  spec.pulse_sigma = 10.0;
  spec.trials = 2;
  spec.m_grid = {30};
  spec.kprime_grid = {1};
  spec.output_dir = scratch("mc");
  ex::write_outputs(spec, ex::run_montecarlo(spec));
  const std::string summary = slurp(spec.output_dir / "montecarlo_summary.csv");
  EXPECT_EQ(summary.rfind("kprime,m,trials,mean_err_db,std_err_db\n1,30,2,", 0), 0u);
  EXPECT_EQ(slurp(spec.output_dir / "montecarlo_thresholds.csv").rfind("kprime,threshold_m\n", 0), 0u);
}
