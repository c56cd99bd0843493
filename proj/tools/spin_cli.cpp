#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spin/experiments.hpp"

namespace {

namespace ex = spin::experiments;

struct OptionDef {
  const char* key;
  const char* help;
};

constexpr OptionDef kValueOptions[] = {
    {"seed", "master seed"},
    {"trials", "number of trials"},
    {"m", "number of measurements"},
    {"n", "signal length (disk-square: pixel count, a perfect square)"},
    {"k1", "sparsity of the first component"},
    {"k2", "sparsity of the second component"},
    {"kprime", "number of spikes"},
    {"snr-db", "signal SNR in dB, or 'none'"},
    {"eta", "gradient step size"},
    {"max-iters", "iteration cap"},
    {"nu", "psi threshold"},
    {"out", "output directory"},
    {"height", "image height"},
    {"width", "image width"},
    {"m-grid", "Monte Carlo M values: list a,b,c or start:stop:step"},
    {"kprime-grid", "Monte Carlo K' values"},
    {"pulse-sigma", "Gaussian pulse width"},
    {"disk-radius", "disk radius in pixels"},
    {"square-side", "square side in pixels"},
    {"blur-sigma", "template blur width (0 = sharp)"},
    {"basis", "second basis: hadamard or dct"},
    {"spikes", "spike amplitudes: normal or rademacher"},
    {"stop-rule", "fixed-T, psi-threshold or relative-change"},
    {"tol", "relative-change tolerance"},
    {"gamma", "projection slack for template manifolds"},
    {"samples", "geometry estimator sample count"},
    {"manifolds", "estimate-geometry model: bases or pulse-impulse"},
    {"threads", "worker threads"},
};

struct Subcommand {
  CLI::App* app = nullptr;
  ex::Scenario scenario{};
  std::string config_positional;
  std::string config_flag;
  std::map<std::string, std::string> values;
  bool save_images = false;
};

void summarize(const ex::ExperimentSpec& spec, const ex::ExperimentResult& result) {
  if (spec.scenario == ex::Scenario::EstimateGeometry) {
    for (const auto& g : result.geometry) {
      std::cout << spin::to_string(g.kind) << ' ' << spin::io::format_double(g.value) << '\n';
    }
  } else {
    std::cout << result.runs.size() << " trials, exact parameter recovery rate "
              << ex::exact_rate(result.runs) << '\n';
  }
  std::cout << "wrote " << spec.output_dir.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recover two superposed signals from compressive measurements"};
  app.require_subcommand(1);

  std::vector<Subcommand> subs;
  subs.reserve(5);
  const std::pair<ex::Scenario, const char*> scenarios[] = {
      {ex::Scenario::PairsOfBases, "sparse signals in two orthonormal bases"},
      {ex::Scenario::DiskSquare, "shifted disk + shifted square image"},
      {ex::Scenario::PulseImpulse, "Gaussian pulse in impulsive noise"},
      {ex::Scenario::MonteCarlo, "pulse-impulse sweep over (M, K')"},
      {ex::Scenario::EstimateGeometry, "sampled incoherence / RIP / mutual coherence"},
  };
  for (const auto& [scenario, description] : scenarios) {
    Subcommand& s = subs.emplace_back();
    s.scenario = scenario;
    s.app = app.add_subcommand(ex::to_string(scenario), description);
    s.app->add_option("config_file", s.config_positional, "key=value config file");
    s.app->add_option("--config", s.config_flag, "key=value config file");
    for (const auto& opt : kValueOptions) {
      s.app->add_option(std::string("--") + opt.key, s.values[opt.key], opt.help);
    }
    s.app->add_flag("--save-images", s.save_images, "write PGM images (disk-square)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (auto& s : subs) {
    if (!s.app->parsed()) continue;
    ex::ExperimentSpec spec = ex::default_spec(s.scenario);
    try {
      if (!s.config_positional.empty() && !s.config_flag.empty()) {
        throw spin::Error(spin::ErrorCode::Config, "config given both positionally and by --config");
      }
      const std::string config = s.config_flag.empty() ? s.config_positional : s.config_flag;
      ex::Settings settings;
      if (!config.empty()) settings = ex::read_config_file(config);
      for (const auto& opt : kValueOptions) {
        if (s.app->count(std::string("--") + opt.key) > 0) settings[opt.key] = s.values[opt.key];
      }
      if (s.save_images) settings["save-images"] = "true";
      ex::apply_settings(spec, settings);
      spec.validate();
    } catch (const spin::Error& e) {
      std::cerr << "spin: configuration error: " << e.what() << '\n';
      return 2;
    }

    try {
      const ex::ExperimentResult result = ex::run_experiment(spec);
      ex::write_outputs(spec, result);
      summarize(spec, result);
    } catch (const spin::Error& e) {
      if (e.code() == spin::ErrorCode::Config) {
        std::cerr << "spin: configuration error: " << e.what() << '\n';
        return 2;
      }
      std::cerr << "spin: " << e.what() << '\n';
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "spin: " << e.what() << '\n';
      return 1;
    }
  }
  return 0;
}
