// Command-line front end: one subcommand per experiment mode.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gibbslab/config.hpp"
#include "gibbslab/report.hpp"

using namespace gibbslab;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trials;
  std::string out;
  std::optional<int> threads;
  std::string format;
  std::string posterior = "exact";
};

int run(const Flags& f, std::optional<Mode> mode) {
  ExperimentConfig cfg;
  if (!f.config.empty()) {
    try {
      cfg = load_config(f.config);
    } catch (const Error& e) {
      // An unreadable config file is the caller's mistake, not a failed run.
      if (e.code() != ErrorCode::kIo) throw;
      fail(ErrorCode::kConfig, e.what());
    }
  } else if (!mode) {
    fail(ErrorCode::kConfig, "sweep needs --config");
  }
  if (mode) cfg.mode = *mode;
  if (cfg.mode == Mode::MonteCarlo && f.posterior == "sgld") cfg.mode = Mode::SGLD;
  if (f.seed) cfg.seed = *f.seed;
  if (f.trials) cfg.trials = *f.trials;
  if (f.threads) cfg.threads = *f.threads;
  if (!f.out.empty()) cfg.output_path = f.out;
  if (!f.format.empty()) {
    auto fmt = format_from_string(f.format);
    if (!fmt) fail(ErrorCode::kConfig, "field 'format': expected csv or json");
    cfg.format = *fmt;
  } else if (f.config.empty() && cfg.mode == Mode::Validate) {
    cfg.format = OutputFormat::Json;
  }
  cfg.validate();

  // Data goes to stdout when no output path is set; the summary then moves
  // to stderr so the two never interleave.
  const bool to_stdout = cfg.output_path.empty();
  const auto report = run_experiment(cfg, to_stdout ? std::cerr : std::cout);
  if (to_stdout) {
    if (cfg.format == OutputFormat::Csv)
      write_csv(report.table, std::cout);
    else
      write_json(report.table, std::cout);
  }
  return report.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gibbs transfer-learning laboratory"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "JSON experiment config");
  app.add_option("--seed", f.seed, "Base seed");
  app.add_option("--trials", f.trials, "Monte Carlo trials per grid point");
  app.add_option("--out", f.out, "Output file");
  app.add_option("--threads", f.threads, "Worker threads (0 = all cores)");
  app.add_option("--format", f.format, "Output format")->check(CLI::IsMember({"csv", "json"}));

  struct Sub {
    const char* name;
    const char* help;
    std::optional<Mode> mode;
  };
  const Sub subs[] = {
      {"closed-form", "Closed-form generalization errors and excess risks", Mode::ClosedForm},
      {"simulate", "Monte Carlo generalization error", Mode::MonteCarlo},
      {"bounds", "Tail-certified bounds against Monte Carlo", Mode::Bounds},
      {"asymptotics", "MLE asymptotics and excess-risk decomposition", Mode::Asymptotics},
      {"validate", "Identity checks with z-scores", Mode::Validate},
      {"sweep", "Run the mode named in the config", std::nullopt},
  };
  std::optional<Mode> chosen;
  bool sweep = false;
  for (const auto& s : subs) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    if (std::string(s.name) == "simulate")
      cmd->add_option("--posterior", f.posterior, "Posterior sampler")
          ->check(CLI::IsMember({"exact", "sgld"}));
    cmd->callback([&chosen, &sweep, s] {
      chosen = s.mode;
      sweep = !s.mode.has_value();
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }

  try {
    return run(f, sweep ? std::nullopt : chosen);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kConfig ? kExitConfigError : kExitRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}
