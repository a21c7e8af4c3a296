#include <CLI11.hpp>
#include <cstdio>
#include <optional>
#include <string>

#include "emu/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config;
  std::optional<std::uint64_t> stage_seed;
  std::optional<int> workers;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config, "Pipeline configuration file (INI)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--stage-seed", o.stage_seed,
                  "Override the derived seed for this stage");
  cmd->add_option("--workers", o.workers,
                  "Worker threads (default: [pipeline].workers or 1)");
  cmd->add_option("--out", o.out,
                  "Output directory (default: [pipeline].out)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Function-emulation MCMC for models with intractable "
               "normalizing constants"};
  app.require_subcommand(1);

  CommonOpts opts;
  using Stage = void (*)(const emu::pipe::StageContext&);
  struct Sub {
    const char* name;
    const char* help;
    Stage fn;
  };
  const Sub subs[] = {
      {"simulate", "Draw a synthetic data set at [simulate].truth",
       emu::pipe::cmd_simulate},
      {"particles", "Select design particles (abc, dmh, or lhs)",
       emu::pipe::cmd_particles},
      {"precompute", "Importance-sample log estimates at every particle",
       emu::pipe::cmd_precompute},
      {"run", "Fit the emulator (if needed) and run the MCMC chain",
       emu::pipe::cmd_run},
      {"diagnose", "Summarize a chain (ESS, MCSE, HPD, optional TV)",
       emu::pipe::cmd_diagnose},
      {"bench", "Per-iteration timing study across network sizes",
       emu::pipe::cmd_bench},
  };

  Stage selected = nullptr;
  for (const auto& s : subs) {
    CLI::App* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, opts);
    cmd->callback([&selected, fn = s.fn] { selected = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Keep exit codes to the documented contract: --help stays 0, every
    // command-line problem (unknown flag, missing subcommand, absent config
    // file) exits 2 like any other invalid-usage error.
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto ctx = emu::pipe::make_context(opts.config, opts.stage_seed,
                                             opts.workers, opts.out);
    selected(ctx);
  } catch (const emu::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const emu::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
  return 0;
}
