// Command-line front end over the C API.
//
//   lwir simulate --out DIR [--config FILE]
//   lwir train    --data DIR --out DIR [--config FILE] [--mode M] [--epochs N] [--from-checkpoint F]
//   lwir retrieve --checkpoint F --data PATH --out DIR [--criterion C] [--t-grid a:b:c] [--eps-bar E]
//   lwir evaluate --checkpoint F --data DIR --out DIR
//
// Common: --seed N, --force, --workers N (default $LWIR_WORKERS or 1), --quiet.
// Exit codes: 0 ok, 2 configuration, 3 data, 4 numerical failure.

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lwir.h"

namespace {

int exit_code(lwir_status s) {
  switch (s) {
    case LWIR_OK: return 0;
    case LWIR_ERR_CONFIG:
    case LWIR_ERR_DOMAIN:
    case LWIR_ERR_INVALID_ARGUMENT: return 2;
    case LWIR_ERR_DATA:
    case LWIR_ERR_IO: return 3;
    case LWIR_ERR_NUMERICAL: return 4;
    default: return 1;
  }
}

struct Common {
  std::optional<long long> seed;
  bool force = false;
  std::optional<int> workers;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Override the configured seed")->check(CLI::NonNegativeNumber);
  app->add_flag("--force", c.force, "Overwrite an existing output directory");
  app->add_option("--workers", c.workers, "Worker threads for inference and retrieval")->check(CLI::PositiveNumber);
  app->add_flag("-q,--quiet", c.quiet, "No progress output");
}

using Options = std::unique_ptr<lwir_options, decltype(&lwir_options_free)>;

lwir_status set(lwir_options* o, const char* k, const std::string& v) { return lwir_options_set(o, k, v.c_str()); }

void log_line(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LWIR atmospheric compensation: simulate, train, retrieve, evaluate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", lwir_version());

  Common common;
  std::string config, data, out, checkpoint, from_checkpoint, mode, criterion, t_grid;
  std::optional<int> epochs;
  std::optional<double> eps_bar;

  auto* sim = app.add_subcommand("simulate", "Generate simulated and field-like datasets");
  sim->add_option("--config", config, "Simulation config (default: desk preset)")->check(CLI::ExistingFile);
  sim->add_option("--out", out, "Output directory")->required();
  add_common(sim, common);

  auto* tr = app.add_subcommand("train", "Train the network on a simulate output directory");
  tr->add_option("--config", config, "Training config")->check(CLI::ExistingFile);
  tr->add_option("--data", data, "Directory written by simulate")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", out, "Output directory")->required();
  tr->add_option("--mode", mode, "mixed | ill-posed");
  tr->add_option("--epochs", epochs, "Total epochs")->check(CLI::PositiveNumber);
  tr->add_option("--from-checkpoint", from_checkpoint, "Resume from a checkpoint.lwnn")->check(CLI::ExistingFile);
  add_common(tr, common);

  auto* re = app.add_subcommand("retrieve", "Temperature-emissivity separation");
  re->add_option("--checkpoint", checkpoint, "Trained model")->required()->check(CLI::ExistingFile);
  re->add_option("--data", data, "Dataset file or simulate output directory")->required()->check(CLI::ExistingPath);
  re->add_option("--out", out, "Output directory")->required();
  re->add_option("--criterion", criterion, "mae | mae+norm");
  re->add_option("--t-grid", t_grid, "Search grid min:max:step in K (default 280:320:5)");
  re->add_option("--eps-bar", eps_bar, "Mean emissivity prior (required for unlabelled data)");
  add_common(re, common);

  auto* ev = app.add_subcommand("evaluate", "Error tables, residual fields, purity and invariant checks");
  ev->add_option("--checkpoint", checkpoint, "Trained model")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "Directory written by simulate")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--out", out, "Output directory")->required();
  add_common(ev, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  lwir_options* raw = nullptr;
  if (lwir_options_new(&raw) != LWIR_OK) return 1;
  Options opts(raw, lwir_options_free);

  lwir_status s = LWIR_OK;
  const auto apply = [&](const char* key, const std::string& value) {
    if (s == LWIR_OK) s = set(opts.get(), key, value);
  };
  if (common.seed) apply("seed", std::to_string(*common.seed));
  if (common.force) apply("force", "true");
  if (common.workers) {
    apply("workers", std::to_string(*common.workers));
  } else if (const char* env = std::getenv("LWIR_WORKERS"); env && *env) {
    apply("workers", env);
  }
  if (!mode.empty()) apply("mode", mode);
  if (epochs) apply("epochs", std::to_string(*epochs));
  if (!from_checkpoint.empty()) apply("from_checkpoint", from_checkpoint);
  if (!criterion.empty()) apply("criterion", criterion);
  if (!t_grid.empty()) apply("t_grid", t_grid);
  if (eps_bar) apply("eps_bar", CLI::detail::to_string(*eps_bar));
  if (!common.quiet) lwir_set_log_callback(log_line, nullptr);

  if (s == LWIR_OK) {
    if (*sim) {
      s = lwir_cmd_simulate(config.c_str(), out.c_str(), opts.get());
    } else if (*tr) {
      s = lwir_cmd_train(config.c_str(), data.c_str(), out.c_str(), opts.get());
    } else if (*re) {
      s = lwir_cmd_retrieve(checkpoint.c_str(), data.c_str(), out.c_str(), opts.get());
    } else {
      s = lwir_cmd_evaluate(checkpoint.c_str(), data.c_str(), out.c_str(), opts.get());
    }
  }
  if (s != LWIR_OK) {
    std::fprintf(stderr, "lwir: %s: %s\n", lwir_status_string(s), lwir_last_error());
  }
  return exit_code(s);
}
