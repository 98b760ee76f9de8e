#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lwir/config.hpp"

namespace lwir {

inline constexpr const char* kVersion = "0.1.0";

/// File names inside command output directories.
inline constexpr const char* kManifestFile = "manifest.txt";
inline constexpr const char* kSimulatedFile = "simulated.lwds";
inline constexpr const char* kFieldFile = "field.lwds";
inline constexpr const char* kModelFile = "model.lwnn";
inline constexpr const char* kCheckpointFile = "checkpoint.lwnn";

/// Overrides shared by the pipeline commands. Unset fields keep the value
/// from the config file (or the built-in default).
struct CommandOptions {
  std::optional<std::uint64_t> seed;
  bool force = false;
  int workers = 1;
  std::optional<std::string> mode;
  std::optional<int> epochs;
  std::string from_checkpoint;
  std::optional<std::string> criterion;
  std::optional<std::string> t_grid;
  std::optional<double> eps_bar;
  std::function<void(const std::string&)> log;
};

/// command, config hash, dataset hashes, seed, code version, timestamps and
/// the list of files the command wrote.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::vector<std::pair<std::string, std::string>> dataset_hashes;  // file name, hex hash
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;
  KeyValueConfig extra;

  KeyValueConfig to_config() const;
  static RunManifest from_config(const KeyValueConfig& c);
  static RunManifest load(const std::string& dir);
};

/// Writes simulated.lwds (and field.lwds when enabled). An empty config path
/// runs the desk preset.
void cmd_simulate(const std::string& config_path, const std::string& out_dir, const CommandOptions& opt);

/// Trains on the datasets in `data_dir` (as written by cmd_simulate) and
/// writes model.lwnn (best validation weights), checkpoint.lwnn (resumable
/// last state), report.csv and the manifest. Config keys are the TrainConfig
/// keys plus split_seed and data.config_hash (expected dataset config hash).
void cmd_train(const std::string& config_path, const std::string& data_dir, const std::string& out_dir,
               const CommandOptions& opt);

/// Temperature-emissivity separation with network-predicted atmosphere.
/// `data` is a dataset file or a simulate output directory (its simulated
/// test split when the checkpoint was trained on it, every record otherwise).
/// Writes tes_pixels.csv, tes_scores.csv, tes_emissivity.csv, summary.csv.
void cmd_retrieve(const std::string& checkpoint, const std::string& data, const std::string& out_dir,
                  const CommandOptions& opt);

/// Component error tables, residual fields, purity and blackbody-temperature
/// statistics plus embedded invariant checks (checks.csv). Throws
/// NumericalError after writing everything if a check fails.
void cmd_evaluate(const std::string& checkpoint, const std::string& data_dir, const std::string& out_dir,
                  const CommandOptions& opt);

}  // namespace lwir
