#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedrd/data.hpp"
#include "fedrd/federation.hpp"

namespace fedrd {

inline constexpr std::string_view kArtifactVersion = "0.1.0";

// Everything needed to reproduce one run.
struct ExperimentConfig {
  FederationConfig federation;
  SynthConfig data;
  // When non-empty, domains are read from these CSV files instead of generated.
  std::vector<std::filesystem::path> csv_paths;
};

// Parses a JSON document with sections `federation`, `model` and `data`.
// Unknown keys, missing required keys, type errors and constraint violations
// throw ConfigError naming the offending key. Relative csv paths resolve
// against `base_dir`.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});

// Fully resolved config as a JSON document that parse_config accepts.
std::string config_to_json(const ExperimentConfig& cfg);

struct SweepPoint {
  // ("section.key", value as JSON text) for every swept field.
  std::vector<std::pair<std::string, std::string>> assignments;
  ExperimentConfig config;
};

// Expands list-valued scalar fields (and list-of-list values of list fields)
// into the cross product of configs. The last swept key varies fastest.
std::vector<SweepPoint> expand_sweep(std::string_view text, const std::filesystem::path& base_dir = {});

// Generated or CSV-loaded domains for a config.
std::vector<DomainDataset> load_domains(const ExperimentConfig& cfg);

// round,unseen_acc,unseen_loss,mean_participant_acc
std::string metrics_csv(const FederationReport& report);
// round,client_id,d,gap,gamma,beta,weight,lambda_last,local_loss
std::string trace_csv(const FederationReport& report);
std::string summary_json(const FederationReport& report, const ExperimentConfig& cfg);

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitIoError = 2,
  kExitNumericalFailure = 3,
};

struct RunOptions {
  std::filesystem::path config_path;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed_override;
  std::optional<bool> parallel_override;
  bool sweep = false;
};

// Writes manifest.json, metrics.csv, trace.csv and summary.json into out_dir
// (one run_NNN subdirectory per point in sweep mode). Files appear only once
// the run has finished.
int cmd_run(const RunOptions& options, std::ostream& log);

// Writes domain_<id>.csv for every generated domain.
int cmd_gen_data(const std::filesystem::path& config_path, const std::filesystem::path& out_dir, std::ostream& log);

// Stages files in memory and publishes them into a directory with
// write-to-temp-then-rename. On failure nothing from this writer remains.
class AtomicDirectoryWriter {
 public:
  explicit AtomicDirectoryWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void stage(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }
  void commit();

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace fedrd
