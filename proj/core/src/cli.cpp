#include "fedrd/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fedrd/error.hpp"
#include "json.hpp"

namespace fedrd {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Always quoted; embedded quotes doubled.
std::string csv_quote(const std::string& field) {
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

struct RunFiles {
  static constexpr const char* kManifest = "manifest.json";
  static constexpr const char* kMetrics = "metrics.csv";
  static constexpr const char* kTrace = "trace.csv";
  static constexpr const char* kSummary = "summary.json";
};

FederationReport execute(const ExperimentConfig& cfg) {
  const std::vector<DomainDataset> domains = load_domains(cfg);
  return run_federation(cfg.federation, domains, cfg.data.dirichlet_alpha);
}

void run_one(const SweepPoint& point, const fs::path& out_dir, std::ostream& log) {
  const std::string started = utc_timestamp();
  const FederationReport report = execute(point.config);
  const std::string finished = utc_timestamp();

  json manifest;
  manifest["artifact_version"] = std::string(kArtifactVersion);
  manifest["seed"] = point.config.federation.seed;
  manifest["config"] = json::parse(config_to_json(point.config));
  manifest["sweep_point"] = json::object();
  for (const auto& [key, value] : point.assignments) manifest["sweep_point"][key] = json::parse(value);
  manifest["started_at"] = started;
  manifest["finished_at"] = finished;
  manifest["outputs"] = {{"metrics", RunFiles::kMetrics}, {"trace", RunFiles::kTrace}, {"summary", RunFiles::kSummary}};

  AtomicDirectoryWriter writer(out_dir);
  writer.stage(RunFiles::kManifest, manifest.dump(2) + "\n");
  writer.stage(RunFiles::kMetrics, metrics_csv(report));
  writer.stage(RunFiles::kTrace, trace_csv(report));
  writer.stage(RunFiles::kSummary, summary_json(report, point.config));
  writer.commit();

  log << "run " << to_string(point.config.federation.strategy) << " held_out=" << point.config.federation.held_out_domain
      << " final_unseen_acc=" << format_double(report.final_unseen_acc)
      << " best_unseen_acc=" << format_double(report.best_unseen_acc) << " (round " << report.best_round << ") -> "
      << out_dir.string() << "\n";
}

template <typename Body>
int guarded(std::ostream& log, Body&& body) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const InvalidArgument& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const IoError& e) {
    log << "error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const NumericalError& e) {
    log << "error: numerical failure: " << e.what() << "\n";
    return kExitNumericalFailure;
  }
}

}  // namespace

std::vector<DomainDataset> load_domains(const ExperimentConfig& cfg) {
  if (cfg.csv_paths.empty()) return gen_domains(cfg.data, cfg.federation.seed);
  std::vector<DomainDataset> domains;
  for (const fs::path& path : cfg.csv_paths) {
    DomainDataset d = load_csv_dataset(path);
    if (d.num_classes > cfg.data.num_classes) {
      throw InvalidArgument(path.string() + ": labels exceed data.num_classes");
    }
    d.num_classes = cfg.data.num_classes;
    for (const DomainDataset& other : domains) {
      if (other.domain_id == d.domain_id) throw InvalidArgument(path.string() + ": duplicate domain id");
    }
    domains.push_back(std::move(d));
  }
  return domains;
}

std::string metrics_csv(const FederationReport& report) {
  std::string out = "round,unseen_acc,unseen_loss,mean_participant_acc\n";
  for (const RoundMetrics& r : report.rounds) {
    out += std::to_string(r.round) + "," + format_double(r.unseen_acc) + "," + format_double(r.unseen_loss) + "," +
           format_double(r.mean_participant_acc) + "\n";
  }
  return out;
}

std::string trace_csv(const FederationReport& report) {
  std::string out = "round,client_id,d,gap,gamma,beta,weight,lambda_last,local_loss\n";
  for (const RoundMetrics& r : report.rounds) {
    for (const ClientRoundStats& c : r.clients) {
      out += std::to_string(r.round) + "," + std::to_string(c.client_id) + "," + format_double(c.d) + "," +
             format_double(c.gap) + "," + format_double(c.gamma) + "," + format_double(c.beta) + "," +
             format_double(c.weight) + "," + format_double(c.lambda_last) + "," + format_double(c.local_loss) + "\n";
    }
  }
  return out;
}

std::string summary_json(const FederationReport& report, const ExperimentConfig& cfg) {
  // Written by hand so decimals carry 17 significant digits like the CSVs.
  const double last_loss = report.rounds.empty() ? 0.0 : report.rounds.back().unseen_loss;
  const double last_participant = report.rounds.empty() ? 0.0 : report.rounds.back().mean_participant_acc;
  std::ostringstream out;
  out << "{\n"
      << "  \"strategy\": " << json(std::string(to_string(cfg.federation.strategy))).dump() << ",\n"
      << "  \"held_out_domain\": " << cfg.federation.held_out_domain << ",\n"
      << "  \"seed\": " << cfg.federation.seed << ",\n"
      << "  \"rounds\": " << report.rounds.size() << ",\n"
      << "  \"initial_unseen_acc\": " << format_double(report.initial_unseen_acc) << ",\n"
      << "  \"final_unseen_acc\": " << format_double(report.final_unseen_acc) << ",\n"
      << "  \"best_unseen_acc\": " << format_double(report.best_unseen_acc) << ",\n"
      << "  \"best_round\": " << report.best_round << ",\n"
      << "  \"final_unseen_loss\": " << format_double(last_loss) << ",\n"
      << "  \"final_mean_participant_acc\": " << format_double(last_participant) << "\n"
      << "}\n";
  return out.str();
}

void AtomicDirectoryWriter::commit() {
  std::error_code ec;
  const bool existed = fs::exists(dir_, ec);
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) {
    throw IoError("cannot create output directory " + dir_.string() + (ec ? ": " + ec.message() : ""));
  }

  std::vector<fs::path> temps;
  std::vector<fs::path> published;
  try {
    for (const auto& [name, content] : files_) {
      const fs::path tmp = dir_ / ("." + name + ".tmp");
      temps.push_back(tmp);
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << content;
      out.close();
      if (!out) throw IoError("cannot write " + tmp.string());
    }
    for (std::size_t i = 0; i < files_.size(); ++i) {
      const fs::path target = dir_ / files_[i].first;
      fs::rename(temps[i], target);
      published.push_back(target);
    }
  } catch (...) {
    for (const fs::path& p : temps) fs::remove(p, ec);
    for (const fs::path& p : published) fs::remove(p, ec);
    if (!existed) fs::remove(dir_, ec);
    throw;
  }
}

int cmd_run(const RunOptions& options, std::ostream& log) {
  return guarded(log, [&] {
    const std::string text = read_file(options.config_path);
    const fs::path base_dir = options.config_path.parent_path();
    std::vector<SweepPoint> points;
    if (options.sweep) {
      points = expand_sweep(text, base_dir);
    } else {
      points.push_back({{}, parse_config(text, base_dir)});
    }
    for (SweepPoint& p : points) {
      if (options.seed_override) p.config.federation.seed = *options.seed_override;
      if (options.parallel_override) p.config.federation.parallel = *options.parallel_override;
    }

    if (!options.sweep) {
      run_one(points.front(), options.out_dir, log);
      return;
    }

    std::string table = "run,assignments,final_unseen_acc,best_unseen_acc,best_round\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
      std::ostringstream name;
      name << "run_" << std::setw(3) << std::setfill('0') << i;
      const fs::path dir = options.out_dir / name.str();
      run_one(points[i], dir, log);
      const json summary = json::parse(read_file(dir / RunFiles::kSummary));
      std::string assignments;
      for (const auto& [key, value] : points[i].assignments) {
        if (!assignments.empty()) assignments += ";";
        assignments += key + "=" + value;
      }
      table += name.str() + "," + csv_quote(assignments) + "," + format_double(summary["final_unseen_acc"].get<double>()) + "," +
               format_double(summary["best_unseen_acc"].get<double>()) + "," +
               std::to_string(summary["best_round"].get<std::size_t>()) + "\n";
    }
    AtomicDirectoryWriter writer(options.out_dir);
    writer.stage("sweep.csv", table);
    writer.commit();
  });
}

int cmd_gen_data(const fs::path& config_path, const fs::path& out_dir, std::ostream& log) {
  return guarded(log, [&] {
    const ExperimentConfig cfg = parse_config(read_file(config_path), config_path.parent_path());
    if (!cfg.csv_paths.empty()) throw ConfigError("config: gen-data needs generator settings, not data.csv_paths");
    const std::vector<DomainDataset> domains = gen_domains(cfg.data, cfg.federation.seed);
    AtomicDirectoryWriter writer(out_dir);
    for (const DomainDataset& d : domains) writer.stage("domain_" + std::to_string(d.domain_id) + ".csv", to_csv(d));
    writer.commit();
    log << "wrote " << domains.size() << " domain files to " << out_dir.string() << "\n";
  });
}

}  // namespace fedrd
