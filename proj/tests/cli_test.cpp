#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "fedrd/cli.hpp"
#include "fedrd/error.hpp"
#include "json.hpp"

namespace fedrd {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json minimal_config() {
  return json::parse(R"({
    "federation": {"num_clients": 3, "rounds": 2, "local_epochs": 1, "batch_size": 16,
                   "learning_rate": 0.1, "seed": 4, "held_out_domain": 3},
    "model": {"hidden_dims": [6]},
    "data": {"num_domains": 4, "num_classes": 3, "samples_per_domain": 60,
             "domain_rotation_degrees": [0, 30, 60, 90], "class_center_radius": 1.0,
             "noise_sigma": 0.4, "dirichlet_alpha": 0.5}
  })");
}

std::string config_error(const json& j) {
  try {
    parse_config(j.dump());
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("fedrd_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const TempDir& dir, const json& j, const std::string& name = "config.json") {
  const fs::path p = dir.path() / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

TEST(ParseConfigTest, AppliesDefaults) {
  const ExperimentConfig cfg = parse_config(minimal_config().dump());
  EXPECT_EQ(cfg.federation.strategy, Strategy::kFedRD);
  EXPECT_EQ(cfg.federation.tau, 0.5);
  EXPECT_EQ(cfg.federation.mu, 0.01);
  EXPECT_TRUE(cfg.federation.parallel);
  EXPECT_EQ(cfg.federation.model.input_dim, 2u);
  EXPECT_EQ(cfg.federation.model.num_classes, 3u);
  EXPECT_EQ(cfg.federation.model.domain_layer_index, 0u);
  EXPECT_EQ(cfg.data.feature_dim, 2u);
  EXPECT_TRUE(cfg.csv_paths.empty());
}

TEST(ParseConfigTest, RoundTripsThroughJson) {
  json j = minimal_config();
  j["federation"]["strategy"] = "fedprox";
  j["federation"]["mu"] = 0.2;
  const ExperimentConfig cfg = parse_config(j.dump());
  EXPECT_EQ(config_to_json(parse_config(config_to_json(cfg))), config_to_json(cfg));
}

TEST(ParseConfigTest, MissingKeyIsNamed) {
  json j = minimal_config();
  j["federation"].erase("rounds");
  EXPECT_NE(config_error(j).find("federation.rounds"), std::string::npos);
}

TEST(ParseConfigTest, ConstraintViolations) {
  json j = minimal_config();
  j["federation"]["tau"] = 1.5;
  EXPECT_NE(config_error(j).find("federation.tau"), std::string::npos);
  j = minimal_config();
  j["federation"]["learning_rate"] = 0.0;
  EXPECT_NE(config_error(j).find("federation.learning_rate"), std::string::npos);
  j = minimal_config();
  j["federation"]["held_out_domain"] = 4;
  EXPECT_NE(config_error(j).find("federation.held_out_domain"), std::string::npos);
  j = minimal_config();
  j["federation"]["num_clients"] = 4;
  EXPECT_NE(config_error(j).find("federation.num_clients"), std::string::npos);
  j = minimal_config();
  j["federation"]["strategy"] = "fedbogus";
  EXPECT_NE(config_error(j).find("federation.strategy"), std::string::npos);
  j = minimal_config();
  j["data"]["num_domains"] = 0;
  EXPECT_NE(config_error(j).find("data.num_domains"), std::string::npos);
}

TEST(ParseConfigTest, UnknownKeysAndTypes) {
  json j = minimal_config();
  j["federation"]["roundz"] = 3;
  EXPECT_NE(config_error(j).find("federation.roundz"), std::string::npos);
  j = minimal_config();
  j["extra"] = json::object();
  EXPECT_NE(config_error(j).find("extra"), std::string::npos);
  j = minimal_config();
  j["federation"]["rounds"] = "many";
  EXPECT_NE(config_error(j).find("federation.rounds"), std::string::npos);
  j = minimal_config();
  j["federation"]["local_epochs"] = json::array({1, 5});
  EXPECT_NE(config_error(j).find("--sweep"), std::string::npos);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
}

TEST(ExpandSweepTest, CrossProductOrder) {
  json j = minimal_config();
  j["federation"]["local_epochs"] = json::array({1, 5});
  j["federation"]["learning_rate"] = json::array({0.1, 0.2, 0.3});
  j["model"]["hidden_dims"] = json::array({json::array({4}), json::array({4, 4})});
  const auto points = expand_sweep(j.dump());
  ASSERT_EQ(points.size(), 12u);
  EXPECT_EQ(points[0].assignments[0].first, "federation.learning_rate");
  EXPECT_EQ(points[0].assignments[1].first, "federation.local_epochs");
  EXPECT_EQ(points[0].assignments[2].first, "model.hidden_dims");
  EXPECT_EQ(points[1].config.federation.model.hidden_dims, (std::vector<std::size_t>{4, 4}));
  EXPECT_EQ(points[2].config.federation.local_epochs, 5u);
  EXPECT_EQ(points[4].config.federation.learning_rate, 0.2);
  EXPECT_EQ(expand_sweep(minimal_config().dump()).size(), 1u);
}

TEST(CmdRunTest, ProducesArtifactsDeterministically) {
  TempDir dir;
  const fs::path cfg = write_config(dir, minimal_config());
  std::ostringstream log;
  RunOptions a{cfg, dir.path() / "a", std::nullopt, std::nullopt, false};
  RunOptions b{cfg, dir.path() / "b", std::nullopt, false, false};
  ASSERT_EQ(cmd_run(a, log), kExitOk) << log.str();
  ASSERT_EQ(cmd_run(b, log), kExitOk) << log.str();
  for (const char* name : {"metrics.csv", "trace.csv", "summary.json"}) {
    EXPECT_EQ(slurp(dir.path() / "a" / name), slurp(dir.path() / "b" / name)) << name;
  }
  const json manifest = json::parse(slurp(dir.path() / "a" / "manifest.json"));
  EXPECT_EQ(manifest["artifact_version"], "0.1.0");
  EXPECT_EQ(manifest["seed"], 4);
  EXPECT_EQ(parse_config(manifest["config"].dump()).federation.rounds, 2u);

  const std::string metrics = slurp(dir.path() / "a" / "metrics.csv");
  EXPECT_EQ(metrics.rfind("round,unseen_acc,unseen_loss,mean_participant_acc\n", 0), 0u);
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 3);
  const std::string trace = slurp(dir.path() / "a" / "trace.csv");
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 1 + 2 * 3);
}

TEST(CmdRunTest, SeedOverrideChangesResults) {
  TempDir dir;
  const fs::path cfg = write_config(dir, minimal_config());
  std::ostringstream log;
  ASSERT_EQ(cmd_run({cfg, dir.path() / "a", std::nullopt, std::nullopt, false}, log), kExitOk);
  ASSERT_EQ(cmd_run({cfg, dir.path() / "b", 99, std::nullopt, false}, log), kExitOk);
  EXPECT_NE(slurp(dir.path() / "a" / "trace.csv"), slurp(dir.path() / "b" / "trace.csv"));
  EXPECT_EQ(json::parse(slurp(dir.path() / "b" / "manifest.json"))["seed"], 99);
}

TEST(CmdRunTest, SweepWritesOneDirectoryPerPoint) {
  TempDir dir;
  json j = minimal_config();
  j["federation"]["local_epochs"] = json::array({1, 5, 10});
  const fs::path cfg = write_config(dir, j);
  std::ostringstream log;
  const fs::path out = dir.path() / "sweep";
  EXPECT_EQ(cmd_run({cfg, out, std::nullopt, std::nullopt, false}, log), kExitConfigError);
  EXPECT_FALSE(fs::exists(out));
  ASSERT_EQ(cmd_run({cfg, out, std::nullopt, std::nullopt, true}, log), kExitOk) << log.str();
  std::vector<json> configs;
  for (const char* run : {"run_000", "run_001", "run_002"}) {
    ASSERT_TRUE(fs::exists(out / run / "metrics.csv")) << run;
    configs.push_back(json::parse(slurp(out / run / "manifest.json"))["config"]);
  }
  EXPECT_EQ(configs[0]["federation"]["local_epochs"], 1);
  EXPECT_EQ(configs[1]["federation"]["local_epochs"], 5);
  EXPECT_EQ(configs[2]["federation"]["local_epochs"], 10);
  for (json& c : configs) c["federation"].erase("local_epochs");
  EXPECT_EQ(configs[0], configs[1]);
  EXPECT_EQ(configs[0], configs[2]);
  const std::string sweep = slurp(out / "sweep.csv");
  EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 4);
  EXPECT_NE(sweep.find("\nrun_001,\"federation.local_epochs=5\","), std::string::npos) << sweep;
}

TEST(CmdRunTest, UnwritableOutputLeavesNothing) {
  TempDir dir;
  const fs::path cfg = write_config(dir, minimal_config());
  const fs::path blocker = dir.path() / "blocker";
  std::ofstream(blocker) << "x";
  std::ostringstream log;
  EXPECT_EQ(cmd_run({cfg, blocker / "out", std::nullopt, std::nullopt, false}, log), kExitIoError);
  EXPECT_TRUE(fs::is_regular_file(blocker));
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path())) ++entries;
  EXPECT_EQ(entries, 2u);  // config.json and blocker
}

TEST(CmdRunTest, ErrorExitCodes) {
  TempDir dir;
  std::ostringstream log;
  EXPECT_EQ(cmd_run({dir.path() / "missing.json", dir.path() / "o", std::nullopt, std::nullopt, false}, log),
            kExitIoError);
  json j = minimal_config();
  j["federation"]["tau"] = 0.0;
  EXPECT_EQ(cmd_run({write_config(dir, j), dir.path() / "o", std::nullopt, std::nullopt, false}, log),
            kExitConfigError);
  j = minimal_config();
  j["federation"]["learning_rate"] = 1e200;
  EXPECT_EQ(cmd_run({write_config(dir, j), dir.path() / "o", std::nullopt, std::nullopt, false}, log),
            kExitNumericalFailure);
  EXPECT_FALSE(fs::exists(dir.path() / "o"));
}

TEST(AtomicDirectoryWriterTest, PublishesAllFiles) {
  TempDir dir;
  AtomicDirectoryWriter w(dir.path() / "x" / "y");
  w.stage("a.txt", "alpha");
  w.stage("b.txt", "beta");
  w.commit();
  EXPECT_EQ(slurp(dir.path() / "x" / "y" / "a.txt"), "alpha");
  EXPECT_EQ(slurp(dir.path() / "x" / "y" / "b.txt"), "beta");
  EXPECT_FALSE(fs::exists(dir.path() / "x" / "y" / ".a.txt.tmp"));
}

TEST(GenDataTest, WritesLoadableDomains) {
  TempDir dir;
  const fs::path cfg = write_config(dir, minimal_config());
  std::ostringstream log;
  ASSERT_EQ(cmd_gen_data(cfg, dir.path() / "data", log), kExitOk) << log.str();
  const ExperimentConfig parsed = parse_config(minimal_config().dump());
  const auto generated = load_domains(parsed);
  for (int d = 0; d < 4; ++d) {
    const fs::path file = dir.path() / "data" / ("domain_" + std::to_string(d) + ".csv");
    ASSERT_TRUE(fs::exists(file));
    DomainDataset back = load_csv_dataset(file);
    back.num_classes = generated[d].num_classes;
    EXPECT_EQ(back, generated[d]);
  }
}

TEST(GenDataTest, CsvModeRunMatchesGeneratedRun) {
  TempDir dir;
  const fs::path cfg = write_config(dir, minimal_config());
  std::ostringstream log;
  ASSERT_EQ(cmd_gen_data(cfg, dir.path() / "data", log), kExitOk);

  json csv = minimal_config();
  csv["data"] = {{"num_classes", 3},
                 {"dirichlet_alpha", 0.5},
                 {"csv_paths", {"data/domain_0.csv", "data/domain_1.csv", "data/domain_2.csv", "data/domain_3.csv"}}};
  csv["model"]["input_dim"] = 2;
  const fs::path csv_cfg = write_config(dir, csv, "csv.json");
  ASSERT_EQ(cmd_run({cfg, dir.path() / "gen", std::nullopt, std::nullopt, false}, log), kExitOk) << log.str();
  ASSERT_EQ(cmd_run({csv_cfg, dir.path() / "csv", std::nullopt, std::nullopt, false}, log), kExitOk) << log.str();
  EXPECT_EQ(slurp(dir.path() / "gen" / "trace.csv"), slurp(dir.path() / "csv" / "trace.csv"));
}

TEST(GenDataTest, InvalidConfigWritesNothing) {
  TempDir dir;
  json j = minimal_config();
  j["data"]["num_domains"] = 0;
  std::ostringstream log;
  EXPECT_EQ(cmd_gen_data(write_config(dir, j), dir.path() / "data", log), kExitConfigError);
  EXPECT_FALSE(fs::exists(dir.path() / "data"));
}

}  // namespace
}  // namespace fedrd
