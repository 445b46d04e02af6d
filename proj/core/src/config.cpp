// JSON experiment configs: parsing, validation, echo and sweep expansion.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "fedrd/cli.hpp"
#include "fedrd/error.hpp"
#include "json.hpp"

namespace fedrd {

namespace {

using json = nlohmann::json;

enum class Kind { kUInt, kInt, kDouble, kBool, kString, kUIntList, kDoubleList, kStringList };

struct FieldSpec {
  std::string_view section;
  std::string_view key;
  Kind kind;
};

constexpr std::array<FieldSpec, 24> kSchema = {{
    {"federation", "num_clients", Kind::kUInt},
    {"federation", "rounds", Kind::kUInt},
    {"federation", "local_epochs", Kind::kUInt},
    {"federation", "batch_size", Kind::kUInt},
    {"federation", "learning_rate", Kind::kDouble},
    {"federation", "strategy", Kind::kString},
    {"federation", "tau", Kind::kDouble},
    {"federation", "mu", Kind::kDouble},
    {"federation", "seed", Kind::kUInt},
    {"federation", "held_out_domain", Kind::kInt},
    {"federation", "parallel", Kind::kBool},
    {"model", "input_dim", Kind::kUInt},
    {"model", "hidden_dims", Kind::kUIntList},
    {"model", "num_classes", Kind::kUInt},
    {"model", "domain_layer_index", Kind::kUInt},
    {"data", "num_domains", Kind::kUInt},
    {"data", "num_classes", Kind::kUInt},
    {"data", "samples_per_domain", Kind::kUInt},
    {"data", "feature_dim", Kind::kUInt},
    {"data", "domain_rotation_degrees", Kind::kDoubleList},
    {"data", "class_center_radius", Kind::kDouble},
    {"data", "noise_sigma", Kind::kDouble},
    {"data", "dirichlet_alpha", Kind::kDouble},
    {"data", "csv_paths", Kind::kStringList},
}};

constexpr std::array<std::string_view, 3> kSections = {"federation", "model", "data"};
constexpr std::array<std::string_view, 6> kGeneratorKeys = {
    "num_domains", "samples_per_domain", "feature_dim", "domain_rotation_degrees", "class_center_radius", "noise_sigma"};

const FieldSpec* find_field(std::string_view section, std::string_view key) {
  for (const FieldSpec& f : kSchema) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

bool is_list_kind(Kind k) { return k == Kind::kUIntList || k == Kind::kDoubleList || k == Kind::kStringList; }

[[noreturn]] void fail(const std::string& message) { throw ConfigError("config: " + message); }

// Typed access to one config section; errors name the offending key.
class Section {
 public:
  Section(const json& obj, std::string name) : obj_(obj), name_(std::move(name)) {}

  bool has(std::string_view key) const { return obj_.contains(std::string(key)); }

  std::uint64_t uint_value(std::string_view key) { return as_uint(require(key), key); }
  std::optional<std::uint64_t> uint_opt(std::string_view key) {
    const json* v = find(key);
    return v ? std::optional(as_uint(*v, key)) : std::nullopt;
  }
  int int_value(std::string_view key) {
    const json& v = require(key);
    if (!v.is_number_integer()) type_error(key, "an integer", v);
    const auto value = v.get<std::int64_t>();
    if (value < INT32_MIN || value > INT32_MAX) fail(path(key) + " is out of range");
    return static_cast<int>(value);
  }
  double double_value(std::string_view key) { return as_double(require(key), key); }
  std::optional<double> double_opt(std::string_view key) {
    const json* v = find(key);
    return v ? std::optional(as_double(*v, key)) : std::nullopt;
  }
  std::optional<bool> bool_opt(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) type_error(key, "a boolean", *v);
    return v->get<bool>();
  }
  std::optional<std::string> string_opt(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) type_error(key, "a string", *v);
    return v->get<std::string>();
  }
  std::vector<std::size_t> uint_list(std::string_view key) {
    std::vector<std::size_t> out;
    for (const json& e : list(require(key), key)) out.push_back(as_uint(e, key));
    return out;
  }
  std::vector<double> double_list(std::string_view key) {
    std::vector<double> out;
    for (const json& e : list(require(key), key)) out.push_back(as_double(e, key));
    return out;
  }
  std::vector<std::string> string_list(std::string_view key) {
    std::vector<std::string> out;
    for (const json& e : list(require(key), key)) {
      if (!e.is_string()) type_error(key, "a list of strings", e);
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!find_field(name_, key)) fail("unknown key " + name_ + "." + key);
    }
  }

  std::string path(std::string_view key) const { return name_ + "." + std::string(key); }

 private:
  const json* find(std::string_view key) const {
    const auto it = obj_.find(std::string(key));
    return it == obj_.end() ? nullptr : &*it;
  }
  const json& require(std::string_view key) const {
    const json* v = find(key);
    if (!v) fail("missing required key " + path(key));
    return *v;
  }
  [[noreturn]] void type_error(std::string_view key, const char* expected, const json& got) const {
    std::string message = path(key) + " must be " + expected + ", got " + got.dump();
    if (got.is_array() && !is_list_kind(find_field(name_, key)->kind)) {
      message += " (list values are only accepted with --sweep)";
    }
    fail(message);
  }
  std::uint64_t as_uint(const json& v, std::string_view key) const {
    if (!v.is_number_unsigned()) type_error(key, "a non-negative integer", v);
    return v.get<std::uint64_t>();
  }
  double as_double(const json& v, std::string_view key) const {
    if (!v.is_number()) type_error(key, "a number", v);
    const double value = v.get<double>();
    if (!std::isfinite(value)) fail(path(key) + " must be finite");
    return value;
  }
  const json& list(const json& v, std::string_view key) const {
    if (!v.is_array()) type_error(key, "a list", v);
    return v;
  }

  const json& obj_;
  std::string name_;
};

const json& section_object(const json& doc, std::string_view name) {
  const auto it = doc.find(std::string(name));
  if (it == doc.end()) fail("missing required section " + std::string(name));
  if (!it->is_object()) fail("section " + std::string(name) + " must be an object");
  return *it;
}

ExperimentConfig parse_document(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) fail("top level must be an object with sections federation, model, data");
  for (const auto& [key, value] : doc.items()) {
    if (std::find(kSections.begin(), kSections.end(), key) == kSections.end()) fail("unknown section " + key);
  }
  Section fed(section_object(doc, "federation"), "federation");
  Section model(section_object(doc, "model"), "model");
  Section data(section_object(doc, "data"), "data");
  fed.reject_unknown();
  model.reject_unknown();
  data.reject_unknown();

  ExperimentConfig cfg;

  // data
  SynthConfig& synth = cfg.data;
  synth.num_classes = data.uint_value("num_classes");
  synth.dirichlet_alpha = data.double_value("dirichlet_alpha");
  if (data.has("csv_paths")) {
    for (std::string_view key : kGeneratorKeys) {
      if (data.has(key)) fail("data.csv_paths cannot be combined with generator key " + data.path(key));
    }
    for (const std::string& p : data.string_list("csv_paths")) {
      std::filesystem::path path(p);
      cfg.csv_paths.push_back(path.is_relative() && !base_dir.empty() ? base_dir / path : path);
    }
    if (cfg.csv_paths.size() < 2) fail("data.csv_paths must list at least two domain files");
    if (!model.has("input_dim")) fail("missing required key model.input_dim (needed with data.csv_paths)");
    synth.num_domains = cfg.csv_paths.size();
  } else {
    synth.num_domains = data.uint_value("num_domains");
    synth.samples_per_domain = data.uint_value("samples_per_domain");
    synth.feature_dim = data.uint_opt("feature_dim").value_or(2);
    synth.domain_rotation_degrees = data.double_list("domain_rotation_degrees");
    synth.class_center_radius = data.double_value("class_center_radius");
    synth.noise_sigma = data.double_value("noise_sigma");
    if (synth.num_domains < 2) fail("data.num_domains must be at least 2");
    try {
      synth.validate();
    } catch (const InvalidArgument& e) {
      fail(e.what());
    }
  }
  if (synth.num_classes < 2) fail("data.num_classes must be at least 2");
  if (!(synth.dirichlet_alpha > 0.0)) fail("data.dirichlet_alpha must be > 0");

  // model
  ModelSpec& spec = cfg.federation.model;
  spec.hidden_dims = model.uint_list("hidden_dims");
  if (spec.hidden_dims.empty()) fail("model.hidden_dims must list at least one hidden layer");
  for (std::size_t w : spec.hidden_dims) {
    if (w == 0) fail("model.hidden_dims entries must be positive");
  }
  spec.domain_layer_index = model.uint_opt("domain_layer_index").value_or(0);
  if (spec.domain_layer_index >= spec.hidden_dims.size()) {
    fail("model.domain_layer_index must be < " + std::to_string(spec.hidden_dims.size()));
  }
  spec.num_classes = model.uint_opt("num_classes").value_or(synth.num_classes);
  if (spec.num_classes != synth.num_classes) fail("model.num_classes must equal data.num_classes");
  if (cfg.csv_paths.empty()) {
    spec.input_dim = model.uint_opt("input_dim").value_or(synth.feature_dim);
    if (spec.input_dim != synth.feature_dim) fail("model.input_dim must equal data.feature_dim");
  } else {
    spec.input_dim = *model.uint_opt("input_dim");
    if (spec.input_dim == 0) fail("model.input_dim must be positive");
  }

  // federation
  FederationConfig& f = cfg.federation;
  f.num_clients = fed.uint_value("num_clients");
  f.rounds = fed.uint_value("rounds");
  f.local_epochs = fed.uint_value("local_epochs");
  f.batch_size = fed.uint_value("batch_size");
  f.learning_rate = fed.double_value("learning_rate");
  f.seed = fed.uint_value("seed");
  f.held_out_domain = fed.int_value("held_out_domain");
  f.tau = fed.double_opt("tau").value_or(kDefaultFewShotTau);
  f.mu = fed.double_opt("mu").value_or(kDefaultProxMu);
  f.parallel = fed.bool_opt("parallel").value_or(true);
  const std::string strategy = fed.string_opt("strategy").value_or("fedrd");
  if (auto s = parse_strategy(strategy)) {
    f.strategy = *s;
  } else {
    fail("federation.strategy must be one of fedavg, fedprox, fedrd, fedrd_no_dc, fedrd_no_gga; got " + strategy);
  }
  if (f.num_clients < 1) fail("federation.num_clients must be at least 1");
  if (f.rounds < 1) fail("federation.rounds must be at least 1");
  if (f.local_epochs < 1) fail("federation.local_epochs must be at least 1");
  if (f.batch_size < 1) fail("federation.batch_size must be at least 1");
  if (!(f.learning_rate > 0.0)) fail("federation.learning_rate must be > 0");
  if (!(f.tau > 0.0 && f.tau <= 1.0)) fail("federation.tau must lie in the range (0, 1]");
  if (!(f.mu >= 0.0)) fail("federation.mu must be >= 0");
  if (cfg.csv_paths.empty() &&
      (f.held_out_domain < 0 || static_cast<std::size_t>(f.held_out_domain) >= synth.num_domains)) {
    fail("federation.held_out_domain must name one of the " + std::to_string(synth.num_domains) + " domains");
  }
  const std::size_t train_domains = synth.num_domains - 1;
  if (f.num_clients % train_domains != 0) {
    fail("federation.num_clients must be a multiple of the " + std::to_string(train_domains) + " training domains");
  }
  return cfg;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  return parse_document(parse_json(text), base_dir);
}

std::string config_to_json(const ExperimentConfig& cfg) {
  const FederationConfig& f = cfg.federation;
  json doc;
  doc["federation"] = {
      {"num_clients", f.num_clients},   {"rounds", f.rounds},
      {"local_epochs", f.local_epochs}, {"batch_size", f.batch_size},
      {"learning_rate", f.learning_rate}, {"strategy", std::string(to_string(f.strategy))},
      {"tau", f.tau},                   {"mu", f.mu},
      {"seed", f.seed},                 {"held_out_domain", f.held_out_domain},
      {"parallel", f.parallel},
  };
  doc["model"] = {
      {"input_dim", f.model.input_dim},
      {"hidden_dims", f.model.hidden_dims},
      {"num_classes", f.model.num_classes},
      {"domain_layer_index", f.model.domain_layer_index},
  };
  const SynthConfig& d = cfg.data;
  doc["data"] = {{"num_classes", d.num_classes}, {"dirichlet_alpha", d.dirichlet_alpha}};
  if (cfg.csv_paths.empty()) {
    doc["data"]["num_domains"] = d.num_domains;
    doc["data"]["samples_per_domain"] = d.samples_per_domain;
    doc["data"]["feature_dim"] = d.feature_dim;
    doc["data"]["domain_rotation_degrees"] = d.domain_rotation_degrees;
    doc["data"]["class_center_radius"] = d.class_center_radius;
    doc["data"]["noise_sigma"] = d.noise_sigma;
  } else {
    std::vector<std::string> paths;
    for (const auto& p : cfg.csv_paths) paths.push_back(p.string());
    doc["data"]["csv_paths"] = paths;
  }
  return doc.dump(2);
}

std::vector<SweepPoint> expand_sweep(std::string_view text, const std::filesystem::path& base_dir) {
  const json doc = parse_json(text);
  if (!doc.is_object()) fail("top level must be an object with sections federation, model, data");

  struct Axis {
    std::string section;
    std::string key;
    std::vector<json> values;
  };
  std::vector<Axis> axes;
  for (std::string_view section : kSections) {
    const auto sec = doc.find(std::string(section));
    if (sec == doc.end() || !sec->is_object()) continue;
    for (const auto& [key, value] : sec->items()) {
      const FieldSpec* field = find_field(section, key);
      if (!field || !value.is_array() || value.empty()) continue;
      const bool sweeps = is_list_kind(field->kind)
                              ? std::all_of(value.begin(), value.end(), [](const json& e) { return e.is_array(); })
                              : true;
      if (sweeps) axes.push_back({std::string(section), key, std::vector<json>(value.begin(), value.end())});
    }
  }

  std::vector<SweepPoint> points;
  std::vector<std::size_t> cursor(axes.size(), 0);
  while (true) {
    json instance = doc;
    SweepPoint point;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const json& value = axes[a].values[cursor[a]];
      instance[axes[a].section][axes[a].key] = value;
      point.assignments.emplace_back(axes[a].section + "." + axes[a].key, value.dump());
    }
    point.config = parse_document(instance, base_dir);
    points.push_back(std::move(point));

    // Odometer increment, last axis fastest.
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++cursor[a] < axes[a].values.size()) break;
      cursor[a] = 0;
      if (a == 0) return points;
    }
    if (axes.empty()) return points;
  }
}

}  // namespace fedrd
