#include "fedrd/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fedrd/error.hpp"
#include "fedrd/random.hpp"

namespace fedrd {

std::vector<std::size_t> DomainDataset::label_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t y : labels) ++counts.at(y);
  return counts;
}

DomainDataset DomainDataset::subset(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw InvalidArgument("subset: no indices");
  const std::size_t dim = feature_dim();
  DomainDataset out{domain_id, Tensor::matrix(indices.size(), dim), {}, num_classes};
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t src = indices[r];
    if (src >= size()) throw InvalidArgument("subset: index out of range");
    std::copy_n(&features.at(src, 0), dim, &out.features.at(r, 0));
    out.labels.push_back(labels[src]);
  }
  return out;
}

void DomainDataset::validate() const {
  if (labels.empty()) throw InvalidArgument("dataset for domain " + std::to_string(domain_id) + " is empty");
  if (features.rank() != 2 || features.rows() != labels.size()) {
    throw InvalidArgument("dataset for domain " + std::to_string(domain_id) + ": features and labels disagree");
  }
  for (std::size_t y : labels) {
    if (y >= num_classes) {
      throw InvalidArgument("dataset for domain " + std::to_string(domain_id) + ": label " + std::to_string(y) +
                            " out of range [0, " + std::to_string(num_classes) + ")");
    }
  }
}

void SynthConfig::validate() const {
  if (num_domains < 2) throw InvalidArgument("data: num_domains must be at least 2");
  if (num_classes < 2) throw InvalidArgument("data: num_classes must be at least 2");
  if (samples_per_domain < num_classes) throw InvalidArgument("data: samples_per_domain must be >= num_classes");
  if (feature_dim < 2) throw InvalidArgument("data: feature_dim must be at least 2");
  if (domain_rotation_degrees.size() != num_domains) {
    throw InvalidArgument("data: domain_rotation_degrees needs exactly one angle per domain");
  }
  std::set<double> distinct(domain_rotation_degrees.begin(), domain_rotation_degrees.end());
  if (distinct.size() != domain_rotation_degrees.size()) throw InvalidArgument("data: rotation angles must be distinct");
  for (double a : domain_rotation_degrees) {
    if (!std::isfinite(a)) throw InvalidArgument("data: rotation angles must be finite");
  }
  if (!(class_center_radius > 0.0) || !std::isfinite(class_center_radius)) {
    throw InvalidArgument("data: class_center_radius must be positive");
  }
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) throw InvalidArgument("data: noise_sigma must be positive");
  if (!(dirichlet_alpha > 0.0) || !std::isfinite(dirichlet_alpha)) {
    throw InvalidArgument("data: dirichlet_alpha must be positive");
  }
}

DomainDataset base_blobs(const SynthConfig& cfg, std::uint64_t seed, std::size_t domain_index) {
  cfg.validate();
  const std::size_t n = cfg.samples_per_domain;
  const std::size_t dim = cfg.feature_dim;
  DomainDataset out{static_cast<int>(domain_index), Tensor::matrix(n, dim), {}, cfg.num_classes};
  out.labels.reserve(n);
  std::mt19937_64 rng(derive_seed(seed, Stream::kDomainSamples, {domain_index}));
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t label = j % cfg.num_classes;
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(label) / static_cast<double>(cfg.num_classes);
    double* row = &out.features.at(j, 0);
    for (std::size_t k = 0; k < dim; ++k) row[k] = noise(rng);
    row[0] += cfg.class_center_radius * std::cos(theta);
    row[1] += cfg.class_center_radius * std::sin(theta);
    out.labels.push_back(label);
  }
  return out;
}

std::vector<DomainDataset> gen_domains(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<DomainDataset> domains;
  domains.reserve(cfg.num_domains);
  for (std::size_t d = 0; d < cfg.num_domains; ++d) {
    DomainDataset domain = base_blobs(cfg, seed, d);
    const double angle = cfg.domain_rotation_degrees[d] * std::numbers::pi / 180.0;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    if (angle != 0.0) {
      for (std::size_t j = 0; j < domain.size(); ++j) {
        double* row = &domain.features.at(j, 0);
        const double x = row[0];
        const double y = row[1];
        row[0] = c * x - s * y;
        row[1] = s * x + c * y;
      }
    }
    domains.push_back(std::move(domain));
  }
  return domains;
}

std::vector<std::vector<std::size_t>> dirichlet_partition(std::span<const std::size_t> labels, std::size_t n_clients,
                                                          double alpha, std::uint64_t seed) {
  if (n_clients == 0) throw InvalidArgument("dirichlet_partition: n_clients must be positive");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("dirichlet_partition: alpha must be positive");
  if (n_clients > labels.size()) {
    throw InvalidArgument("dirichlet_partition: " + std::to_string(n_clients) + " clients but only " +
                          std::to_string(labels.size()) + " samples");
  }

  std::size_t num_classes = 0;
  for (std::size_t y : labels) num_classes = std::max(num_classes, y + 1);
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (by_class[c].empty()) throw InvalidArgument("dirichlet_partition: class " + std::to_string(c) + " has no samples");
  }

  if (n_clients == 1) {
    std::vector<std::size_t> all(labels.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return {all};
  }

  std::mt19937_64 rng(derive_seed(seed, Stream::kPartition));
  std::gamma_distribution<double> gamma_draw(alpha, 1.0);
  for (int attempt = 0; attempt < kMaxPartitionAttempts; ++attempt) {
    std::vector<std::vector<std::size_t>> parts(n_clients);
    for (const auto& members : by_class) {
      std::vector<double> share(n_clients);
      double total = 0.0;
      for (double& s : share) total += (s = gamma_draw(rng));
      std::vector<std::size_t> order = members;
      std::shuffle(order.begin(), order.end(), rng);
      // Cut the shuffled class at cumulative proportions.
      double cumulative = 0.0;
      std::size_t begin = 0;
      for (std::size_t k = 0; k < n_clients; ++k) {
        cumulative += share[k];
        std::size_t end = k + 1 == n_clients
                              ? order.size()
                              : static_cast<std::size_t>(std::floor(cumulative / total * static_cast<double>(order.size())));
        end = std::clamp(end, begin, order.size());
        parts[k].insert(parts[k].end(), order.begin() + static_cast<std::ptrdiff_t>(begin),
                        order.begin() + static_cast<std::ptrdiff_t>(end));
        begin = end;
      }
    }
    if (std::none_of(parts.begin(), parts.end(), [](const auto& p) { return p.empty(); })) {
      for (auto& p : parts) std::sort(p.begin(), p.end());
      return parts;
    }
  }
  throw InvalidArgument("dirichlet_partition: a client stayed empty after " + std::to_string(kMaxPartitionAttempts) +
                        " attempts");
}

DomainSplit leave_one_out_split(std::span<const DomainDataset> domains, int held_out) {
  DomainSplit split;
  bool found = false;
  for (const DomainDataset& d : domains) {
    if (d.domain_id == held_out && !found) {
      split.test = d;
      found = true;
    } else {
      split.train.push_back(d);
    }
  }
  if (!found) throw InvalidArgument("leave_one_out_split: unknown domain id " + std::to_string(held_out));
  if (split.train.empty()) throw InvalidArgument("leave_one_out_split: no training domains remain");
  return split;
}

std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, result.ptr);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

[[noreturn]] void csv_error(std::size_t line_no, const std::string& message) {
  throw IoError("csv line " + std::to_string(line_no) + ": " + message);
}

template <typename T>
T parse_field(std::string_view field, std::size_t line_no, const char* what) {
  T value{};
  const auto result = std::from_chars(field.data(), field.data() + field.size(), value);
  if (result.ec != std::errc() || result.ptr != field.data() + field.size()) {
    csv_error(line_no, std::string("invalid ") + what + " '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

DomainDataset parse_csv_dataset(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  if (lines.empty() || lines.front().empty()) throw IoError("csv: empty file");

  const auto header = split_fields(lines.front());
  if (header.size() < 3 || header[0] != "domain" || header[1] != "label") {
    csv_error(1, "header must be domain,label,f0,...");
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t k = 0; k < dim; ++k) {
    if (header[k + 2] != "f" + std::to_string(k)) csv_error(1, "expected column f" + std::to_string(k));
  }

  DomainDataset out;
  std::vector<double> values;
  bool have_domain = false;
  std::size_t max_label = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (lines[i].empty()) {
      if (i + 1 == lines.size()) break;
      csv_error(line_no, "blank line");
    }
    const auto fields = split_fields(lines[i]);
    if (fields.size() != header.size()) {
      csv_error(line_no, "expected " + std::to_string(header.size()) + " columns, found " + std::to_string(fields.size()));
    }
    const int domain = parse_field<int>(fields[0], line_no, "domain id");
    if (!have_domain) {
      out.domain_id = domain;
      have_domain = true;
    } else if (domain != out.domain_id) {
      csv_error(line_no, "mixed domain ids " + std::to_string(out.domain_id) + " and " + std::to_string(domain));
    }
    const std::size_t label = parse_field<std::size_t>(fields[1], line_no, "label");
    max_label = std::max(max_label, label);
    out.labels.push_back(label);
    for (std::size_t k = 0; k < dim; ++k) {
      const double v = parse_field<double>(fields[k + 2], line_no, "feature");
      if (!std::isfinite(v)) csv_error(line_no, "non-finite feature");
      values.push_back(v);
    }
  }
  if (out.labels.empty()) throw IoError("csv: no data rows");
  out.features = Tensor({out.labels.size(), dim}, std::move(values));
  out.num_classes = max_label + 1;
  return out;
}

DomainDataset load_csv_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_csv_dataset(buffer.str());
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string to_csv(const DomainDataset& dataset) {
  dataset.validate();
  std::string out = "domain,label";
  for (std::size_t k = 0; k < dataset.feature_dim(); ++k) out += ",f" + std::to_string(k);
  out += '\n';
  const std::string domain = std::to_string(dataset.domain_id);
  for (std::size_t j = 0; j < dataset.size(); ++j) {
    out += domain;
    out += ',';
    out += std::to_string(dataset.labels[j]);
    for (std::size_t k = 0; k < dataset.feature_dim(); ++k) {
      out += ',';
      out += format_double(dataset.features.at(j, k));
    }
    out += '\n';
  }
  return out;
}

}  // namespace fedrd
