#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedrd/tensor.hpp"

namespace fedrd {

// Labeled samples from a single domain. Features are stored row-wise.
struct DomainDataset {
  int domain_id = 0;
  Tensor features;  // [n, feature_dim]
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t feature_dim() const { return features.cols(); }
  std::vector<std::size_t> label_counts() const;

  // Rows at `indices`, in that order, keeping the domain id.
  DomainDataset subset(std::span<const std::size_t> indices) const;

  // Throws InvalidArgument when empty, ragged, or a label is out of range.
  void validate() const;

  friend bool operator==(const DomainDataset&, const DomainDataset&) = default;
};

// One client's local training slice.
struct ClientShard {
  std::size_t client_id = 0;
  DomainDataset data;
};

// Rotated Gaussian blobs: C classes on a circle, one rotation per domain.
struct SynthConfig {
  std::size_t num_domains = 4;
  std::size_t num_classes = 5;
  std::size_t samples_per_domain = 1500;
  std::size_t feature_dim = 2;
  std::vector<double> domain_rotation_degrees = {0.0, 30.0, 60.0, 90.0};
  double class_center_radius = 1.0;
  double noise_sigma = 0.4;
  // Label skew across the clients that share a domain.
  double dirichlet_alpha = 0.5;

  void validate() const;
};

// Unrotated samples for domain `domain_index`. Labels cycle 0..C-1, so each
// class count is within one of samples_per_domain / C.
DomainDataset base_blobs(const SynthConfig& cfg, std::uint64_t seed, std::size_t domain_index);

// One dataset per domain, ids 0..D-1; domain d is base_blobs(d) rotated in the
// (f0, f1) plane by its configured angle.
std::vector<DomainDataset> gen_domains(const SynthConfig& cfg, std::uint64_t seed);

// Splits sample indices among clients with per-class proportions drawn from a
// symmetric Dirichlet(alpha). Every client receives at least one sample; the
// whole allocation is redrawn up to kMaxPartitionAttempts times otherwise.
std::vector<std::vector<std::size_t>> dirichlet_partition(std::span<const std::size_t> labels, std::size_t n_clients,
                                                          double alpha, std::uint64_t seed);

inline constexpr int kMaxPartitionAttempts = 100;

struct DomainSplit {
  std::vector<DomainDataset> train;
  DomainDataset test;
};

DomainSplit leave_one_out_split(std::span<const DomainDataset> domains, int held_out);

// Decimal with 17 significant digits; round-trips every double.
std::string format_double(double value);

// CSV with header `domain,label,f0,...,f{k-1}`. All rows must share one
// domain id. num_classes is set to max(label) + 1.
DomainDataset parse_csv_dataset(std::string_view text);
DomainDataset load_csv_dataset(const std::filesystem::path& path);
std::string to_csv(const DomainDataset& dataset);

}  // namespace fedrd
