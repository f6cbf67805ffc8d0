#pragma once

// Dataset generation: sample -> optimize -> screen -> label -> encode -> shard.
//
// A split directory holds, per shard k:
//   <split>-<k>.tpfg         7-channel condition tensors (DESIGN, BC_x, BC_y,
//                            F_x, F_y, VF, CX) on the node grid
//   <split>-<k>.design.tpfg  the optimized design on the element grid
//   <split>-<k>.jsonl        one line per record: index, scenario, labels, checksum
// and a manifest.json committed (atomically) after every finished shard.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "topoforge/analysis.hpp"
#include "topoforge/scenario.hpp"
#include "topoforge/simp.hpp"

namespace topoforge {

inline constexpr int kManifestVersion = 1;

struct DatasetConfig {
  DesignDomain domain{100, 100};
  SimpConfig simp;
  SamplerConfig sampler;
  TrussOptions truss;
  int shard_size = 256;
  bool require_converged = true;
  bool require_truss_like = true;
  // Give up after n * max_attempts_factor sampled scenarios.
  int max_attempts_factor = 50;

  nlohmann::json to_json() const;
};

struct SampleLabels {
  double compliance = 0.0;
  double volume_fraction = 0.0;
  int clamped = 0;
  int loaded = 0;
  int internal = 0;
  int total_bars = 0;
  int simp_iterations = 0;
  bool converged = false;
  bool truss_like = false;

  bool operator==(const SampleLabels&) const = default;
};

struct SampleRecord {
  std::size_t index = 0;
  Scenario scenario;
  ConditionTensor tensor;  // seven-channel, float32-rounded
  Field design;            // element grid, float32-rounded
  SampleLabels labels;
  std::uint32_t checksum = 0;
};

struct ShardInfo {
  int index = 0;
  std::string tensor_file;
  std::string design_file;
  std::string meta_file;
  std::size_t records = 0;
  std::size_t first_record = 0;
  std::uint64_t first_seed = 0;
  std::uint64_t last_seed = 0;
  std::size_t rejected = 0;
};

struct ShardManifest {
  int format_version = kManifestVersion;
  Split split = Split::kTrain;
  std::size_t target_count = 0;
  std::size_t record_count = 0;
  std::uint64_t base_seed = 0;
  std::uint64_t next_seed = 0;
  int rows = 0;  // tensor planes
  int cols = 0;
  int design_rows = 0;
  int design_cols = 0;
  int shard_size = 0;
  std::vector<ShardInfo> shards;
  std::size_t rejected = 0;
  std::map<std::string, std::size_t> rejection_reasons;
  bool complete = false;
  nlohmann::json config;
  std::filesystem::path directory;

  double acceptance_rate() const;
  nlohmann::json to_json() const;
  static ShardManifest from_json(const nlohmann::json& j, const std::filesystem::path& directory);
};

struct GenerateOptions {
  int workers = 1;
  // Called after each shard and its manifest update are on disk.
  std::function<void(const ShardManifest&)> on_shard_committed;
  std::function<void(const std::string&)> log;
};

// Outcome of a single seed, before sharding.
struct SeedOutcome {
  std::optional<SampleRecord> record;
  std::string rejection;
};

SeedOutcome process_seed(std::uint64_t seed, Split split, const DatasetConfig& config);

// Generates (or resumes) `n` accepted records for seeds base_seed, base_seed+1, ...
// Output bytes depend only on (split, n, base_seed, config).
ShardManifest generate_split(const std::filesystem::path& directory, Split split, std::size_t n,
                             std::uint64_t base_seed, const DatasetConfig& config,
                             const GenerateOptions& options = {});

ShardManifest load_manifest(const std::filesystem::path& directory);

// Checksum-verified read. Throws std::out_of_range past the end and
// CorruptionError (naming the shard) on a checksum mismatch.
SampleRecord read_record(const ShardManifest& manifest, std::size_t index);

std::uint32_t record_checksum(const SampleRecord& record);

// Throws ValidationError if two manifests share a scenario seed.
void check_disjoint_seeds(std::span<const ShardManifest> manifests);

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);

nlohmann::json labels_to_json(const SampleLabels& labels);
SampleLabels labels_from_json(const nlohmann::json& j);

}  // namespace topoforge
