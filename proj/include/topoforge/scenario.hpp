#pragma once

// Problem instances (supports, loads, volume fraction, complexity) and their
// six/seven-channel condition-tensor encoding.
//
// Angles are degrees counterclockwise from +x in the grid frame of fem.hpp
// (x along increasing column, y along increasing row).

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "topoforge/fem.hpp"

namespace topoforge {

enum class Split { kTrain, kValidation, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct NodeCoord {
  int i = 0;  // row
  int j = 0;  // column

  auto operator<=>(const NodeCoord&) const = default;
};

struct Load {
  NodeCoord node;
  double theta_deg = 0.0;
  double magnitude = 1.0;

  bool operator==(const Load&) const = default;
};

struct Scenario {
  int nx = 0;
  int ny = 0;
  std::vector<NodeCoord> fixed_nodes;
  std::vector<Load> loads;
  double volfrac = 0.3;
  // Optional (ny+1) x (nx+1) spatial target; when present `volfrac` is its mean.
  std::optional<Field> volfrac_field;
  int complexity = 1;
  Split split = Split::kTrain;
  std::uint64_t seed = 0;

  DesignDomain domain() const { return DesignDomain(nx, ny); }

  // Throws ValidationError on out-of-grid coordinates, loads on fixed nodes,
  // empty supports, or a volume fraction outside (0, 1].
  void validate() const;

  bool operator==(const Scenario& other) const;
};

void to_json(nlohmann::json& out, const Scenario& scenario);
void from_json(const nlohmann::json& in, Scenario& scenario);

Scenario load_scenario_file(const std::string& path);
void save_scenario_file(const Scenario& scenario, const std::string& path);

struct SamplerConfig {
  double volfrac_mean = 0.3;
  double volfrac_std = 0.05;
  double volfrac_min = 0.1;
  double volfrac_max = 0.6;
  double load_rate = 2.0;
  double fixed_rate = 50.0;
  int min_fixed = 2;
};

// Deterministic in (seed, split, domain, config).
Scenario sample_scenario(std::uint64_t seed, Split split, const DesignDomain& domain,
                         const SamplerConfig& config = {});

// Channel order used for the condition tensor.
inline constexpr const char* kChannelNames[] = {"DESIGN", "BC_x", "BC_y", "F_x", "F_y", "VF", "CX"};

struct ConditionTensor {
  Field bc_x;
  Field bc_y;
  Field f_x;
  Field f_y;
  Field vf;
  Field cx;
  std::optional<Field> design;

  int rows() const { return static_cast<int>(bc_x.rows()); }
  int cols() const { return static_cast<int>(bc_x.cols()); }
  int channel_count() const { return design ? 7 : 6; }
};

ConditionTensor encode_condition_tensor(const Scenario& scenario, const DesignDomain& domain);

// Seven-channel variant. `design` may be ny x nx (resampled bilinearly) or
// already (ny+1) x (nx+1).
ConditionTensor encode_condition_tensor(const Scenario& scenario, const DesignDomain& domain,
                                        const Field& design);

// Inverse of encode_condition_tensor for scenarios with at most one load per node.
Scenario decode_condition_tensor(const ConditionTensor& tensor, Split split, std::uint64_t seed);

// Align-corners bilinear resampling.
Field resample_bilinear(const Field& source, int rows, int cols);

struct LoadCase {
  std::vector<int> fixed_dofs;
  Eigen::VectorXd load;
};

// Left edge clamped, unit downward load at the middle of the right edge.
Scenario cantilever_scenario(int nx, int ny, double volfrac);

LoadCase scenario_to_system(const Scenario& scenario, const DesignDomain& domain);

}  // namespace topoforge
