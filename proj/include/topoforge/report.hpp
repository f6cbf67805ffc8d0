#pragma once

// Constraint-compliance reports over batches of candidate designs: volume and
// complexity pass-rates at widening margins, compliance error buckets and
// reconstruction MSE.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "topoforge/analysis.hpp"

namespace topoforge {

struct EvaluationSample {
  std::string id;
  Scenario input;
  Field design;
  std::optional<Field> reference;
};

struct SampleEvaluation {
  std::string id;
  int complexity_input = 0;
  int complexity_generated = 0;
  double volume_input = 0.0;
  double volume_generated = 0.0;
  double volume_error_pct = 0.0;  // signed relative error
  double compliance_generated = 0.0;
  std::optional<double> compliance_reference;
  std::optional<double> compliance_error_pct;
  std::optional<double> mse;
};

inline constexpr std::array<double, 4> kVolumeMargins = {0.0, 2.5, 5.0, 10.0};
inline constexpr std::array<int, 3> kComplexityMargins = {0, 1, 2};
inline constexpr std::array<double, 4> kComplianceBuckets = {2.5, 5.0, 7.5, 10.0};

inline constexpr std::array<const char*, 4> kVolumeColumns = {"V_g≤V_i", "≤2.5%", "≤5%", "≤10%"};
inline constexpr std::array<const char*, 3> kComplexityColumns = {"Cx_g≤Cx_i", "≤+1bar", "≤+2bars"};
inline constexpr std::array<const char*, 4> kComplianceColumns = {"≤2.5%", "≤5%", "≤7.5%", "≤10%"};

struct ConstraintReport {
  std::size_t samples = 0;
  std::array<double, 4> volume_pass{};
  std::array<double, 3> complexity_pass{};
  std::array<double, 4> compliance_pass{};
  double compliance_worst = 0.0;  // fraction beyond the widest bucket, incl. unsolvable
  std::size_t compliance_samples = 0;
  std::optional<double> mse;
  std::size_t reference_samples = 0;
  std::vector<SampleEvaluation> per_sample;
  std::vector<std::string> unpaired;

  // Pass-rates never decrease as margins widen.
  bool monotone() const;
};

struct ReportOptions {
  BarGraphOptions bars;
  ComplianceOptions compliance;
  int threads = 1;
};

// Throws ParameterError on an empty batch.
ConstraintReport constraint_report(std::span<const EvaluationSample> samples, const ReportOptions& options = {});

// One row per margin bucket: metric,column,margin,pass_rate,passed,samples
std::string report_csv(const ConstraintReport& report);
nlohmann::json report_json(const ConstraintReport& report);

}  // namespace topoforge
