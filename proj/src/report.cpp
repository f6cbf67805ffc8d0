#include "topoforge/report.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "topoforge/errors.hpp"
#include "topoforge/parallel.hpp"

namespace topoforge {

namespace {

// Margins compare in percent; absorbs representation error such as
// 0.275 / 0.25 - 1 = 0.10000000000000009.
constexpr double kMarginSlack = 1e-6;

double mse_between(const Field& design, const Field& reference) {
  Field ref = reference;
  if (ref.rows() != design.rows() || ref.cols() != design.cols()) {
    ref = resample_bilinear(reference, static_cast<int>(design.rows()), static_cast<int>(design.cols()));
  }
  return (design - ref).array().square().mean();
}

SampleEvaluation evaluate(const EvaluationSample& s, const ReportOptions& options) {
  SampleEvaluation e;
  e.id = s.id;
  e.complexity_input = s.input.complexity;
  e.complexity_generated = extract_bar_graph(s.design, s.input, options.bars).total();
  e.volume_input = s.input.volfrac;
  e.volume_generated = volume_fraction(s.design);
  e.volume_error_pct = (e.volume_generated - e.volume_input) / e.volume_input * 100.0;
  e.compliance_generated = design_compliance(s.design, s.input, options.compliance);
  if (s.reference) {
    e.compliance_reference = design_compliance(*s.reference, s.input, options.compliance);
    if (std::isfinite(*e.compliance_reference) && *e.compliance_reference > 0.0) {
      e.compliance_error_pct = compliance_error(*e.compliance_reference, e.compliance_generated);
    } else {
      e.compliance_error_pct = std::numeric_limits<double>::infinity();
    }
    e.mse = mse_between(s.design, *s.reference);
  }
  return e;
}

}  // namespace

bool ConstraintReport::monotone() const {
  for (std::size_t k = 1; k < volume_pass.size(); ++k) {
    if (volume_pass[k] < volume_pass[k - 1]) return false;
  }
  for (std::size_t k = 1; k < complexity_pass.size(); ++k) {
    if (complexity_pass[k] < complexity_pass[k - 1]) return false;
  }
  for (std::size_t k = 1; k < compliance_pass.size(); ++k) {
    if (compliance_pass[k] < compliance_pass[k - 1]) return false;
  }
  return true;
}

ConstraintReport constraint_report(std::span<const EvaluationSample> samples, const ReportOptions& options) {
  if (samples.empty()) throw ParameterError("constraint report needs at least one sample");
  ConstraintReport report;
  report.samples = samples.size();
  report.per_sample.resize(samples.size());
  parallel_for(samples.size(), effective_threads(options.threads),
               [&](std::size_t i) { report.per_sample[i] = evaluate(samples[i], options); });

  const auto n = static_cast<double>(samples.size());
  double mse_sum = 0.0;
  std::array<int, 4> compliance_hits{};
  for (const auto& e : report.per_sample) {
    for (std::size_t k = 0; k < kVolumeMargins.size(); ++k) {
      if (e.volume_error_pct <= kVolumeMargins[k] + kMarginSlack) report.volume_pass[k] += 1.0;
    }
    for (std::size_t k = 0; k < kComplexityMargins.size(); ++k) {
      if (e.complexity_generated <= e.complexity_input + kComplexityMargins[k]) report.complexity_pass[k] += 1.0;
    }
    if (e.compliance_error_pct) {
      ++report.compliance_samples;
      for (std::size_t k = 0; k < kComplianceBuckets.size(); ++k) {
        if (*e.compliance_error_pct <= kComplianceBuckets[k] + kMarginSlack) ++compliance_hits[k];
      }
    }
    if (e.mse) {
      ++report.reference_samples;
      mse_sum += *e.mse;
    }
  }
  for (auto& v : report.volume_pass) v /= n;
  for (auto& v : report.complexity_pass) v /= n;
  if (report.compliance_samples > 0) {
    const auto m = static_cast<double>(report.compliance_samples);
    for (std::size_t k = 0; k < kComplianceBuckets.size(); ++k) report.compliance_pass[k] = compliance_hits[k] / m;
    report.compliance_worst = 1.0 - report.compliance_pass.back();
  }
  if (report.reference_samples > 0) report.mse = mse_sum / static_cast<double>(report.reference_samples);
  return report;
}

std::string report_csv(const ConstraintReport& r) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "metric,column,margin,pass_rate,passed,samples\n";
  const auto n = r.samples;
  for (std::size_t k = 0; k < kComplexityMargins.size(); ++k) {
    out << "complexity," << kComplexityColumns[k] << ',' << kComplexityMargins[k] << ',' << r.complexity_pass[k] << ','
        << std::llround(r.complexity_pass[k] * n) << ',' << n << '\n';
  }
  for (std::size_t k = 0; k < kVolumeMargins.size(); ++k) {
    out << "volume," << kVolumeColumns[k] << ',' << kVolumeMargins[k] << ',' << r.volume_pass[k] << ','
        << std::llround(r.volume_pass[k] * n) << ',' << n << '\n';
  }
  const auto m = r.compliance_samples;
  for (std::size_t k = 0; k < kComplianceBuckets.size(); ++k) {
    out << "compliance," << kComplianceColumns[k] << ',' << kComplianceBuckets[k] << ',' << r.compliance_pass[k]
        << ',' << std::llround(r.compliance_pass[k] * m) << ',' << m << '\n';
  }
  out << "compliance,>10%,inf," << r.compliance_worst << ',' << std::llround(r.compliance_worst * m) << ',' << m
      << '\n';
  return out.str();
}

nlohmann::json report_json(const ConstraintReport& r) {
  nlohmann::json j;
  j["samples"] = r.samples;
  for (std::size_t k = 0; k < kComplexityColumns.size(); ++k) j["complexity"][kComplexityColumns[k]] = r.complexity_pass[k];
  for (std::size_t k = 0; k < kVolumeColumns.size(); ++k) j["volume"][kVolumeColumns[k]] = r.volume_pass[k];
  for (std::size_t k = 0; k < kComplianceColumns.size(); ++k) {
    j["compliance"][kComplianceColumns[k]] = r.compliance_pass[k];
  }
  j["compliance"][">10%"] = r.compliance_worst;
  j["compliance_samples"] = r.compliance_samples;
  j["mse"] = r.mse ? nlohmann::json(*r.mse) : nlohmann::json(nullptr);
  j["monotone"] = r.monotone();
  j["unpaired"] = r.unpaired;
  auto per = nlohmann::json::array();
  for (const auto& e : r.per_sample) {
    nlohmann::json s;
    s["id"] = e.id;
    s["Cx_i"] = e.complexity_input;
    s["Cx_g"] = e.complexity_generated;
    s["V_i"] = e.volume_input;
    s["V_g"] = e.volume_generated;
    s["C_g"] = std::isfinite(e.compliance_generated) ? nlohmann::json(e.compliance_generated) : nlohmann::json("inf");
    if (e.compliance_reference) {
      s["C_i"] = std::isfinite(*e.compliance_reference) ? nlohmann::json(*e.compliance_reference) : nlohmann::json("inf");
    }
    if (e.compliance_error_pct) {
      s["compliance_error_pct"] =
          std::isfinite(*e.compliance_error_pct) ? nlohmann::json(*e.compliance_error_pct) : nlohmann::json("inf");
    }
    if (e.mse) s["mse"] = *e.mse;
    per.push_back(std::move(s));
  }
  j["per_sample"] = std::move(per);
  return j;
}

}  // namespace topoforge
