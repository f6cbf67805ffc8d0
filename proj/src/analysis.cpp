#include <cmath>
#include <limits>
#include <set>

#include "topoforge/analysis.hpp"
#include "topoforge/errors.hpp"

namespace topoforge {

Field binarize(const Field& design, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ParameterError("binarization threshold must lie in (0, 1)");
  return (design.array() >= threshold).cast<double>().matrix();
}

double volume_fraction(const Field& design) {
  if (design.size() == 0) throw ParameterError("empty design image");
  return design.mean();
}

Field to_element_grid(const Field& design, const DesignDomain& domain) {
  if (design.rows() == domain.ny && design.cols() == domain.nx) return design;
  if (design.rows() == domain.ny + 1 && design.cols() == domain.nx + 1) {
    return resample_bilinear(design, domain.ny, domain.nx);
  }
  throw ParameterError("design is " + std::to_string(design.rows()) + "x" + std::to_string(design.cols()) +
                       ", expected the element or node grid of a " + std::to_string(domain.ny) + "x" +
                       std::to_string(domain.nx) + " domain");
}

namespace {

Mask to_mask(const Field& design, double threshold) {
  Mask m(design.rows(), design.cols());
  for (Eigen::Index k = 0; k < design.size(); ++k) m.data()[k] = design.data()[k] >= threshold ? 1 : 0;
  return m;
}

// Pixels whose centre lies within one pixel of the scenario node.
std::vector<Pixel> touching_pixels(const Scenario& s, int rows, int cols, const NodeCoord& n) {
  const double tr = n.i * static_cast<double>(rows) / s.ny - 0.5;
  const double tc = n.j * static_cast<double>(cols) / s.nx - 0.5;
  std::vector<Pixel> out;
  for (int r = static_cast<int>(std::floor(tr - 1.0)); r <= static_cast<int>(std::ceil(tr + 1.0)); ++r) {
    for (int c = static_cast<int>(std::floor(tc - 1.0)); c <= static_cast<int>(std::ceil(tc + 1.0)); ++c) {
      if (r < 0 || c < 0 || r >= rows || c >= cols) continue;
      if (std::hypot(r - tr, c - tc) <= 1.0) out.push_back({r, c});
    }
  }
  return out;
}

// Component labels touching a node (empty when no material touches it).
std::set<int> touching_labels(const Eigen::MatrixXi& labels, const Scenario& s, const NodeCoord& n) {
  std::set<int> out;
  for (const auto& p : touching_pixels(s, static_cast<int>(labels.rows()), static_cast<int>(labels.cols()), n)) {
    if (labels(p.row, p.col) > 0) out.insert(labels(p.row, p.col));
  }
  return out;
}

struct Connectivity {
  int components = 0;
  bool load_path = false;  // some component touches every load and a fixed node
};

Connectivity analyse_connectivity(const Field& design, const Scenario& scenario, double threshold) {
  Eigen::MatrixXi labels;
  Connectivity out;
  out.components = label_components(to_mask(design, threshold), labels);
  std::set<int> candidates;
  for (const auto& f : scenario.fixed_nodes) {
    const auto t = touching_labels(labels, scenario, f);
    candidates.insert(t.begin(), t.end());
  }
  for (const auto& l : scenario.loads) {
    const auto t = touching_labels(labels, scenario, l.node);
    std::set<int> keep;
    for (int c : candidates) {
      if (t.contains(c)) keep.insert(c);
    }
    candidates = std::move(keep);
  }
  out.load_path = !candidates.empty();
  return out;
}

}  // namespace

bool load_path_connected(const Field& design, const Scenario& scenario, double threshold) {
  return analyse_connectivity(design, scenario, threshold).load_path;
}

TrussCheck truss_likeness(const Field& design, const Scenario& scenario, const TrussOptions& options) {
  TrussCheck out;
  const Connectivity conn = analyse_connectivity(design, scenario, options.bars.threshold);
  out.components = conn.components;
  out.connected = conn.components == 1 && conn.load_path;
  if (!out.connected) {
    out.reasons.push_back(conn.components == 0   ? "disconnect: no material"
                          : conn.components > 1 ? "disconnect: " + std::to_string(conn.components) + " material components"
                                                : "disconnect: loads and supports not joined by material");
  }

  const auto grey = ((design.array() > options.grey_low) && (design.array() < options.grey_high)).count();
  out.intermediate_fraction = static_cast<double>(grey) / static_cast<double>(design.size());
  out.mostly_binary = out.intermediate_fraction < options.max_intermediate_fraction;
  if (!out.mostly_binary) {
    out.reasons.push_back("intermediate density: " + std::to_string(out.intermediate_fraction * 100.0) +
                          "% of pixels are grey");
  }

  const BarGraph graph = extract_bar_graph(design, scenario, options.bars);
  bool loads_ok = true;
  for (std::size_t k = 0; k < scenario.loads.size(); ++k) {
    if (graph.load_attached.empty() || !graph.load_attached[k]) {
      loads_ok = false;
      const auto& n = scenario.loads[k].node;
      out.reasons.push_back("unattached load at (" + std::to_string(n.i) + "," + std::to_string(n.j) + ")");
    }
  }
  const bool fixed_ok = graph.support_attached;
  if (!fixed_ok) out.reasons.push_back("unattached support: no bar reaches the fixed nodes");
  out.attached = loads_ok && fixed_ok;
  out.pass = out.connected && out.mostly_binary && out.attached;
  return out;
}

double design_compliance(const Field& design, const Scenario& scenario, const ComplianceOptions& options) {
  const DesignDomain domain = scenario.domain();
  const Field elements = to_element_grid(design, domain);
  const Field solid = binarize(elements, options.threshold);
  if (scenario.loads.empty()) return 0.0;
  if (!load_path_connected(solid, scenario, 0.5)) return std::numeric_limits<double>::infinity();
  const Field density = solid.unaryExpr([&](double v) { return v > 0.5 ? 1.0 : options.void_density; });
  const LoadCase lc = scenario_to_system(scenario, domain);
  LinearSystem system{assemble_global(domain, density, options.penal, element_stiffness(options.material)), lc.load,
                      lc.fixed_dofs};
  try {
    return compliance(solve_equilibrium(system), system.load);
  } catch (const SingularityError&) {
    return std::numeric_limits<double>::infinity();
  }
}

double compliance_error(double c_true, double c_pred) {
  if (!(c_true > 0.0)) throw ParameterError("reference compliance must be positive");
  return std::abs(c_true - c_pred) / c_true * 100.0;
}

}  // namespace topoforge
