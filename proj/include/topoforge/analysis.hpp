#pragma once

// Evaluation of finished designs: binarization, bar-graph extraction and
// typing, truss-likeness screening, and FE compliance of binary designs.
//
// Designs are grey-value fields, either on the element grid (ny x nx) or on
// the node grid ((ny+1) x (nx+1)) of the scenario they answer.

#include <string>
#include <vector>

#include "topoforge/fem.hpp"
#include "topoforge/scenario.hpp"
#include "topoforge/skeleton.hpp"

namespace topoforge {

// Values >= threshold become 1 (ties go to material), the rest 0.
Field binarize(const Field& design, double threshold = 0.5);

double volume_fraction(const Field& design);

enum class BarType { kClamped, kLoaded, kInternal };

std::string_view to_string(BarType type);

struct Pixel {
  int row = 0;
  int col = 0;

  bool operator==(const Pixel&) const = default;
};

struct GraphNode {
  std::vector<Pixel> pixels;  // junction cluster, or a single end pixel
  double row = 0.0;           // centroid
  double col = 0.0;
  int degree = 0;
};

struct Bar {
  int from = 0;
  int to = 0;
  std::vector<Pixel> polyline;  // node pixel to node pixel
  double length = 0.0;
  BarType type = BarType::kInternal;
};

struct BarGraph {
  std::vector<GraphNode> nodes;
  std::vector<Bar> bars;
  int clamped = 0;
  int loaded = 0;
  int internal = 0;
  bool empty = false;
  // Whether each scenario load, and any fixed node, is reached by a bar end or joint.
  std::vector<bool> load_attached;
  bool support_attached = false;

  int total() const { return clamped + loaded + internal; }
};

struct BarGraphOptions {
  double threshold = 0.5;
  double spur_length = 5.0;
  double junction_radius = 2.0;
  // Measured from the material boundary at the bar end, i.e. the bar's local
  // half-width is added to this radius.
  double attach_radius = 3.0;
};

// Skeletonizes the binarized design and splits the skeleton into bars between
// junctions and end points; spurs shorter than spur_length are pruned and
// junction-to-junction links shorter than spur_length contracted. A bar is
// loaded if an end attaches to a loaded node, else clamped if an end attaches
// to a fixed node, else internal.
BarGraph extract_bar_graph(const Field& design, const Scenario& scenario, const BarGraphOptions& options = {});

struct TrussCheck {
  bool pass = false;
  bool connected = false;
  bool mostly_binary = false;
  bool attached = false;
  double intermediate_fraction = 0.0;
  int components = 0;
  std::vector<std::string> reasons;
};

struct TrussOptions {
  BarGraphOptions bars;
  double grey_low = 0.2;
  double grey_high = 0.8;
  double max_intermediate_fraction = 0.10;
};

TrussCheck truss_likeness(const Field& design, const Scenario& scenario, const TrussOptions& options = {});

// True when every load and at least one fixed node touch the same connected
// piece of binarized material.
bool load_path_connected(const Field& design, const Scenario& scenario, double threshold = 0.5);

struct ComplianceOptions {
  double threshold = 0.5;
  double penal = 3.0;
  double void_density = 1e-3;
  Material material;
};

// Compliance of the binarized design (void at void_density) under the
// scenario's supports and loads, resampled to the element grid if needed.
// +infinity when the load path is disconnected or the solve is singular.
double design_compliance(const Field& design, const Scenario& scenario, const ComplianceOptions& options = {});

// |c_true - c_pred| / c_true * 100
double compliance_error(double c_true, double c_pred);

// Position of pixel (r, c) of an image with `rows` x `cols` pixels in node
// coordinates of the scenario grid.
std::pair<double, double> pixel_to_node(const Scenario& scenario, int rows, int cols, int r, int c);

// Resamples a node-grid design onto the element grid; element-grid designs
// are returned unchanged.
Field to_element_grid(const Field& design, const DesignDomain& domain);

}  // namespace topoforge
