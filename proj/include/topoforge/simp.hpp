#pragma once

// SIMP compliance minimization with the optimality-criteria update.

#include <utility>
#include <vector>

#include "topoforge/fem.hpp"
#include "topoforge/scenario.hpp"

namespace topoforge {

struct SimpConfig {
  double penal = 3.0;
  double move = 0.2;
  double damping = 0.5;
  double rmin = 1.5;
  double volfrac = 0.4;
  int max_iters = 200;
  double change_tol = 0.01;
  double x_min = 1e-3;
  Material material;
  SolveOptions solver;

  // Lagrange-multiplier bisection bracket and stopping rule.
  double lambda_lo = 1e-9;
  double lambda_hi = 1e9;
  double lambda_rel_tol = 1e-4;
  double volume_tol = 1e-4;

  // Throws ParameterError on invalid settings. `volfrac` = 1 is accepted.
  void validate() const;
};

// Per-element density limits; passive elements are pinned to x_min and
// active elements to 1.
struct DensityBounds {
  Field lower;
  Field upper;

  static DensityBounds free(const DesignDomain& domain, double x_min);

  void set_passive(int ex, int ey, double x_min);
  void set_active(int ex, int ey);
  // Elements whose centre lies strictly inside the disk.
  void set_passive_disk(double center_x, double center_y, double radius, double x_min);
  void set_active_disk(double center_x, double center_y, double radius);

  bool is_passive(int ex, int ey, double x_min) const { return upper(ey, ex) <= x_min; }
  bool is_active(int ex, int ey) const { return lower(ey, ex) >= 1.0; }

  void validate(const DesignDomain& domain, double x_min) const;
};

// Bounds implied by a spatial volume-fraction field: elements whose averaged
// target is <= x_min become passive, those >= 1 become active.
DensityBounds bounds_from_volfrac_field(const DesignDomain& domain, const Field& node_field, double x_min);

// dc/dx_e = -p x_e^(p-1) u_e^T k0 u_e
Field sensitivities(const DesignDomain& domain, const Field& density, const Eigen::VectorXd& displacement,
                    const ElementMatrix& k0, double penal);

// Mesh-independency filter with weights max(0, rmin - dist) between element
// centres. Neighbourhoods are precomputed once per (domain, rmin).
class SensitivityFilter {
 public:
  SensitivityFilter(const DesignDomain& domain, double rmin);

  Field apply(const Field& density, const Field& raw, double x_min) const;

 private:
  struct Neighbour {
    int index;
    double weight;
  };

  DesignDomain domain_;
  std::vector<int> offsets_;
  std::vector<Neighbour> neighbours_;
  std::vector<double> weight_sums_;
};

Field filter_sensitivities(const DesignDomain& domain, const Field& density, const Field& raw, double rmin,
                           double x_min);

struct OcResult {
  Field density;
  double volume = 0.0;  // mean density after the update
  double target = 0.0;
  double lambda = 0.0;
  int bisection_steps = 0;
  bool target_reached = true;
  bool degenerate = false;
  int clamped_positive = 0;
};

// One optimality-criteria step towards `config.volfrac`. The chosen multiplier
// keeps the volume at or below the target.
OcResult oc_update(const Field& density, const Field& filtered, const SimpConfig& config,
                   const DensityBounds& bounds);

struct IterationRecord {
  int iteration = 0;
  double compliance = 0.0;
  double volume = 0.0;
  double change = 0.0;
};

struct OptimizationTrace {
  std::vector<IterationRecord> iterations;
  Field density;
  int iteration_count = 0;
  bool converged = false;
  bool degenerate = false;
  bool volume_target_reached = true;
  int clamped_positive = 0;
  // compliance of the returned density
  double final_compliance = 0.0;
  double final_volume = 0.0;
};

// Runs solve -> sensitivities -> filter -> OC until the largest density change
// drops below change_tol or max_iters is reached.
OptimizationTrace optimize(const DesignDomain& domain, const LoadCase& load_case, const SimpConfig& config,
                           const DensityBounds& bounds);

// Volume target comes from the scenario (its mean when a spatial field is given).
// Solver failures are rethrown as SingularityError naming the iteration and seed.
OptimizationTrace optimize(const DesignDomain& domain, const Scenario& scenario, const SimpConfig& config,
                           const DensityBounds& bounds);
OptimizationTrace optimize(const DesignDomain& domain, const Scenario& scenario, const SimpConfig& config);

}  // namespace topoforge
