#include "topoforge/simp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "topoforge/errors.hpp"

namespace topoforge {

void SimpConfig::validate() const {
  if (!(penal >= 1.0)) throw ParameterError("penal must be >= 1");
  if (!(move > 0.0 && move < 1.0)) throw ParameterError("move limit must lie in (0, 1)");
  if (!(damping > 0.0)) throw ParameterError("damping exponent must be positive");
  if (!(rmin >= 0.0)) throw ParameterError("filter radius must be >= 0");
  if (!(x_min > 0.0 && x_min < 1.0)) throw ParameterError("x_min must lie in (0, 1)");
  if (!(volfrac > x_min && volfrac <= 1.0)) {
    throw ParameterError("volume fraction must lie in (x_min, 1], got " + std::to_string(volfrac));
  }
  if (max_iters < 1) throw ParameterError("max_iters must be >= 1");
  if (!(change_tol > 0.0)) throw ParameterError("change_tol must be positive");
  if (!(lambda_lo > 0.0 && lambda_hi > lambda_lo)) throw ParameterError("invalid bisection bracket");
}

DensityBounds DensityBounds::free(const DesignDomain& domain, double x_min) {
  return {Field::Constant(domain.ny, domain.nx, x_min), Field::Ones(domain.ny, domain.nx)};
}

void DensityBounds::set_passive(int ex, int ey, double x_min) {
  lower(ey, ex) = x_min;
  upper(ey, ex) = x_min;
}

void DensityBounds::set_active(int ex, int ey) {
  lower(ey, ex) = 1.0;
  upper(ey, ex) = 1.0;
}

void DensityBounds::set_passive_disk(double center_x, double center_y, double radius, double x_min) {
  for (Eigen::Index ey = 0; ey < lower.rows(); ++ey) {
    for (Eigen::Index ex = 0; ex < lower.cols(); ++ex) {
      if (std::hypot(ex + 0.5 - center_x, ey + 0.5 - center_y) < radius) {
        set_passive(static_cast<int>(ex), static_cast<int>(ey), x_min);
      }
    }
  }
}

void DensityBounds::set_active_disk(double center_x, double center_y, double radius) {
  for (Eigen::Index ey = 0; ey < lower.rows(); ++ey) {
    for (Eigen::Index ex = 0; ex < lower.cols(); ++ex) {
      if (std::hypot(ex + 0.5 - center_x, ey + 0.5 - center_y) < radius) {
        set_active(static_cast<int>(ex), static_cast<int>(ey));
      }
    }
  }
}

void DensityBounds::validate(const DesignDomain& domain, double x_min) const {
  domain.check_element_field(lower, "lower density bound");
  domain.check_element_field(upper, "upper density bound");
  const double slack = 1e-12;
  if ((lower.array() < x_min - slack).any() || (upper.array() > 1.0 + slack).any() ||
      (lower.array() > upper.array()).any()) {
    throw ParameterError("density bounds must satisfy x_min <= lower <= upper <= 1");
  }
}

DensityBounds bounds_from_volfrac_field(const DesignDomain& domain, const Field& node_field, double x_min) {
  if (node_field.rows() != domain.ny + 1 || node_field.cols() != domain.nx + 1) {
    throw ParameterError("volume-fraction field must be (ny+1) x (nx+1)");
  }
  DensityBounds bounds = DensityBounds::free(domain, x_min);
  for (int ey = 0; ey < domain.ny; ++ey) {
    for (int ex = 0; ex < domain.nx; ++ex) {
      const double v = 0.25 * (node_field(ey, ex) + node_field(ey, ex + 1) + node_field(ey + 1, ex) +
                               node_field(ey + 1, ex + 1));
      if (v <= x_min) {
        bounds.set_passive(ex, ey, x_min);
      } else if (v >= 1.0) {
        bounds.set_active(ex, ey);
      }
    }
  }
  return bounds;
}

Field sensitivities(const DesignDomain& domain, const Field& density, const Eigen::VectorXd& displacement,
                    const ElementMatrix& k0, double penal) {
  domain.check_element_field(density, "density field");
  const Field energies = element_energies(domain, displacement, k0);
  Field dc(domain.ny, domain.nx);
  for (int ey = 0; ey < domain.ny; ++ey) {
    for (int ex = 0; ex < domain.nx; ++ex) {
      dc(ey, ex) = -penal * std::pow(density(ey, ex), penal - 1.0) * energies(ey, ex);
    }
  }
  return dc;
}

SensitivityFilter::SensitivityFilter(const DesignDomain& domain, double rmin) : domain_(domain) {
  if (!(rmin >= 0.0)) throw ParameterError("filter radius must be >= 0");
  const int reach = static_cast<int>(std::floor(rmin));
  offsets_.reserve(domain.element_count() + 1);
  offsets_.push_back(0);
  for (int ey = 0; ey < domain.ny; ++ey) {
    for (int ex = 0; ex < domain.nx; ++ex) {
      double sum = 0.0;
      for (int fy = std::max(0, ey - reach); fy <= std::min(domain.ny - 1, ey + reach); ++fy) {
        for (int fx = std::max(0, ex - reach); fx <= std::min(domain.nx - 1, ex + reach); ++fx) {
          const double w = rmin - std::hypot(static_cast<double>(ex - fx), static_cast<double>(ey - fy));
          if (w > 0.0) {
            neighbours_.push_back({fy * domain.nx + fx, w});
            sum += w;
          }
        }
      }
      weight_sums_.push_back(sum);
      offsets_.push_back(static_cast<int>(neighbours_.size()));
    }
  }
}

Field SensitivityFilter::apply(const Field& density, const Field& raw, double x_min) const {
  domain_.check_element_field(density, "density field");
  domain_.check_element_field(raw, "sensitivity field");
  const double floor = x_min * (1.0 - 1e-12);
  Field out(domain_.ny, domain_.nx);
  const double* x = density.data();
  const double* dc = raw.data();
  for (int e = 0; e < domain_.element_count(); ++e) {
    if (x[e] < floor) {
      throw ParameterError("filter precondition violated: density " + std::to_string(x[e]) +
                           " below x_min at element " + std::to_string(e));
    }
    if (weight_sums_[e] == 0.0) {
      out.data()[e] = dc[e];
      continue;
    }
    double acc = 0.0;
    for (int k = offsets_[e]; k < offsets_[e + 1]; ++k) {
      const auto& n = neighbours_[k];
      acc += n.weight * x[n.index] * dc[n.index];
    }
    out.data()[e] = acc / (x[e] * weight_sums_[e]);
  }
  return out;
}

Field filter_sensitivities(const DesignDomain& domain, const Field& density, const Field& raw, double rmin,
                           double x_min) {
  return SensitivityFilter(domain, rmin).apply(density, raw, x_min);
}

namespace {

struct OcProblem {
  const Field& density;
  const Field& lower;  // move limits intersected with bounds
  const Field& upper;
  Field drive;  // -dc, clamped to >= 0
  double damping;

  double at(Eigen::Index e, double lambda) const {
    const double candidate = density.data()[e] * std::pow(drive.data()[e] / lambda, damping);
    return std::clamp(candidate, lower.data()[e], upper.data()[e]);
  }

  Field update(double lambda) const {
    Field out(density.rows(), density.cols());
    for (Eigen::Index e = 0; e < density.size(); ++e) out.data()[e] = at(e, lambda);
    return out;
  }

  double volume(double lambda) const {
    double sum = 0.0;
    for (Eigen::Index e = 0; e < density.size(); ++e) sum += at(e, lambda);
    return sum / static_cast<double>(density.size());
  }
};

}  // namespace

OcResult oc_update(const Field& density, const Field& filtered, const SimpConfig& config,
                   const DensityBounds& bounds) {
  if (density.rows() != filtered.rows() || density.cols() != filtered.cols() ||
      density.rows() != bounds.lower.rows() || density.cols() != bounds.lower.cols()) {
    throw ParameterError("density, sensitivity and bound fields must share dimensions");
  }
  OcResult result;
  result.target = config.volfrac;

  // Move limits first, bounds take precedence where the two disagree.
  Field lo(density.rows(), density.cols());
  Field hi(density.rows(), density.cols());
  for (Eigen::Index e = 0; e < density.size(); ++e) {
    const double x = density.data()[e];
    const double bl = bounds.lower.data()[e];
    const double bu = bounds.upper.data()[e];
    const double ml = std::max(config.x_min, x - config.move);
    const double mu = std::min(1.0, x + config.move);
    lo.data()[e] = std::clamp(ml, bl, bu);
    hi.data()[e] = std::clamp(mu, bl, bu);
  }

  OcProblem problem{density, lo, hi, Field(density.rows(), density.cols()), config.damping};
  for (Eigen::Index e = 0; e < density.size(); ++e) {
    const double g = filtered.data()[e];
    if (g > 0.0) ++result.clamped_positive;
    problem.drive.data()[e] = g > 0.0 ? 0.0 : -g;
  }

  if (!(problem.drive.maxCoeff() > 0.0)) {
    result.density = density;
    result.volume = density.mean();
    result.degenerate = true;
    result.target_reached = false;
    return result;
  }

  // Limits of the volume as lambda -> 0 and lambda -> infinity.
  Field max_field(density.rows(), density.cols());
  for (Eigen::Index e = 0; e < density.size(); ++e) {
    max_field.data()[e] = problem.drive.data()[e] > 0.0 ? hi.data()[e] : lo.data()[e];
  }
  const double v_max = max_field.mean();
  const double v_min = lo.mean();
  const double target = config.volfrac;

  if (v_max <= target) {
    result.density = std::move(max_field);
    result.volume = v_max;
    result.lambda = 0.0;
    result.target_reached = target - v_max <= config.volume_tol;
    return result;
  }
  if (v_min >= target) {
    result.density = lo;
    result.volume = v_min;
    result.lambda = config.lambda_hi;
    result.target_reached = v_min - target <= config.volume_tol;
    return result;
  }

  double l1 = config.lambda_lo;
  double l2 = config.lambda_hi;
  double v2 = problem.volume(l2);
  if (problem.volume(l1) < target || v2 > target) {
    throw ConvergenceError("OC bisection: target volume " + std::to_string(target) +
                               " not bracketed by lambda in [" + std::to_string(l1) + ", " +
                               std::to_string(l2) + "]",
                           l1, l2);
  }
  const double half_tol = 0.5 * config.volume_tol;
  int steps = 0;
  constexpr int kMaxSteps = 500;
  while ((l2 - l1) / (l2 + l1) > config.lambda_rel_tol || target - v2 > half_tol) {
    if (++steps > kMaxSteps) {
      throw ConvergenceError("OC bisection exhausted its step budget", l1, l2);
    }
    const double mid = 0.5 * (l1 + l2);
    const double v = problem.volume(mid);
    if (v > target) {
      l1 = mid;
    } else {
      l2 = mid;
      v2 = v;
    }
  }
  result.lambda = l2;
  result.bisection_steps = steps;
  result.density = problem.update(l2);
  result.volume = result.density.mean();
  result.target_reached = std::abs(result.volume - target) <= config.volume_tol;
  return result;
}

OptimizationTrace optimize(const DesignDomain& domain, const LoadCase& load_case, const SimpConfig& config,
                           const DensityBounds& bounds) {
  config.validate();
  bounds.validate(domain, config.x_min);
  if (load_case.load.size() != domain.dof_count()) {
    throw ParameterError("load vector does not match the domain DOF count");
  }
  const ElementMatrix k0 = element_stiffness(config.material);
  const SensitivityFilter filter(domain, config.rmin);

  Field x(domain.ny, domain.nx);
  for (Eigen::Index e = 0; e < x.size(); ++e) {
    x.data()[e] = std::clamp(config.volfrac, bounds.lower.data()[e], bounds.upper.data()[e]);
  }

  LinearSystem system;
  system.load = load_case.load;
  system.fixed_dofs = load_case.fixed_dofs;

  OptimizationTrace trace;
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    system.stiffness = assemble_global(domain, x, config.penal, k0);
    Eigen::VectorXd u;
    try {
      u = solve_equilibrium(system, config.solver);
    } catch (const SingularityError& e) {
      throw SingularityError("SIMP iteration " + std::to_string(iter) + ": " + e.what());
    }
    const double c = compliance(u, system.load);
    const Field dc = sensitivities(domain, x, u, k0, config.penal);
    const Field dcf = filter.apply(x, dc, config.x_min);
    OcResult oc = oc_update(x, dcf, config, bounds);

    const double change = (oc.density - x).cwiseAbs().maxCoeff();
    trace.iterations.push_back({iter, c, oc.volume, change});
    trace.clamped_positive += oc.clamped_positive;
    trace.volume_target_reached = oc.target_reached;
    trace.iteration_count = iter;
    x = std::move(oc.density);
    if (oc.degenerate) {
      trace.degenerate = true;
      break;
    }
    if (change < config.change_tol) {
      trace.converged = true;
      break;
    }
  }

  system.stiffness = assemble_global(domain, x, config.penal, k0);
  try {
    trace.final_compliance = compliance(solve_equilibrium(system, config.solver), system.load);
  } catch (const SingularityError& e) {
    throw SingularityError(std::string("SIMP final evaluation: ") + e.what());
  }
  trace.final_volume = x.mean();
  trace.density = std::move(x);
  return trace;
}

OptimizationTrace optimize(const DesignDomain& domain, const Scenario& scenario, const SimpConfig& config,
                           const DensityBounds& bounds) {
  const LoadCase load_case = scenario_to_system(scenario, domain);
  SimpConfig cfg = config;
  cfg.volfrac = scenario.volfrac;
  DensityBounds merged = bounds;
  if (scenario.volfrac_field) {
    const DensityBounds implied = bounds_from_volfrac_field(domain, *scenario.volfrac_field, config.x_min);
    merged.lower = merged.lower.cwiseMax(implied.lower);
    merged.upper = merged.upper.cwiseMin(implied.upper).cwiseMax(merged.lower);
  }
  try {
    return optimize(domain, load_case, cfg, merged);
  } catch (const SingularityError& e) {
    throw SingularityError(std::string(e.what()) + " [scenario seed " + std::to_string(scenario.seed) + ", " +
                           std::to_string(scenario.fixed_nodes.size()) + " fixed nodes, " +
                           std::to_string(scenario.loads.size()) + " loads]");
  }
}

OptimizationTrace optimize(const DesignDomain& domain, const Scenario& scenario, const SimpConfig& config) {
  return optimize(domain, scenario, config, DensityBounds::free(domain, config.x_min));
}

}  // namespace topoforge
