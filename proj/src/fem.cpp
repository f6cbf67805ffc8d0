#include "topoforge/fem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "topoforge/errors.hpp"

namespace topoforge {

DesignDomain::DesignDomain(int nx_, int ny_) : nx(nx_), ny(ny_) {
  if (nx < 1 || ny < 1) {
    throw ParameterError("design domain needs nx >= 1 and ny >= 1, got " + std::to_string(nx) +
                         "x" + std::to_string(ny));
  }
}

std::array<int, 8> DesignDomain::element_dofs(int ex, int ey) const {
  const int n0 = node_index(ey, ex);
  const int n1 = node_index(ey, ex + 1);
  const int n2 = node_index(ey + 1, ex + 1);
  const int n3 = node_index(ey + 1, ex);
  return {2 * n0, 2 * n0 + 1, 2 * n1, 2 * n1 + 1, 2 * n2, 2 * n2 + 1, 2 * n3, 2 * n3 + 1};
}

void DesignDomain::check_element_field(const Field& field, const char* what) const {
  if (field.rows() != ny || field.cols() != nx) {
    throw ParameterError(std::string(what) + " is " + std::to_string(field.rows()) + "x" +
                         std::to_string(field.cols()) + ", domain expects " + std::to_string(ny) +
                         "x" + std::to_string(nx));
  }
}

ElementMatrix element_stiffness(double young, double poisson) {
  if (!(young > 0.0)) throw ParameterError("young's modulus must be positive");
  if (!(poisson >= 0.0 && poisson < 0.5)) {
    throw ParameterError("poisson ratio must lie in [0, 0.5), got " + std::to_string(poisson));
  }
  const double nu = poisson;
  const double k[8] = {
      0.5 - nu / 6.0,          0.125 + nu / 8.0,  -0.25 - nu / 12.0, -0.125 + 3.0 * nu / 8.0,
      -0.25 + nu / 12.0,       -0.125 - nu / 8.0, nu / 6.0,          0.125 - 3.0 * nu / 8.0,
  };
  // Index pattern of the closed-form unit-square element.
  static constexpr int kPattern[8][8] = {
      {0, 1, 2, 3, 4, 5, 6, 7}, {1, 0, 7, 6, 5, 4, 3, 2}, {2, 7, 0, 5, 6, 3, 4, 1},
      {3, 6, 5, 0, 7, 2, 1, 4}, {4, 5, 6, 7, 0, 1, 2, 3}, {5, 4, 3, 2, 1, 0, 7, 6},
      {6, 3, 4, 1, 2, 7, 0, 5}, {7, 2, 1, 4, 3, 6, 5, 0},
  };
  const double scale = young / (1.0 - nu * nu);
  ElementMatrix ke;
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) ke(r, c) = scale * k[kPattern[r][c]];
  }
  return ke;
}

SparseMatrix assemble_global(const DesignDomain& domain, const Field& density, double penal,
                             const ElementMatrix& k0) {
  domain.check_element_field(density, "density field");
  if (!(penal >= 1.0)) throw ParameterError("penalization exponent must be >= 1");

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(domain.element_count()) * 64);
  for (int ey = 0; ey < domain.ny; ++ey) {
    for (int ex = 0; ex < domain.nx; ++ex) {
      const double scale = std::pow(density(ey, ex), penal);
      const auto dofs = domain.element_dofs(ex, ey);
      for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) triplets.emplace_back(dofs[r], dofs[c], scale * k0(r, c));
      }
    }
  }
  SparseMatrix k(domain.dof_count(), domain.dof_count());
  k.setFromTriplets(triplets.begin(), triplets.end());
  return k;
}

namespace {

struct ReducedSystem {
  SparseMatrix stiffness;
  Eigen::VectorXd load;
  std::vector<int> free_to_full;
};

ReducedSystem reduce(const LinearSystem& system) {
  const auto n = static_cast<int>(system.load.size());
  std::vector<int> full_to_free(n, 0);
  for (int dof : system.fixed_dofs) {
    if (dof < 0 || dof >= n) throw ParameterError("fixed dof " + std::to_string(dof) + " out of range");
    full_to_free[dof] = -1;
  }
  ReducedSystem out;
  for (int d = 0; d < n; ++d) {
    if (full_to_free[d] < 0) continue;
    full_to_free[d] = static_cast<int>(out.free_to_full.size());
    out.free_to_full.push_back(d);
  }
  const auto m = static_cast<int>(out.free_to_full.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(system.stiffness.nonZeros()));
  for (int col = 0; col < system.stiffness.outerSize(); ++col) {
    const int fc = full_to_free[col];
    if (fc < 0) continue;
    for (SparseMatrix::InnerIterator it(system.stiffness, col); it; ++it) {
      const int fr = full_to_free[it.row()];
      if (fr >= 0) triplets.emplace_back(fr, fc, it.value());
    }
  }
  out.stiffness.resize(m, m);
  out.stiffness.setFromTriplets(triplets.begin(), triplets.end());
  out.load.resize(m);
  for (int k = 0; k < m; ++k) out.load[k] = system.load[out.free_to_full[k]];
  return out;
}

double relative_residual(const SparseMatrix& k, const Eigen::VectorXd& u, const Eigen::VectorXd& f) {
  const double denom = std::max(f.norm(), 1e-300);
  return (k * u - f).norm() / denom;
}

Eigen::VectorXd solve_cholesky(const ReducedSystem& reduced) {
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  ldlt.compute(reduced.stiffness);
  if (ldlt.info() != Eigen::Success) {
    throw SingularityError("equilibrium solve: factorization of the reduced stiffness failed");
  }
  const Eigen::VectorXd& d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (d.minCoeff() <= 1e-13 * dmax) {
    throw SingularityError(
        "equilibrium solve: reduced stiffness is singular (load path not supported)");
  }
  Eigen::VectorXd u = ldlt.solve(reduced.load);
  // one step of iterative refinement
  const Eigen::VectorXd r = reduced.load - reduced.stiffness * u;
  u += ldlt.solve(r);
  return u;
}

Eigen::VectorXd solve_cg(const ReducedSystem& reduced, double tolerance) {
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(tolerance);
  cg.setMaxIterations(std::max<Eigen::Index>(1000, 20 * reduced.stiffness.rows()));
  cg.compute(reduced.stiffness);
  Eigen::VectorXd u = cg.solve(reduced.load);
  if (cg.info() != Eigen::Success) {
    throw SingularityError("equilibrium solve: conjugate gradient did not converge after " +
                           std::to_string(cg.iterations()) + " iterations");
  }
  return u;
}

}  // namespace

Eigen::VectorXd solve_equilibrium(const LinearSystem& system, const SolveOptions& options) {
  const auto n = system.load.size();
  if (system.stiffness.rows() != n || system.stiffness.cols() != n) {
    throw ParameterError("stiffness and load dimensions disagree");
  }
  if (system.fixed_dofs.empty()) {
    throw SingularityError("equilibrium solve: no fixed DOFs, rigid-body motion unconstrained");
  }
  if (!system.load.allFinite()) throw ParameterError("load vector has non-finite entries");

  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  const ReducedSystem reduced = reduce(system);
  if (reduced.free_to_full.empty() || reduced.load.isZero(0.0)) return u;

  const bool use_cg =
      options.kind == SolverKind::kConjugateGradient ||
      (options.kind == SolverKind::kAuto &&
       static_cast<int>(reduced.free_to_full.size()) > options.cg_threshold);
  const Eigen::VectorXd free_u = use_cg ? solve_cg(reduced, options.cg_tolerance) : solve_cholesky(reduced);

  const double residual = relative_residual(reduced.stiffness, free_u, reduced.load);
  if (!free_u.allFinite() || residual > options.residual_tolerance) {
    throw SingularityError("equilibrium solve: relative residual " + std::to_string(residual) +
                           " exceeds tolerance (ill-posed or unsupported system)");
  }
  for (std::size_t k = 0; k < reduced.free_to_full.size(); ++k) {
    u[reduced.free_to_full[k]] = free_u[static_cast<Eigen::Index>(k)];
  }
  return u;
}

double compliance(const Eigen::VectorXd& displacement, const Eigen::VectorXd& load) {
  if (displacement.size() != load.size()) {
    throw ParameterError("displacement and load vectors differ in length");
  }
  return load.dot(displacement);
}

Field element_energies(const DesignDomain& domain, const Eigen::VectorXd& displacement,
                       const ElementMatrix& k0) {
  if (displacement.size() != domain.dof_count()) {
    throw ParameterError("displacement vector does not match the domain DOF count");
  }
  Field energies(domain.ny, domain.nx);
  Eigen::Matrix<double, 8, 1> ue;
  for (int ey = 0; ey < domain.ny; ++ey) {
    for (int ex = 0; ex < domain.nx; ++ex) {
      const auto dofs = domain.element_dofs(ex, ey);
      for (int k = 0; k < 8; ++k) ue[k] = displacement[dofs[k]];
      energies(ey, ex) = ue.dot(k0 * ue);
    }
  }
  return energies;
}

double elementwise_compliance(const DesignDomain& domain, const Field& density, double penal,
                              const Eigen::VectorXd& displacement, const ElementMatrix& k0) {
  domain.check_element_field(density, "density field");
  const Field energies = element_energies(domain, displacement, k0);
  double total = 0.0;
  for (int ey = 0; ey < domain.ny; ++ey) {
    for (int ex = 0; ex < domain.nx; ++ex) total += std::pow(density(ey, ex), penal) * energies(ey, ex);
  }
  return total;
}

}  // namespace topoforge
