#pragma once

// Plane-stress finite elements on a regular grid of unit square Q4 elements.
//
// Numbering conventions (stable, used by every file format in the project):
//   - element (ey, ex) sits in row ey in [0, ny), column ex in [0, nx);
//     fields of element values are ny x nx row-major matrices.
//   - node (i, j) sits in row i in [0, ny], column j in [0, nx];
//     node index = i * (nx + 1) + j.
//   - node n owns DOFs 2n (x, along increasing column) and 2n + 1
//     (y, along increasing row).
//   - element corners are ordered (ey, ex), (ey, ex+1), (ey+1, ex+1),
//     (ey+1, ex), counterclockwise in the (x, y) frame above.

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace topoforge {

using Field = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ElementMatrix = Eigen::Matrix<double, 8, 8>;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct DesignDomain {
  int nx = 1;
  int ny = 1;

  DesignDomain() = default;
  DesignDomain(int nx_, int ny_);

  int element_count() const { return nx * ny; }
  int node_count() const { return (nx + 1) * (ny + 1); }
  int dof_count() const { return 2 * node_count(); }
  int node_index(int i, int j) const { return i * (nx + 1) + j; }
  bool contains_node(int i, int j) const { return i >= 0 && i <= ny && j >= 0 && j <= nx; }

  std::array<int, 8> element_dofs(int ex, int ey) const;

  // Throws ParameterError unless `field` is ny x nx.
  void check_element_field(const Field& field, const char* what) const;

  bool operator==(const DesignDomain&) const = default;
};

struct Material {
  double young = 1.0;
  double poisson = 0.3;
};

// Exact bilinear plane-stress stiffness of a unit square element.
ElementMatrix element_stiffness(double young, double poisson);
inline ElementMatrix element_stiffness(const Material& m) { return element_stiffness(m.young, m.poisson); }

// K = sum_e x_e^penal * scatter(k0), unconstrained.
SparseMatrix assemble_global(const DesignDomain& domain, const Field& density, double penal,
                             const ElementMatrix& k0);

struct LinearSystem {
  SparseMatrix stiffness;
  Eigen::VectorXd load;
  std::vector<int> fixed_dofs;
};

enum class SolverKind { kAuto, kCholesky, kConjugateGradient };

struct SolveOptions {
  SolverKind kind = SolverKind::kAuto;
  // kAuto switches to CG above this many free DOFs.
  int cg_threshold = 400000;
  double cg_tolerance = 1e-10;
  double residual_tolerance = 1e-8;
};

// Solves the reduced system on the free DOFs; fixed DOFs get zero displacement.
// Throws SingularityError when the reduced stiffness is not positive definite.
Eigen::VectorXd solve_equilibrium(const LinearSystem& system, const SolveOptions& options = {});

double compliance(const Eigen::VectorXd& displacement, const Eigen::VectorXd& load);

// Element strain energies u_e^T k0 u_e (unpenalized), ny x nx.
Field element_energies(const DesignDomain& domain, const Eigen::VectorXd& displacement,
                       const ElementMatrix& k0);

// sum_e x_e^penal u_e^T k0 u_e
double elementwise_compliance(const DesignDomain& domain, const Field& density, double penal,
                              const Eigen::VectorXd& displacement, const ElementMatrix& k0);

}  // namespace topoforge
