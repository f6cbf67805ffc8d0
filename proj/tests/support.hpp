#pragma once

// Oracles and fixtures shared by the unit tests and the acceptance binary.
// Nothing here calls into the library's FE or optimizer code.

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include "topoforge/fem.hpp"
#include "topoforge/scenario.hpp"

namespace topoforge::testing {

// ------------------------------------------------------------------ 99-line

// Classic 99-line SIMP code transcribed with its own numbering: x is
// nely x nelx, nodes are numbered column by column from 1, y points up.
struct NinetyNineLine {
  int nelx;
  int nely;
  double volfrac;
  double penal = 3.0;
  double rmin = 1.5;
  int max_loop = 200;

  int loops = 0;
  double compliance = 0.0;
  Eigen::MatrixXd x;  // nely x nelx

  static Eigen::Matrix<double, 8, 8> ke() {
    const double E = 1.0;
    const double nu = 0.3;
    const double k[8] = {0.5 - nu / 6,       0.125 + nu / 8, -0.25 - nu / 12, -0.125 + 3 * nu / 8,
                         -0.25 + nu / 12,    -0.125 - nu / 8, nu / 6,          0.125 - 3 * nu / 8};
    const int idx[8][8] = {{0, 1, 2, 3, 4, 5, 6, 7}, {1, 0, 7, 6, 5, 4, 3, 2}, {2, 7, 0, 5, 6, 3, 4, 1},
                           {3, 6, 5, 0, 7, 2, 1, 4}, {4, 5, 6, 7, 0, 1, 2, 3}, {5, 4, 3, 2, 1, 0, 7, 6},
                           {6, 3, 4, 1, 2, 7, 0, 5}, {7, 2, 1, 4, 3, 6, 5, 0}};
    Eigen::Matrix<double, 8, 8> K;
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) K(r, c) = E / (1 - nu * nu) * k[idx[r][c]];
    return K;
  }

  std::array<int, 8> edof(int elx, int ely) const {  // 1-based elx, ely; returns 0-based dofs
    const int n1 = (nely + 1) * (elx - 1) + ely;
    const int n2 = (nely + 1) * elx + ely;
    return {2 * n1 - 2, 2 * n1 - 1, 2 * n2 - 2, 2 * n2 - 1, 2 * n2, 2 * n2 + 1, 2 * n1, 2 * n1 + 1};
  }

  // Cantilever: left edge clamped, unit downward load at mid-height of the right edge.
  Eigen::VectorXd fe(const Eigen::MatrixXd& dens) const {
    const int ndof = 2 * (nelx + 1) * (nely + 1);
    const auto KE = ke();
    std::vector<Eigen::Triplet<double>> t;
    for (int elx = 1; elx <= nelx; ++elx)
      for (int ely = 1; ely <= nely; ++ely) {
        const auto d = edof(elx, ely);
        const double s = std::pow(dens(ely - 1, elx - 1), penal);
        for (int a = 0; a < 8; ++a)
          for (int b = 0; b < 8; ++b) t.emplace_back(d[a], d[b], s * KE(a, b));
      }
    Eigen::SparseMatrix<double> K(ndof, ndof);
    K.setFromTriplets(t.begin(), t.end());
    Eigen::VectorXd F = Eigen::VectorXd::Zero(ndof);
    F(2 * ((nely + 1) * nelx + nely / 2 + 1) - 1) = -1.0;
    const int nfixed = 2 * (nely + 1);
    const int nfree = ndof - nfixed;
    Eigen::SparseMatrix<double> Kff = K.bottomRightCorner(nfree, nfree);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(Kff);
    Eigen::VectorXd U = Eigen::VectorXd::Zero(ndof);
    U.tail(nfree) = lu.solve(F.tail(nfree));
    return U;
  }

  double energy(const Eigen::VectorXd& U, int elx, int ely) const {
    const auto d = edof(elx, ely);
    Eigen::Matrix<double, 8, 1> ue;
    for (int a = 0; a < 8; ++a) ue(a) = U(d[a]);
    return ue.dot(ke() * ue);
  }

  Eigen::MatrixXd check(const Eigen::MatrixXd& dens, const Eigen::MatrixXd& dc) const {
    Eigen::MatrixXd dcn = Eigen::MatrixXd::Zero(nely, nelx);
    const int r = static_cast<int>(std::floor(rmin));
    for (int i = 1; i <= nelx; ++i)
      for (int j = 1; j <= nely; ++j) {
        double sum = 0.0;
        for (int k = std::max(i - r, 1); k <= std::min(i + r, nelx); ++k)
          for (int l = std::max(j - r, 1); l <= std::min(j + r, nely); ++l) {
            const double fac = rmin - std::sqrt((i - k) * (i - k) + (j - l) * (j - l));
            sum += std::max(0.0, fac);
            dcn(j - 1, i - 1) += std::max(0.0, fac) * dens(l - 1, k - 1) * dc(l - 1, k - 1);
          }
        dcn(j - 1, i - 1) /= dens(j - 1, i - 1) * sum;
      }
    return dcn;
  }

  Eigen::MatrixXd oc(const Eigen::MatrixXd& dens, const Eigen::MatrixXd& dc) const {
    double l1 = 0.0;
    double l2 = 100000.0;
    const double move = 0.2;
    Eigen::MatrixXd xnew;
    while (l2 - l1 > 1e-4) {
      const double lmid = 0.5 * (l2 + l1);
      xnew = dens.binaryExpr(dc, [&](double xe, double d) {
        return std::max(0.001, std::max(xe - move, std::min(1.0, std::min(xe + move, xe * std::sqrt(-d / lmid)))));
      });
      if (xnew.sum() - volfrac * nelx * nely > 0) l1 = lmid;
      else l2 = lmid;
    }
    return xnew;
  }

  void run() {
    x = Eigen::MatrixXd::Constant(nely, nelx, volfrac);
    double change = 1.0;
    loops = 0;
    while (change > 0.01 && loops < max_loop) {
      ++loops;
      const Eigen::MatrixXd xold = x;
      const Eigen::VectorXd U = fe(x);
      Eigen::MatrixXd dc(nely, nelx);
      for (int ely = 1; ely <= nely; ++ely)
        for (int elx = 1; elx <= nelx; ++elx) {
          dc(ely - 1, elx - 1) = -penal * std::pow(x(ely - 1, elx - 1), penal - 1) * energy(U, elx, ely);
        }
      dc = check(x, dc);
      x = oc(x, dc);
      change = (x - xold).cwiseAbs().maxCoeff();
    }
    const Eigen::VectorXd U = fe(x);
    compliance = 0.0;
    for (int ely = 1; ely <= nely; ++ely)
      for (int elx = 1; elx <= nelx; ++elx) compliance += std::pow(x(ely - 1, elx - 1), penal) * energy(U, elx, ely);
  }
};

// ------------------------------------------------------------------ rasters

struct Segment {
  double r0, c0, r1, c1;
  double half_width = 1.5;
};

inline double distance_to_segment(double r, double c, const Segment& s) {
  const double dr = s.r1 - s.r0;
  const double dc = s.c1 - s.c0;
  const double len2 = dr * dr + dc * dc;
  double t = len2 > 0 ? ((r - s.r0) * dr + (c - s.c0) * dc) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(r - (s.r0 + t * dr), c - (s.c0 + t * dc));
}

// Pixel (r, c) is material when its centre lies within half_width of a segment.
inline Field draw_segments(int rows, int cols, const std::vector<Segment>& segments) {
  Field img = Field::Zero(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (const auto& s : segments)
        if (distance_to_segment(r, c, s) <= s.half_width) img(r, c) = 1.0;
  return img;
}

// Scenario on an image-sized grid (one element per pixel).
inline Scenario raster_scenario(int rows, int cols, std::vector<NodeCoord> fixed, std::vector<NodeCoord> loads) {
  Scenario s;
  s.nx = cols;
  s.ny = rows;
  s.fixed_nodes = std::move(fixed);
  for (const auto& n : loads) s.loads.push_back({n, 90.0, 1.0});
  s.volfrac = 0.3;
  return s;
}

// Node coordinate of pixel centre (r, c) on an image-sized grid.
inline NodeCoord node_at(double r, double c) {
  return {static_cast<int>(std::lround(r + 0.5)), static_cast<int>(std::lround(c + 0.5))};
}

// ------------------------------------------------------------------ corpus

// A synthetic design with hand-counted bars. Counts follow the labeling rule:
// bars run between joints (junctions, supports, load points, free ends and
// sharp corners).
struct LabeledRaster {
  std::string name;
  Field image;
  Scenario scenario;
  int clamped = 0;
  int loaded = 0;
  int internal = 0;
  int total() const { return clamped + loaded + internal; }
};

inline std::vector<NodeCoord> top_edge(int cols, int from = 0, int to = -1) {
  std::vector<NodeCoord> v;
  for (int j = from; j <= (to < 0 ? cols : to); ++j) v.push_back({0, j});
  return v;
}

inline std::vector<NodeCoord> left_edge(int rows, int from = 0, int to = -1) {
  std::vector<NodeCoord> v;
  for (int i = from; i <= (to < 0 ? rows : to); ++i) v.push_back({i, 0});
  return v;
}

struct BaseShape {
  std::string name;
  std::vector<Segment> segments;  // half_width is overridden per variant
  std::vector<NodeCoord> fixed;
  std::vector<std::pair<double, double>> loads;  // pixel positions
  int clamped, loaded, internal;
};

inline LabeledRaster make_raster(const BaseShape& b, int size, double half_width, bool transpose) {
  std::vector<Segment> segs = b.segments;
  for (auto& s : segs) {
    s.half_width = half_width;
    if (transpose) s = {s.c0, s.r0, s.c1, s.r1, half_width};
  }
  std::vector<NodeCoord> fixed = b.fixed;
  std::vector<NodeCoord> loads;
  for (auto& f : fixed)
    if (transpose) f = {f.j, f.i};
  for (auto [r, c] : b.loads) loads.push_back(transpose ? node_at(c, r) : node_at(r, c));
  LabeledRaster out;
  out.name = b.name + (transpose ? "/T" : "") + "/w" + std::to_string(static_cast<int>(2 * half_width));
  out.image = draw_segments(size, size, segs);
  out.scenario = raster_scenario(size, size, fixed, loads);
  out.clamped = b.clamped;
  out.loaded = b.loaded;
  out.internal = b.internal;
  return out;
}

inline std::vector<BaseShape> base_shapes() {
  const int n = 64;
  std::vector<BaseShape> v;
  v.push_back({"bar", {{0, 32, 60, 32}}, top_edge(n, 20, 44), {{60, 32}}, 0, 1, 0});
  v.push_back({"diagonal", {{10, 0, 55, 55}}, left_edge(n), {{55, 55}}, 0, 1, 0});
  v.push_back({"vee", {{0, 12, 55, 32}, {0, 52, 55, 32}}, top_edge(n), {{55, 32}}, 0, 2, 0});
  v.push_back({"wye",
               {{0, 32, 28, 32}, {28, 32, 58, 8}, {28, 32, 58, 56}},
               top_edge(n),
               {{58, 8}, {58, 56}},
               1, 2, 0});
  v.push_back({"tee", {{32, 0, 32, 60}, {32, 40, 60, 40}}, left_edge(n), {{60, 40}}, 1, 1, 1});
  v.push_back({"plus", {{14, 32, 50, 32}, {32, 14, 32, 50}}, top_edge(n, 0, 4), {{63, 63}}, 0, 0, 4});
  v.push_back({"fan",
               {{6, 0, 32, 54}, {58, 0, 32, 54}, {32, 0, 32, 54}},
               left_edge(n),
               {{32, 54}},
               0, 3, 0});
  v.push_back({"two-bay",
               {{12, 0, 12, 56}, {52, 0, 52, 56}, {12, 28, 52, 28}, {12, 56, 52, 56}, {12, 0, 52, 28}, {12, 28, 52, 56}},
               left_edge(n),
               {{52, 56}},
               3, 3, 2});
  v.push_back({"ladder",
               {{0, 16, 60, 16}, {0, 48, 60, 48}, {20, 16, 20, 48}, {40, 16, 40, 48}},
               top_edge(n),
               {{60, 16}, {60, 48}},
               2, 2, 4});
  v.push_back({"cross", {{4, 0, 60, 60}, {60, 0, 4, 60}}, left_edge(n), {{60, 60}}, 2, 1, 1});
  v.push_back({"two-pieces", {{0, 12, 56, 12}, {20, 36, 56, 52}}, top_edge(n, 0, 24), {{56, 12}}, 0, 1, 1});
  v.push_back({"triangle", {{16, 12, 16, 52}, {16, 52, 50, 32}, {50, 32, 16, 12}}, top_edge(n, 0, 4), {{63, 0}},
               0, 0, 3});
  v.push_back({"frame", {{12, 12, 12, 52}, {12, 52, 52, 52}, {52, 52, 52, 12}, {52, 12, 12, 12}}, top_edge(n, 0, 4),
               {{63, 63}}, 0, 0, 4});
  v.push_back({"braced-frame",
               {{12, 12, 12, 52}, {12, 52, 52, 52}, {52, 52, 52, 12}, {52, 12, 12, 12}, {12, 12, 52, 52}},
               top_edge(n, 0, 4),
               {{63, 63}},
               0, 0, 5});
  v.push_back({"tree",
               {{0, 32, 20, 32}, {20, 32, 38, 16}, {20, 32, 38, 48}, {38, 16, 60, 4}, {38, 16, 60, 26}, {38, 48, 60, 38},
                {38, 48, 60, 60}},
               top_edge(n),
               {{60, 4}, {60, 26}, {60, 38}, {60, 60}},
               1, 4, 2});
  v.push_back({"warren",
               {{10, 0, 10, 60}, {50, 15, 50, 45}, {10, 0, 50, 15}, {50, 15, 10, 30}, {10, 30, 50, 45}, {50, 45, 10, 60}},
               left_edge(n),
               {{10, 60}},
               2, 2, 3});
  {
    std::vector<Segment> arch;
    const int pieces = 12;
    for (int k = 0; k < pieces; ++k) {
      const double a0 = std::numbers::pi * k / pieces;
      const double a1 = std::numbers::pi * (k + 1) / pieces;
      arch.push_back({28 * std::sin(a0), 32 + 28 * std::cos(a0), 28 * std::sin(a1), 32 + 28 * std::cos(a1)});
    }
    v.push_back({"arch", arch, top_edge(n), {{28, 32}}, 0, 2, 0});
  }
  v.push_back({"portal", {{0, 12, 56, 12}, {0, 52, 56, 52}, {30, 12, 30, 52}}, top_edge(n), {{56, 12}, {56, 52}}, 2, 2, 1});
  return v;
}

inline std::vector<LabeledRaster> bar_corpus() {
  std::vector<LabeledRaster> out;
  for (const auto& b : base_shapes()) {
    out.push_back(make_raster(b, 64, 1.5, false));
    out.push_back(make_raster(b, 64, 2.5, false));
    out.push_back(make_raster(b, 64, 2.0, true));
  }
  return out;
}

// Replica of the annotated example design: clamped along the top edge, loads at
// the two bottom corners (7 and 38 degrees); 5 clamped bars from two support
// joints, 2 loaded bars and 6 internal bars.
inline LabeledRaster fig9_replica() {
  const int n = 100;
  const double w = 2.0;
  // Supports A, B; junctions J1..J6; loads L1, L2 (pixel coordinates).
  const std::pair<double, double> A{0, 20}, B{0, 70}, J1{35, 8}, J2{35, 40}, J3{35, 68}, J4{35, 95}, J5{70, 25},
      J6{70, 80}, L1{96, 3}, L2{96, 96};
  auto seg = [&](std::pair<double, double> p, std::pair<double, double> q) {
    return Segment{p.first, p.second, q.first, q.second, w};
  };
  std::vector<Segment> segs = {seg(A, J1),  seg(A, J2),  seg(B, J2),  seg(B, J3),  seg(B, J4),   // clamped
                               seg(J1, J2), seg(J2, J3), seg(J3, J4), seg(J1, J5), seg(J4, J6), seg(J5, J6),
                               seg(L1, J5), seg(L2, J6)};
  LabeledRaster r;
  r.name = "fig9";
  r.image = draw_segments(n, n, segs);
  r.scenario = raster_scenario(n, n, top_edge(n, 0, 99), {node_at(L1.first, L1.second), node_at(L2.first, L2.second)});
  r.scenario.loads[0].theta_deg = 7.0;
  r.scenario.loads[1].theta_deg = 38.0;
  r.clamped = 5;
  r.loaded = 2;
  r.internal = 6;
  return r;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / ("topoforge-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace topoforge::testing
