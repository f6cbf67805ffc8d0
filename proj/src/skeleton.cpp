#include "topoforge/skeleton.hpp"

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace topoforge {

namespace {

// P2..P9 clockwise from north.
constexpr int kDr[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kDc[8] = {0, 1, 1, 1, 0, -1, -1, -1};

std::uint8_t at(const Mask& m, int r, int c) {
  if (r < 0 || c < 0 || r >= m.rows() || c >= m.cols()) return 0;
  return m(r, c) != 0 ? 1 : 0;
}

}  // namespace

int neighbour_count(const Mask& mask, int r, int c) {
  int n = 0;
  for (int k = 0; k < 8; ++k) n += at(mask, r + kDr[k], c + kDc[k]);
  return n;
}

int crossing_number(const Mask& mask, int r, int c) {
  int transitions = 0;
  for (int k = 0; k < 8; ++k) {
    const int a = at(mask, r + kDr[k], c + kDc[k]);
    const int b = at(mask, r + kDr[(k + 1) % 8], c + kDc[(k + 1) % 8]);
    if (a == 0 && b == 1) ++transitions;
  }
  return transitions;
}

Mask thin(const Mask& mask) {
  Mask img = mask.unaryExpr([](std::uint8_t v) -> std::uint8_t { return v != 0 ? 1 : 0; });
  const int rows = static_cast<int>(img.rows());
  const int cols = static_cast<int>(img.cols());
  std::vector<std::pair<int, int>> doomed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      doomed.clear();
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          if (img(r, c) == 0) continue;
          const int b = neighbour_count(img, r, c);
          if (b < 2 || b > 6) continue;
          if (crossing_number(img, r, c) != 1) continue;
          const int p2 = at(img, r - 1, c);
          const int p4 = at(img, r, c + 1);
          const int p6 = at(img, r + 1, c);
          const int p8 = at(img, r, c - 1);
          const bool cond = pass == 0 ? (p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0)
                                      : (p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0);
          if (cond) doomed.emplace_back(r, c);
        }
      }
      for (const auto& [r, c] : doomed) img(r, c) = 0;
      if (!doomed.empty()) changed = true;
    }
  }
  return img;
}

namespace {

// Squared distance transform of a 1D sampled function (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  int first = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] < kInf) {
      first = q;
      break;
    }
  }
  d.assign(n, kInf);
  if (first < 0) return;
  v[0] = first;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = first + 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

Eigen::MatrixXd distance_to_background(const Mask& mask) {
  const auto rows = mask.rows();
  const auto cols = mask.cols();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd sq(rows, cols);
  std::vector<double> f;
  std::vector<double> d;
  for (Eigen::Index c = 0; c < cols; ++c) {
    f.assign(rows, kInf);
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (mask(r, c) == 0) f[r] = 0.0;
    }
    edt_1d(f, d);
    for (Eigen::Index r = 0; r < rows; ++r) sq(r, c) = d[r];
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    f.assign(cols, kInf);
    for (Eigen::Index c = 0; c < cols; ++c) f[c] = sq(r, c);
    edt_1d(f, d);
    for (Eigen::Index c = 0; c < cols; ++c) sq(r, c) = d[c];
  }
  return sq.cwiseSqrt();
}

int label_components(const Mask& mask, Eigen::MatrixXi& labels) {
  const int rows = static_cast<int>(mask.rows());
  const int cols = static_cast<int>(mask.cols());
  labels = Eigen::MatrixXi::Zero(rows, cols);
  int count = 0;
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (mask(r, c) == 0 || labels(r, c) != 0) continue;
      ++count;
      labels(r, c) = count;
      stack.emplace_back(r, c);
      while (!stack.empty()) {
        const auto [pr, pc] = stack.back();
        stack.pop_back();
        for (int k = 0; k < 8; ++k) {
          const int nr = pr + kDr[k];
          const int nc = pc + kDc[k];
          if (at(mask, nr, nc) && labels(nr, nc) == 0) {
            labels(nr, nc) = count;
            stack.emplace_back(nr, nc);
          }
        }
      }
    }
  }
  return count;
}

}  // namespace topoforge
