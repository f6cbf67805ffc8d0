#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <utility>

#include "topoforge/analysis.hpp"
#include "topoforge/errors.hpp"

namespace topoforge {

std::string_view to_string(BarType type) {
  switch (type) {
    case BarType::kClamped:
      return "clamped";
    case BarType::kLoaded:
      return "loaded";
    case BarType::kInternal:
      return "internal";
  }
  return "internal";
}

namespace {

constexpr int kDr[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kDc[8] = {0, 1, 1, 1, 0, -1, -1, -1};

bool set(const Mask& m, int r, int c) {
  return r >= 0 && c >= 0 && r < m.rows() && c < m.cols() && m(r, c) != 0;
}

// Removes corner pixels of diagonal staircases so that every interior pixel of
// a skeleton branch has exactly two neighbours.
void remove_staircases(Mask& skel) {
  // (a, b) perpendicular 4-neighbours, (x, y, z) must be clear for the pixel
  // to be redundant; indices into kDr/kDc.
  static constexpr int kPatterns[4][5] = {
      {0, 2, 4, 5, 6},  // N, E present; S, SW, W clear
      {2, 4, 6, 7, 0},  // E, S present; W, NW, N clear
      {4, 6, 0, 1, 2},  // S, W present; N, NE, E clear
      {6, 0, 2, 3, 4},  // W, N present; E, SE, S clear
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int r = 0; r < skel.rows(); ++r) {
      for (int c = 0; c < skel.cols(); ++c) {
        if (skel(r, c) == 0) continue;
        for (const auto& p : kPatterns) {
          const bool redundant = set(skel, r + kDr[p[0]], c + kDc[p[0]]) &&
                                 set(skel, r + kDr[p[1]], c + kDc[p[1]]) &&
                                 !set(skel, r + kDr[p[2]], c + kDc[p[2]]) &&
                                 !set(skel, r + kDr[p[3]], c + kDc[p[3]]) &&
                                 !set(skel, r + kDr[p[4]], c + kDc[p[4]]);
          if (redundant) {
            skel(r, c) = 0;
            changed = true;
            break;
          }
        }
      }
    }
  }
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

double step_length(const Pixel& a, const Pixel& b) {
  return std::hypot(static_cast<double>(a.row - b.row), static_cast<double>(a.col - b.col));
}

double polyline_length(const std::vector<Pixel>& path) {
  double len = 0.0;
  for (std::size_t k = 1; k < path.size(); ++k) len += step_length(path[k - 1], path[k]);
  return len;
}

// Point at arc length `s` along the path (clamped to its ends).
std::pair<double, double> point_along(const std::vector<Pixel>& path, double s) {
  double walked = 0.0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    const double step = step_length(path[k - 1], path[k]);
    if (walked + step >= s) {
      const double t = step > 0 ? (s - walked) / step : 0.0;
      return {path[k - 1].row + t * (path[k].row - path[k - 1].row),
              path[k - 1].col + t * (path[k].col - path[k - 1].col)};
    }
    walked += step;
  }
  return {static_cast<double>(path.back().row), static_cast<double>(path.back().col)};
}

// Turning angle in degrees (0 = straight) at a vertex between incoming
// point `a` and outgoing point `b`.
double turn_degrees(std::pair<double, double> a, std::pair<double, double> v, std::pair<double, double> b) {
  const double ur = v.first - a.first;
  const double uc = v.second - a.second;
  const double wr = b.first - v.first;
  const double wc = b.second - v.second;
  const double nu = std::hypot(ur, uc);
  const double nw = std::hypot(wr, wc);
  if (nu == 0.0 || nw == 0.0) return 0.0;
  const double cosine = std::clamp((ur * wr + uc * wc) / (nu * nw), -1.0, 1.0);
  return std::acos(cosine) * 180.0 / std::numbers::pi;
}

constexpr double kCornerDegrees = 45.0;

// Skeleton pixel of a pruned branch, kept so that material reaching a support
// or load through a short stub still attaches there.
struct Contact {
  std::size_t at;  // index into the carrying edge's path
  Pixel pixel;
};

struct Edge {
  int a;
  int b;
  std::vector<Pixel> path;
  double length;
  bool alive = true;
  std::vector<Contact> contacts;
};

struct RawGraph {
  std::vector<GraphNode> nodes;
  std::vector<bool> node_alive;
  std::vector<Edge> edges;
  std::map<int, std::vector<Pixel>> absorbed;  // per node

  void absorb(int into, const std::vector<Pixel>& pixels) {
    auto& v = absorbed[into];
    v.insert(v.end(), pixels.begin(), pixels.end());
  }
  void absorb_node(int into, int from) {
    auto it = absorbed.find(from);
    if (it == absorbed.end()) return;
    const std::vector<Pixel> moved = std::move(it->second);
    absorbed.erase(it);
    absorb(into, moved);
  }
};

// Moves the contacts of `e` beyond path index `q` onto `tail` and those at `q`
// onto `joint`.
void partition_contacts(RawGraph& g, Edge& e, Edge& tail, std::size_t q, int joint) {
  std::vector<Contact> head;
  for (const auto& c : e.contacts) {
    if (c.at < q) head.push_back(c);
    else if (c.at > q) tail.contacts.push_back({c.at - q, c.pixel});
    else g.absorb(joint, {c.pixel});
  }
  e.contacts = std::move(head);
}

RawGraph trace_skeleton(const Mask& skel, double junction_radius) {
  const int rows = static_cast<int>(skel.rows());
  const int cols = static_cast<int>(skel.cols());
  auto id = [cols](int r, int c) { return r * cols + c; };

  std::vector<Pixel> junctions;
  std::vector<Pixel> ends;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (skel(r, c) == 0) continue;
      const int nb = neighbour_count(skel, r, c);
      if (nb >= 3) junctions.push_back({r, c});
      if (nb <= 1) ends.push_back({r, c});
    }
  }

  // Cluster junction pixels within junction_radius of each other.
  UnionFind uf(static_cast<int>(junctions.size()));
  for (std::size_t a = 0; a < junctions.size(); ++a) {
    for (std::size_t b = a + 1; b < junctions.size(); ++b) {
      if (step_length(junctions[a], junctions[b]) <= junction_radius) uf.unite(static_cast<int>(a), static_cast<int>(b));
    }
  }

  RawGraph g;
  std::vector<int> node_of(static_cast<std::size_t>(rows) * cols, -1);
  std::map<int, int> cluster_node;
  for (std::size_t a = 0; a < junctions.size(); ++a) {
    const int root = uf.find(static_cast<int>(a));
    auto [it, inserted] = cluster_node.try_emplace(root, static_cast<int>(g.nodes.size()));
    if (inserted) g.nodes.emplace_back();
    g.nodes[it->second].pixels.push_back(junctions[a]);
    node_of[id(junctions[a].row, junctions[a].col)] = it->second;
  }
  for (const auto& e : ends) {
    node_of[id(e.row, e.col)] = static_cast<int>(g.nodes.size());
    g.nodes.push_back(GraphNode{{e}, 0, 0, 0});
  }

  std::vector<bool> visited(static_cast<std::size_t>(rows) * cols, false);
  std::map<std::pair<int, int>, bool> direct_links;

  auto walk = [&](int start_node, Pixel from, Pixel first) {
    std::vector<Pixel> path{from, first};
    visited[id(first.row, first.col)] = true;
    Pixel prev = from;
    Pixel cur = first;
    while (true) {
      int end_node = -1;
      Pixel end_pixel{};
      Pixel next{-1, -1};
      for (int k = 0; k < 8; ++k) {
        const int nr = cur.row + kDr[k];
        const int nc = cur.col + kDc[k];
        if (!set(skel, nr, nc) || (nr == prev.row && nc == prev.col)) continue;
        const int n = node_of[id(nr, nc)];
        if (n >= 0) {
          if (n == start_node && path.size() < 3) continue;
          end_node = n;
          end_pixel = {nr, nc};
          break;
        }
        if (!visited[id(nr, nc)] && next.row < 0) next = {nr, nc};
      }
      if (end_node >= 0) {
        path.push_back(end_pixel);
        const double len = polyline_length(path);
        g.edges.push_back({start_node, end_node, std::move(path), len, true, {}});
        return;
      }
      if (next.row < 0) {
        // Dead end inside a branch: close it with a fresh end node.
        const int n = static_cast<int>(g.nodes.size());
        g.nodes.push_back(GraphNode{{cur}, 0, 0, 0});
        node_of[id(cur.row, cur.col)] = n;
        const double len = polyline_length(path);
        g.edges.push_back({start_node, n, std::move(path), len, true, {}});
        return;
      }
      visited[id(next.row, next.col)] = true;
      path.push_back(next);
      prev = cur;
      cur = next;
    }
  };

  auto trace_from = [&](int n) {
    const auto pixels = g.nodes[n].pixels;
    for (const auto& p : pixels) {
      for (int k = 0; k < 8; ++k) {
        const int nr = p.row + kDr[k];
        const int nc = p.col + kDc[k];
        if (!set(skel, nr, nc)) continue;
        const int m = node_of[id(nr, nc)];
        if (m == n) continue;
        if (m >= 0) {
          const auto key = std::minmax(n, m);
          if (!direct_links.contains(key)) {
            direct_links[key] = true;
            g.edges.push_back({n, m, {p, {nr, nc}}, step_length(p, {nr, nc}), true, {}});
          }
          continue;
        }
        if (!visited[id(nr, nc)]) walk(n, p, {nr, nc});
      }
    }
  };

  for (std::size_t n = 0; n < g.nodes.size(); ++n) trace_from(static_cast<int>(n));

  // Closed loops without any junction or end: seed a node on each.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!set(skel, r, c) || visited[id(r, c)] || node_of[id(r, c)] >= 0) continue;
      const int n = static_cast<int>(g.nodes.size());
      g.nodes.push_back(GraphNode{{{r, c}}, 0, 0, 0});
      node_of[id(r, c)] = n;
      trace_from(n);
    }
  }
  g.node_alive.assign(g.nodes.size(), true);
  return g;
}

void recompute_degrees(RawGraph& g) {
  for (auto& n : g.nodes) n.degree = 0;
  for (const auto& e : g.edges) {
    if (!e.alive) continue;
    ++g.nodes[e.a].degree;
    ++g.nodes[e.b].degree;
  }
}

std::vector<Pixel> reversed(std::vector<Pixel> path) {
  std::reverse(path.begin(), path.end());
  return path;
}

// Extent of a node's material beyond its skeleton pixels.
double blob_radius(const GraphNode& node, const Eigen::MatrixXd& half_width) {
  double r = 0.0;
  for (const auto& p : node.pixels) r = std::max(r, half_width(p.row, p.col) - 0.5);
  return r;
}

// Short bars are measured from the boundary of the junction blob they leave.
void simplify(RawGraph& g, double spur_length, const Eigen::MatrixXd& half_width) {
  bool changed = true;
  while (changed) {
    changed = false;
    recompute_degrees(g);

    // Spurs and short isolated fragments.
    for (auto& e : g.edges) {
      if (!e.alive) continue;
      const int da = g.nodes[e.a].degree;
      const int db = g.nodes[e.b].degree;
      const double limit =
          spur_length + (da >= 3 ? blob_radius(g.nodes[e.a], half_width) : 0.0) +
          (db >= 3 ? blob_radius(g.nodes[e.b], half_width) : 0.0);
      if (e.length >= limit) continue;
      if (e.a == e.b) {
        e.alive = false;
        changed = true;
      } else if (da == 1 && db == 1) {
        e.alive = false;
        g.node_alive[e.a] = g.node_alive[e.b] = false;
        changed = true;
      } else if (da == 1 && db >= 3) {
        e.alive = false;
        g.node_alive[e.a] = false;
        g.absorb(e.b, e.path);
        g.absorb_node(e.b, e.a);
        changed = true;
      } else if (db == 1 && da >= 3) {
        e.alive = false;
        g.node_alive[e.b] = false;
        g.absorb(e.a, e.path);
        g.absorb_node(e.a, e.b);
        changed = true;
      }
      if (changed) break;
    }
    if (changed) continue;

    // Contract short links between junctions.
    for (auto& e : g.edges) {
      if (!e.alive || e.a == e.b) continue;
      if (g.nodes[e.a].degree < 3 || g.nodes[e.b].degree < 3) continue;
      const double limit = spur_length + std::max(blob_radius(g.nodes[e.a], half_width),
                                                   blob_radius(g.nodes[e.b], half_width));
      if (e.length >= limit) continue;
      const int keep = e.a;
      const int drop = e.b;
      e.alive = false;
      auto& kp = g.nodes[keep].pixels;
      const auto& dp = g.nodes[drop].pixels;
      kp.insert(kp.end(), dp.begin(), dp.end());
      g.absorb(keep, e.path);
      g.absorb_node(keep, drop);
      g.node_alive[drop] = false;
      for (auto& other : g.edges) {
        if (!other.alive) continue;
        if (other.a == drop) other.a = keep;
        if (other.b == drop) other.b = keep;
      }
      changed = true;
      break;
    }
    if (changed) continue;

    // Merge the two bars meeting at a degree-2 node.
    for (std::size_t n = 0; n < g.nodes.size(); ++n) {
      if (!g.node_alive[n] || g.nodes[n].degree != 2) continue;
      std::vector<int> incident;
      for (std::size_t k = 0; k < g.edges.size(); ++k) {
        const auto& e = g.edges[k];
        if (e.alive && (e.a == static_cast<int>(n) || e.b == static_cast<int>(n))) incident.push_back(static_cast<int>(k));
      }
      if (incident.size() != 2) continue;  // a single closed loop
      Edge& e1 = g.edges[incident[0]];
      Edge& e2 = g.edges[incident[1]];
      // Orient e1 as (x -> n) and e2 as (n -> y).
      std::vector<Pixel> p1 = e1.b == static_cast<int>(n) ? e1.path : reversed(e1.path);
      const int x = e1.b == static_cast<int>(n) ? e1.a : e1.b;
      std::vector<Pixel> p2 = e2.a == static_cast<int>(n) ? e2.path : reversed(e2.path);
      const int y = e2.a == static_cast<int>(n) ? e2.b : e2.a;
      // A sharp turn is a frame corner and stays a joint.
      if (p1.size() > 1 && p2.size() > 1) {
        const double l1 = polyline_length(p1);
        const double l2 = polyline_length(p2);
        const double reach = std::min({2.0 * spur_length, 0.5 * l1, 0.5 * l2});
        const auto v = point_along(p2, 0.0);
        if (turn_degrees(point_along(p1, l1 - reach), v, point_along(p2, reach)) > kCornerDegrees) continue;
      }
      std::vector<Contact> contacts;
      const bool flip1 = e1.b != static_cast<int>(n);
      const bool flip2 = e2.a != static_cast<int>(n);
      const std::size_t joint = p1.size() - 1;
      for (const auto& c : e1.contacts) contacts.push_back({flip1 ? joint - c.at : c.at, c.pixel});
      if (auto it = g.absorbed.find(static_cast<int>(n)); it != g.absorbed.end()) {
        for (const auto& px : it->second) contacts.push_back({joint, px});
        g.absorbed.erase(it);
      }
      // Bridge through the node's pixels if the paths touch different ones.
      const bool shared = !p1.empty() && !p2.empty() && p1.back() == p2.front();
      const std::size_t offset = shared ? joint : joint + 1;
      for (const auto& c : e2.contacts) {
        contacts.push_back({offset + (flip2 ? e2.path.size() - 1 - c.at : c.at), c.pixel});
      }
      if (shared) p2.erase(p2.begin());
      p1.insert(p1.end(), p2.begin(), p2.end());
      e1.a = x;
      e1.b = y;
      e1.path = std::move(p1);
      e1.length = polyline_length(e1.path);
      e1.contacts = std::move(contacts);
      e2.alive = false;
      g.node_alive[n] = false;
      changed = true;
      break;
    }
  }
  recompute_degrees(g);
}

// Splits bars at sharp turns along their polylines, so that frame corners and
// closed polygons count one bar per side.
void split_corners(RawGraph& g, double spur_length) {
  const double scale = 2.0 * spur_length;
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    if (!g.edges[k].alive) continue;
    const std::vector<Pixel> path = g.edges[k].path;
    std::vector<double> arc(path.size(), 0.0);
    for (std::size_t q = 1; q < path.size(); ++q) arc[q] = arc[q - 1] + step_length(path[q - 1], path[q]);
    const double total = arc.back();
    std::size_t best = 0;
    double best_turn = kCornerDegrees;
    for (std::size_t q = 1; q + 1 < path.size(); ++q) {
      if (arc[q] < scale || total - arc[q] < scale) continue;
      const double turn = turn_degrees(point_along(path, arc[q] - scale),
                                       {static_cast<double>(path[q].row), static_cast<double>(path[q].col)},
                                       point_along(path, arc[q] + scale));
      if (turn > best_turn) {
        best_turn = turn;
        best = q;
      }
    }
    if (best == 0) continue;
    GraphNode corner;
    corner.pixels = {path[best]};
    const int n = static_cast<int>(g.nodes.size());
    g.nodes.push_back(std::move(corner));
    g.node_alive.push_back(true);
    Edge tail{n, g.edges[k].b, {path.begin() + static_cast<long>(best), path.end()}, total - arc[best], true, {}};
    Edge& head = g.edges[k];
    partition_contacts(g, head, tail, best, n);
    head.path.resize(best + 1);
    head.b = n;
    head.length = arc[best];
    g.edges.push_back(std::move(tail));
    --k;  // rescan the head
  }
  recompute_degrees(g);
}

}  // namespace

std::pair<double, double> pixel_to_node(const Scenario& scenario, int rows, int cols, int r, int c) {
  return {(r + 0.5) * scenario.ny / rows, (c + 0.5) * scenario.nx / cols};
}

BarGraph extract_bar_graph(const Field& design, const Scenario& scenario, const BarGraphOptions& options) {
  if (design.size() == 0) throw ParameterError("empty design image");
  const int rows = static_cast<int>(design.rows());
  const int cols = static_cast<int>(design.cols());
  Mask mask(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) mask(r, c) = design(r, c) >= options.threshold ? 1 : 0;
  }

  BarGraph out;
  if ((mask.array() == 0).all()) {
    out.empty = true;
    return out;
  }

  Mask skel = thin(mask);
  remove_staircases(skel);
  RawGraph raw = trace_skeleton(skel, options.junction_radius);
  const Eigen::MatrixXd half_width = distance_to_background(mask);
  simplify(raw, options.spur_length, half_width);
  split_corners(raw, options.spur_length);
  simplify(raw, options.spur_length, half_width);

  const double sy = static_cast<double>(rows) / scenario.ny;
  const double sx = static_cast<double>(cols) / scenario.nx;
  // Thinning and spur pruning pull a free end back from the end of its
  // material; the tip is found by extending the bar direction until it leaves
  // the material.
  std::vector<std::optional<std::pair<double, double>>> tips(raw.nodes.size());
  for (const auto& e : raw.edges) {
    if (!e.alive || e.path.size() < 2) continue;
    for (const bool at_start : {true, false}) {
      const int n = at_start ? e.a : e.b;
      if (raw.nodes[n].degree != 1) continue;
      const std::vector<Pixel> outward = at_start ? e.path : reversed(e.path);
      const Pixel& end = outward.front();
      const auto inner = point_along(outward, std::min(e.length, 2.0 * options.spur_length));
      double dr = end.row - inner.first;
      double dc = end.col - inner.second;
      const double norm = std::hypot(dr, dc);
      if (norm == 0.0) continue;
      dr /= norm;
      dc /= norm;
      std::pair<double, double> tip{end.row, end.col};
      for (double t = 0.5;; t += 0.5) {
        const int r = static_cast<int>(std::lround(end.row + t * dr));
        const int c = static_cast<int>(std::lround(end.col + t * dc));
        if (r < 0 || r >= rows || c < 0 || c >= cols || !mask(r, c)) break;
        tip = {end.row + t * dr, end.col + t * dc};
      }
      tips[n] = tip;
    }
  }

  auto attached_node = [&](std::size_t n, const NodeCoord& target) {
    const double tr = target.i * sy - 0.5;
    const double tc = target.j * sx - 0.5;
    auto near = [&](const Pixel& p) {
      const double reach = options.attach_radius + std::max(0.0, half_width(p.row, p.col) - 0.5);
      return std::hypot(p.row - tr, p.col - tc) <= reach;
    };
    if (std::any_of(raw.nodes[n].pixels.begin(), raw.nodes[n].pixels.end(), near)) return true;
    if (auto it = raw.absorbed.find(static_cast<int>(n));
        it != raw.absorbed.end() && std::any_of(it->second.begin(), it->second.end(), near)) {
      return true;
    }
    return n < tips.size() && tips[n] && std::hypot(tips[n]->first - tr, tips[n]->second - tc) <= options.attach_radius;
  };

  // Loads and supports met along a bar are joints, so the bar is split there.
  // A contact closer than spur_length (along the bar) to an existing end is
  // credited to that end instead.
  std::vector<char> load_joint(raw.nodes.size(), 0);
  std::vector<char> fixed_joint(raw.nodes.size(), 0);
  auto reach_at = [&](const Pixel& p) {
    return options.attach_radius + std::max(0.0, half_width(p.row, p.col) - 0.5);
  };
  // Splits edge k at path index q; returns the new node, or the nearer end
  // when either piece would be shorter than spur_length.
  auto split = [&](std::size_t k, std::size_t q) {
    Edge& e = raw.edges[k];
    const double before = polyline_length({e.path.begin(), e.path.begin() + static_cast<long>(q) + 1});
    const double after = e.length - before;
    if (before < options.spur_length + blob_radius(raw.nodes[e.a], half_width) ||
        after < options.spur_length + blob_radius(raw.nodes[e.b], half_width)) {
      return before <= after ? e.a : e.b;
    }
    GraphNode joint;
    joint.pixels = {e.path[q]};
    joint.degree = 2;
    const int n = static_cast<int>(raw.nodes.size());
    raw.nodes.push_back(std::move(joint));
    raw.node_alive.push_back(true);
    load_joint.push_back(0);
    fixed_joint.push_back(0);
    Edge tail{n, e.b, {e.path.begin() + static_cast<long>(q), e.path.end()}, after, true, {}};
    partition_contacts(raw, e, tail, q, n);
    e.path.resize(q + 1);
    e.b = n;
    e.length = before;
    raw.edges.push_back(std::move(tail));
    return n;
  };

  if (!scenario.fixed_nodes.empty()) {
    auto fixed_distance = [&](const Pixel& p) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& f : scenario.fixed_nodes) {
        best = std::min(best, std::hypot(p.row - (f.i * sy - 0.5), p.col - (f.j * sx - 0.5)));
      }
      return best;
    };
    auto on_support = [&](int n) {
      if (fixed_joint[n]) return true;
      for (const auto& f : scenario.fixed_nodes) {
        if (attached_node(static_cast<std::size_t>(n), f)) return true;
      }
      return false;
    };
    // Interior runs of support-attached pixels. Runs reaching a bar end, or
    // lying within a short gap of an end already on the support, belong to
    // that end's node.
    for (std::size_t k = 0; k < raw.edges.size(); ++k) {
      if (!raw.edges[k].alive) continue;
      const std::vector<Pixel> path = raw.edges[k].path;
      std::vector<double> arc(path.size(), 0.0);
      for (std::size_t q = 1; q < path.size(); ++q) arc[q] = arc[q - 1] + step_length(path[q - 1], path[q]);
      const double gap = 2.0 * options.spur_length;
      const bool a_on = on_support(raw.edges[k].a);
      const bool b_on = on_support(raw.edges[k].b);
      std::vector<double> dist(path.size());
      std::vector<char> on(path.size());
      for (std::size_t q = 0; q < path.size(); ++q) {
        dist[q] = fixed_distance(path[q]);
        on[q] = dist[q] <= reach_at(path[q]) ? 1 : 0;
      }
      for (const auto& c : raw.edges[k].contacts) {
        const double d = fixed_distance(c.pixel);
        if (d > reach_at(c.pixel)) continue;
        on[c.at] = 1;
        dist[c.at] = std::min(dist[c.at], d);
      }
      // Close gaps shorter than spur_length between contact runs.
      for (std::size_t t = 1, last_on = on[0] ? 0 : path.size(); t < path.size(); ++t) {
        if (!on[t]) continue;
        if (last_on < t - 1 && arc[t] - arc[last_on] < options.spur_length) {
          std::fill(on.begin() + static_cast<long>(last_on), on.begin() + static_cast<long>(t), 1);
        }
        last_on = t;
      }
      std::size_t q = 0;
      bool did_split = false;
      while (q < path.size() && !did_split) {
        if (!on[q]) {
          ++q;
          continue;
        }
        std::size_t end = q;
        while (end + 1 < path.size() && on[end + 1]) ++end;
        const bool interior = q > 0 && end + 1 < path.size();
        const bool near_a = a_on && arc[q] <= gap;
        const bool near_b = b_on && arc.back() - arc[end] <= gap;
        if (interior && !near_a && !near_b) {
          std::size_t best = q;
          for (std::size_t t = q; t <= end; ++t) {
            if (dist[t] < dist[best]) best = t;
          }
          const std::size_t edges_before = raw.edges.size();
          fixed_joint[split(k, best)] = 1;
          // The appended tail is scanned later for further contacts.
          did_split = raw.edges.size() != edges_before;
        }
        q = end + 1;
      }
    }
  }

  out.load_attached.assign(scenario.loads.size(), false);
  for (std::size_t li = 0; li < scenario.loads.size(); ++li) {
    const Load& l = scenario.loads[li];
    bool at_node = false;
    for (std::size_t n = 0; n < raw.nodes.size() && !at_node; ++n) {
      if (raw.node_alive[n] && raw.nodes[n].degree > 0 && attached_node(n, l.node)) {
        load_joint[n] = 1;
        at_node = true;
      }
    }
    out.load_attached[li] = at_node;
    if (at_node) continue;
    const double tr = l.node.i * sy - 0.5;
    const double tc = l.node.j * sx - 0.5;
    int best_edge = -1;
    std::size_t best_q = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < raw.edges.size(); ++k) {
      const auto& e = raw.edges[k];
      if (!e.alive) continue;
      auto consider = [&](std::size_t q, const Pixel& p) {
        const double d = std::hypot(p.row - tr, p.col - tc);
        if (d <= reach_at(p) && d < best_d) {
          best_d = d;
          best_edge = static_cast<int>(k);
          best_q = q;
        }
      };
      for (std::size_t q = 0; q < e.path.size(); ++q) consider(q, e.path[q]);
      for (const auto& c : e.contacts) consider(c.at, c.pixel);
    }
    if (best_edge >= 0) {
      load_joint[split(static_cast<std::size_t>(best_edge), best_q)] = 1;
      out.load_attached[li] = true;
    }
  }

  std::vector<int> remap(raw.nodes.size(), -1);
  for (std::size_t n = 0; n < raw.nodes.size(); ++n) {
    if (!raw.node_alive[n] || raw.nodes[n].degree == 0) continue;
    GraphNode node = raw.nodes[n];
    double sr = 0.0;
    double sc = 0.0;
    for (const auto& p : node.pixels) {
      sr += p.row;
      sc += p.col;
    }
    node.row = sr / static_cast<double>(node.pixels.size());
    node.col = sc / static_cast<double>(node.pixels.size());
    remap[n] = static_cast<int>(out.nodes.size());
    out.nodes.push_back(std::move(node));
  }

  std::vector<char> near_load(raw.nodes.size(), 0);
  std::vector<char> near_fixed(raw.nodes.size(), 0);
  for (std::size_t n = 0; n < raw.nodes.size(); ++n) {
    if (remap[n] < 0) continue;
    near_load[n] = load_joint[n];
    near_fixed[n] = fixed_joint[n];
    for (const auto& l : scenario.loads) near_load[n] |= attached_node(n, l.node) ? 1 : 0;
    for (const auto& f : scenario.fixed_nodes) {
      if (near_fixed[n]) break;
      near_fixed[n] = attached_node(n, f) ? 1 : 0;
    }
    out.support_attached = out.support_attached || near_fixed[n];
  }

  for (const auto& e : raw.edges) {
    if (!e.alive) continue;
    Bar bar;
    bar.from = remap[e.a];
    bar.to = remap[e.b];
    bar.polyline = e.path;
    bar.length = e.length;
    if (near_load[e.a] || near_load[e.b]) {
      bar.type = BarType::kLoaded;
      ++out.loaded;
    } else if (near_fixed[e.a] || near_fixed[e.b]) {
      bar.type = BarType::kClamped;
      ++out.clamped;
    } else {
      bar.type = BarType::kInternal;
      ++out.internal;
    }
    out.bars.push_back(std::move(bar));
  }
  return out;
}

}  // namespace topoforge
