#include "topoforge/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "topoforge/errors.hpp"

namespace topoforge {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "validation") return Split::kValidation;
  if (text == "test") return Split::kTest;
  throw ParameterError("unknown split '" + std::string(text) + "' (train|validation|test)");
}

void Scenario::validate() const {
  if (nx < 1 || ny < 1) throw ValidationError("scenario grid must be at least 1x1");
  if (fixed_nodes.empty()) throw ValidationError("scenario has no fixed nodes");
  std::set<NodeCoord> fixed;
  for (const auto& n : fixed_nodes) {
    if (n.i < 0 || n.i > ny || n.j < 0 || n.j > nx) {
      throw ValidationError("fixed node (" + std::to_string(n.i) + "," + std::to_string(n.j) +
                            ") lies outside the node grid");
    }
    fixed.insert(n);
  }
  for (const auto& load : loads) {
    const auto& n = load.node;
    if (n.i < 0 || n.i > ny || n.j < 0 || n.j > nx) {
      throw ValidationError("loaded node (" + std::to_string(n.i) + "," + std::to_string(n.j) +
                            ") lies outside the node grid");
    }
    if (fixed.contains(n)) {
      throw ValidationError("load applied on fixed node (" + std::to_string(n.i) + "," +
                            std::to_string(n.j) + ")");
    }
    if (!std::isfinite(load.theta_deg) || !std::isfinite(load.magnitude)) {
      throw ValidationError("load angle/magnitude must be finite");
    }
  }
  if (!(volfrac > 0.0 && volfrac <= 1.0)) {
    throw ValidationError("volume fraction must lie in (0, 1], got " + std::to_string(volfrac));
  }
  if (volfrac_field && (volfrac_field->rows() != ny + 1 || volfrac_field->cols() != nx + 1)) {
    throw ValidationError("volume-fraction field must be (ny+1) x (nx+1)");
  }
  if (complexity < 1) throw ValidationError("complexity bound must be >= 1");
}

bool Scenario::operator==(const Scenario& other) const {
  if (volfrac_field.has_value() != other.volfrac_field.has_value()) return false;
  if (volfrac_field && (volfrac_field->rows() != other.volfrac_field->rows() ||
                        volfrac_field->cols() != other.volfrac_field->cols() ||
                        *volfrac_field != *other.volfrac_field)) {
    return false;
  }
  return nx == other.nx && ny == other.ny && fixed_nodes == other.fixed_nodes &&
         loads == other.loads && volfrac == other.volfrac && complexity == other.complexity &&
         split == other.split && seed == other.seed;
}

void to_json(nlohmann::json& out, const Scenario& s) {
  out = nlohmann::json::object();
  out["nx"] = s.nx;
  out["ny"] = s.ny;
  auto fixed = nlohmann::json::array();
  for (const auto& n : s.fixed_nodes) fixed.push_back({n.i, n.j});
  out["fixed_nodes"] = std::move(fixed);
  auto loads = nlohmann::json::array();
  for (const auto& l : s.loads) {
    loads.push_back({{"i", l.node.i}, {"j", l.node.j}, {"theta_deg", l.theta_deg}, {"mag", l.magnitude}});
  }
  out["loads"] = std::move(loads);
  if (s.volfrac_field) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < s.volfrac_field->rows(); ++r) {
      auto row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < s.volfrac_field->cols(); ++c) row.push_back((*s.volfrac_field)(r, c));
      rows.push_back(std::move(row));
    }
    out["volfrac_field"] = std::move(rows);
  } else {
    out["volfrac"] = s.volfrac;
  }
  out["complexity"] = s.complexity;
  out["split"] = std::string(to_string(s.split));
  out["seed"] = s.seed;
}

void from_json(const nlohmann::json& in, Scenario& s) {
  try {
    s = Scenario{};
    s.nx = in.at("nx").get<int>();
    s.ny = in.at("ny").get<int>();
    for (const auto& n : in.at("fixed_nodes")) s.fixed_nodes.push_back({n.at(0).get<int>(), n.at(1).get<int>()});
    if (in.contains("loads")) {
      for (const auto& l : in.at("loads")) {
        s.loads.push_back({{l.at("i").get<int>(), l.at("j").get<int>()},
                           l.at("theta_deg").get<double>(),
                           l.value("mag", 1.0)});
      }
    }
    if (in.contains("volfrac_field")) {
      const auto& rows = in.at("volfrac_field");
      const auto nrows = static_cast<Eigen::Index>(rows.size());
      const auto ncols = nrows > 0 ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
      Field field(nrows, ncols);
      for (Eigen::Index r = 0; r < nrows; ++r) {
        if (static_cast<Eigen::Index>(rows.at(r).size()) != ncols) {
          throw ValidationError("volfrac_field rows have unequal length");
        }
        for (Eigen::Index c = 0; c < ncols; ++c) field(r, c) = rows.at(r).at(c).get<double>();
      }
      s.volfrac = nrows * ncols > 0 ? field.mean() : 0.0;
      s.volfrac_field = std::move(field);
    } else {
      s.volfrac = in.at("volfrac").get<double>();
    }
    s.complexity = in.value("complexity", 1);
    s.split = parse_split(in.value("split", std::string("train")));
    s.seed = in.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed scenario JSON: ") + e.what());
  }
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("scenario file " + path + " is not valid JSON: " + e.what());
  }
  Scenario s = j.get<Scenario>();
  s.validate();
  return s;
}

void save_scenario_file(const Scenario& scenario, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write scenario file " + path);
  out << nlohmann::json(scenario).dump(2) << '\n';
}

namespace {

enum Edge { kTop = 0, kBottom = 1, kLeft = 2, kRight = 3 };

Edge opposite(Edge e) {
  switch (e) {
    case kTop:
      return kBottom;
    case kBottom:
      return kTop;
    case kLeft:
      return kRight;
    case kRight:
      return kLeft;
  }
  return kTop;
}

int edge_length(Edge e, const DesignDomain& d) { return (e == kTop || e == kBottom) ? d.nx + 1 : d.ny + 1; }

NodeCoord edge_node(Edge e, int k, const DesignDomain& d) {
  switch (e) {
    case kTop:
      return {0, k};
    case kBottom:
      return {d.ny, k};
    case kLeft:
      return {k, 0};
    case kRight:
      return {k, d.nx};
  }
  return {0, 0};
}

// Draws `count` distinct indices from [0, n) by a partial Fisher-Yates shuffle.
std::vector<int> draw_distinct(std::mt19937_64& rng, int n, int count) {
  std::vector<int> pool(n);
  for (int k = 0; k < n; ++k) pool[k] = k;
  for (int k = 0; k < count; ++k) {
    std::uniform_int_distribution<int> pick(k, n - 1);
    std::swap(pool[k], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

Scenario sample_scenario(std::uint64_t seed, Split split, const DesignDomain& domain,
                         const SamplerConfig& config) {
  if (split == Split::kTest && (domain.nx < 2 || domain.ny < 2)) {
    throw ParameterError("test split needs interior nodes (nx, ny >= 2)");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(split)};
  std::mt19937_64 rng(seq);

  Scenario s;
  s.nx = domain.nx;
  s.ny = domain.ny;
  s.split = split;
  s.seed = seed;
  s.complexity = 1;

  std::normal_distribution<double> volfrac_dist(config.volfrac_mean, config.volfrac_std);
  do {
    s.volfrac = volfrac_dist(rng);
  } while (s.volfrac < config.volfrac_min || s.volfrac > config.volfrac_max);

  const auto fixed_edge = static_cast<Edge>(std::uniform_int_distribution<int>(0, 3)(rng));
  const int fixed_len = edge_length(fixed_edge, domain);
  std::poisson_distribution<int> fixed_dist(config.fixed_rate);
  const int fixed_count = std::clamp(fixed_dist(rng), std::min(config.min_fixed, fixed_len), fixed_len);
  const int offset = std::uniform_int_distribution<int>(0, fixed_len - fixed_count)(rng);
  for (int k = 0; k < fixed_count; ++k) s.fixed_nodes.push_back(edge_node(fixed_edge, offset + k, domain));
  std::sort(s.fixed_nodes.begin(), s.fixed_nodes.end());

  std::vector<NodeCoord> candidates;
  if (split == Split::kTest) {
    for (int i = 1; i < domain.ny; ++i) {
      for (int j = 1; j < domain.nx; ++j) candidates.push_back({i, j});
    }
  } else {
    const Edge load_edge = opposite(fixed_edge);
    for (int k = 0; k < edge_length(load_edge, domain); ++k) candidates.push_back(edge_node(load_edge, k, domain));
  }
  std::poisson_distribution<int> load_dist(config.load_rate);
  int load_count = 0;
  do {
    load_count = load_dist(rng);
  } while (load_count < 1);
  load_count = std::min(load_count, static_cast<int>(candidates.size()));

  const auto picks = draw_distinct(rng, static_cast<int>(candidates.size()), load_count);
  std::uniform_real_distribution<double> angle_dist(0.0, 360.0);
  for (int k : picks) s.loads.push_back({candidates[k], angle_dist(rng), 1.0});
  std::sort(s.loads.begin(), s.loads.end(), [](const Load& a, const Load& b) { return a.node < b.node; });
  return s;
}

Field resample_bilinear(const Field& source, int rows, int cols) {
  if (source.size() == 0 || rows < 1 || cols < 1) throw ParameterError("cannot resample an empty field");
  Field out(rows, cols);
  const auto src_rows = source.rows();
  const auto src_cols = source.cols();
  const double sy = rows > 1 ? static_cast<double>(src_rows - 1) / (rows - 1) : 0.0;
  const double sx = cols > 1 ? static_cast<double>(src_cols - 1) / (cols - 1) : 0.0;
  for (int r = 0; r < rows; ++r) {
    const double y = r * sy;
    const auto y0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(y), src_rows - 1);
    const auto y1 = std::min<Eigen::Index>(y0 + 1, src_rows - 1);
    const double ty = y - static_cast<double>(y0);
    for (int c = 0; c < cols; ++c) {
      const double x = c * sx;
      const auto x0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(x), src_cols - 1);
      const auto x1 = std::min<Eigen::Index>(x0 + 1, src_cols - 1);
      const double tx = x - static_cast<double>(x0);
      const double top = (1.0 - tx) * source(y0, x0) + tx * source(y0, x1);
      const double bottom = (1.0 - tx) * source(y1, x0) + tx * source(y1, x1);
      out(r, c) = (1.0 - ty) * top + ty * bottom;
    }
  }
  return out;
}

namespace {

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

ConditionTensor encode_condition_tensor(const Scenario& scenario, const DesignDomain& domain) {
  if (scenario.nx != domain.nx || scenario.ny != domain.ny) {
    throw ParameterError("scenario grid does not match the design domain");
  }
  scenario.validate();
  const int rows = domain.ny + 1;
  const int cols = domain.nx + 1;
  ConditionTensor t;
  t.bc_x = Field::Zero(rows, cols);
  t.bc_y = Field::Zero(rows, cols);
  t.f_x = Field::Zero(rows, cols);
  t.f_y = Field::Zero(rows, cols);
  for (const auto& n : scenario.fixed_nodes) {
    t.bc_x(n.i, n.j) = 1.0;
    t.bc_y(n.i, n.j) = 1.0;
  }
  for (const auto& l : scenario.loads) {
    const double a = deg_to_rad(l.theta_deg);
    t.f_x(l.node.i, l.node.j) += l.magnitude * std::cos(a);
    t.f_y(l.node.i, l.node.j) += l.magnitude * std::sin(a);
  }
  t.vf = scenario.volfrac_field ? *scenario.volfrac_field : Field::Constant(rows, cols, scenario.volfrac);
  t.cx = Field::Constant(rows, cols, static_cast<double>(scenario.complexity));
  return t;
}

ConditionTensor encode_condition_tensor(const Scenario& scenario, const DesignDomain& domain,
                                        const Field& design) {
  ConditionTensor t = encode_condition_tensor(scenario, domain);
  if (design.rows() == domain.ny + 1 && design.cols() == domain.nx + 1) {
    t.design = design;
  } else if (design.rows() == domain.ny && design.cols() == domain.nx) {
    t.design = resample_bilinear(design, domain.ny + 1, domain.nx + 1);
  } else {
    throw ParameterError("design is " + std::to_string(design.rows()) + "x" + std::to_string(design.cols()) +
                         ", expected element grid or node grid of the domain");
  }
  return t;
}

Scenario decode_condition_tensor(const ConditionTensor& t, Split split, std::uint64_t seed) {
  Scenario s;
  s.ny = t.rows() - 1;
  s.nx = t.cols() - 1;
  s.split = split;
  s.seed = seed;
  for (int i = 0; i < t.rows(); ++i) {
    for (int j = 0; j < t.cols(); ++j) {
      if (t.bc_x(i, j) != 0.0 || t.bc_y(i, j) != 0.0) s.fixed_nodes.push_back({i, j});
      const double fx = t.f_x(i, j);
      const double fy = t.f_y(i, j);
      if (fx != 0.0 || fy != 0.0) {
        double theta = std::atan2(fy, fx) * 180.0 / std::numbers::pi;
        if (theta < 0.0) theta += 360.0;
        s.loads.push_back({{i, j}, theta, std::hypot(fx, fy)});
      }
    }
  }
  const bool uniform = (t.vf.array() == t.vf(0, 0)).all();
  if (uniform) {
    s.volfrac = t.vf(0, 0);
  } else {
    s.volfrac_field = t.vf;
    s.volfrac = t.vf.mean();
  }
  s.complexity = static_cast<int>(std::lround(t.cx(0, 0)));
  return s;
}

LoadCase scenario_to_system(const Scenario& scenario, const DesignDomain& domain) {
  if (scenario.nx != domain.nx || scenario.ny != domain.ny) {
    throw ParameterError("scenario grid does not match the design domain");
  }
  scenario.validate();
  LoadCase lc;
  lc.load = Eigen::VectorXd::Zero(domain.dof_count());
  for (const auto& n : scenario.fixed_nodes) {
    const int node = domain.node_index(n.i, n.j);
    lc.fixed_dofs.push_back(2 * node);
    lc.fixed_dofs.push_back(2 * node + 1);
  }
  std::sort(lc.fixed_dofs.begin(), lc.fixed_dofs.end());
  lc.fixed_dofs.erase(std::unique(lc.fixed_dofs.begin(), lc.fixed_dofs.end()), lc.fixed_dofs.end());
  for (const auto& l : scenario.loads) {
    const int node = domain.node_index(l.node.i, l.node.j);
    const double a = deg_to_rad(l.theta_deg);
    lc.load[2 * node] += l.magnitude * std::cos(a);
    lc.load[2 * node + 1] += l.magnitude * std::sin(a);
  }
  return lc;
}

Scenario cantilever_scenario(int nx, int ny, double volfrac) {
  Scenario s;
  s.nx = nx;
  s.ny = ny;
  for (int i = 0; i <= ny; ++i) s.fixed_nodes.push_back({i, 0});
  s.loads.push_back({{ny / 2, nx}, 90.0, 1.0});
  s.volfrac = volfrac;
  s.validate();
  return s;
}

}  // namespace topoforge
