#include "topoforge/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "topoforge/analysis.hpp"
#include "topoforge/dataset.hpp"
#include "topoforge/errors.hpp"
#include "topoforge/metrics.hpp"
#include "topoforge/parallel.hpp"
#include "topoforge/report.hpp"
#include "topoforge/scenario.hpp"
#include "topoforge/simp.hpp"
#include "topoforge/tpfg.hpp"

namespace topoforge {

namespace fs = std::filesystem;

namespace {

// Error raised for bad flags; printed together with the subcommand usage.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int default_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::array<double, 3> parse_disk(const std::string& text) {
  std::array<double, 3> v{};
  std::stringstream ss(text);
  std::string part;
  int k = 0;
  while (std::getline(ss, part, ',')) {
    if (k >= 3) throw UsageError("disk '" + text + "' needs exactly x,y,r");
    try {
      v[k++] = std::stod(part);
    } catch (const std::exception&) {
      throw UsageError("disk '" + text + "' is not numeric");
    }
  }
  if (k != 3) throw UsageError("disk '" + text + "' needs exactly x,y,r");
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

Scenario read_scenario(const fs::path& path) {
  try {
    return load_scenario_file(path.string());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- optimize

struct OptimizeFlags {
  std::string scenario;
  std::string preset;
  std::optional<int> nx, ny;
  std::optional<double> volfrac;
  SimpConfig simp;
  std::vector<std::string> passive_disks, active_disks;
  std::string out;
  std::string trace;
};

int cmd_optimize(OptimizeFlags& f, std::ostream& out) {
  Scenario scenario;
  if (!f.scenario.empty() && !f.preset.empty()) throw UsageError("give either --scenario or --preset, not both");
  if (!f.scenario.empty()) {
    scenario = read_scenario(f.scenario);
    if ((f.nx && *f.nx != scenario.nx) || (f.ny && *f.ny != scenario.ny)) {
      throw ValidationError("--nx/--ny disagree with the scenario grid " + std::to_string(scenario.nx) + "x" +
                            std::to_string(scenario.ny));
    }
    if (f.volfrac) {
      scenario.volfrac = *f.volfrac;
      scenario.volfrac_field.reset();
    }
  } else if (f.preset == "cantilever") {
    scenario = cantilever_scenario(f.nx.value_or(100), f.ny.value_or(100), f.volfrac.value_or(0.3));
  } else if (!f.preset.empty()) {
    throw UsageError("unknown preset '" + f.preset + "'");
  } else {
    throw UsageError("a scenario is required (--scenario FILE or --preset cantilever)");
  }
  scenario.validate();
  f.simp.volfrac = scenario.volfrac;
  f.simp.validate();

  const DesignDomain domain = scenario.domain();
  // Bounds implied by a spatial volume-fraction field are merged in by optimize().
  DensityBounds bounds = DensityBounds::free(domain, f.simp.x_min);
  for (const auto& d : f.passive_disks) {
    const auto [x, y, r] = parse_disk(d);
    bounds.set_passive_disk(x, y, r, f.simp.x_min);
  }
  for (const auto& d : f.active_disks) {
    const auto [x, y, r] = parse_disk(d);
    bounds.set_active_disk(x, y, r);
  }

  const OptimizationTrace trace = optimize(domain, scenario, f.simp, bounds);

  const fs::path design_path = f.out;
  if (design_path.has_parent_path()) fs::create_directories(design_path.parent_path());
  write_design_file(design_path, trace.density);
  fs::path trace_path = f.trace;
  if (trace_path.empty()) trace_path = fs::path(f.out).replace_extension(".trace.csv");
  std::ostringstream csv;
  csv << std::setprecision(17) << "iter,compliance,volfrac,change\n";
  for (const auto& it : trace.iterations) {
    csv << it.iteration << ',' << it.compliance << ',' << it.volume << ',' << it.change << '\n';
  }
  write_text(trace_path, csv.str());

  out << "grid " << domain.nx << "x" << domain.ny << "  target volfrac " << scenario.volfrac << "\n"
      << "iterations " << trace.iteration_count << (trace.converged ? " (converged)" : " (iteration limit)") << "\n"
      << std::setprecision(10) << "compliance " << trace.final_compliance << "\n"
      << "volume " << trace.final_volume << "\n";
  if (!trace.volume_target_reached) out << "warning: volume target unreachable under the density bounds\n";
  if (trace.clamped_positive > 0) out << "warning: " << trace.clamped_positive << " positive sensitivities clamped\n";
  out << "design " << design_path.string() << "\ntrace " << trace_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- dataset

struct DatasetFlags {
  std::string split = "train";
  std::size_t n = 0;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out;
  int nx = 100;
  int ny = 100;
  int shard_size = 256;
  int max_attempts_factor = 50;
  bool quiet = false;
  bool no_screen = false;
};

int cmd_dataset(const DatasetFlags& f, std::ostream& out, std::ostream& err) {
  DatasetConfig config;
  config.domain = DesignDomain(f.nx, f.ny);
  config.shard_size = f.shard_size;
  config.max_attempts_factor = f.max_attempts_factor;
  config.require_truss_like = !f.no_screen;
  Split split;
  try {
    split = parse_split(f.split);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  GenerateOptions options;
  options.workers = f.workers;
  if (!f.quiet) options.log = [&err](const std::string& msg) { err << msg << '\n'; };
  const ShardManifest m = generate_split(f.out, split, f.n, f.seed, config, options);
  out << "split " << to_string(m.split) << ": " << m.record_count << " records in " << m.shards.size()
      << " shard(s)\n"
      << "seeds [" << m.base_seed << ", " << m.next_seed << ")\n"
      << "rejected " << m.rejected << ", acceptance rate " << std::setprecision(4) << m.acceptance_rate() << "\n";
  for (const auto& [reason, count] : m.rejection_reasons) out << "  " << reason << ": " << count << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- export

int cmd_export(const std::string& dataset, const std::string& out_dir, std::ostream& out) {
  const ShardManifest m = load_manifest(dataset);
  fs::create_directories(out_dir);
  for (std::size_t k = 0; k < m.record_count; ++k) {
    write_design_file(fs::path(out_dir) / (std::to_string(k) + ".tpfg"), read_record(m, k).design);
  }
  out << "exported " << m.record_count << " designs to " << out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateFlags {
  std::string candidates;
  std::string reference;
  std::string out;
  std::string format = "both";
  int threads = default_threads();
};

std::optional<std::size_t> parse_index(const std::string& stem) {
  if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  try {
    return static_cast<std::size_t>(std::stoull(stem));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

int cmd_evaluate(const EvaluateFlags& f, std::ostream& out) {
  if (f.format != "csv" && f.format != "json" && f.format != "both") {
    throw UsageError("--format must be csv, json or both");
  }
  const ShardManifest m = load_manifest(f.reference);

  // (id, index, design)
  struct Candidate {
    std::string id;
    std::optional<std::size_t> index;
    std::optional<Field> design;
  };
  std::vector<Candidate> candidates;
  if (fs::is_directory(f.candidates)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(f.candidates)) {
      if (e.is_regular_file() && e.path().extension() == ".tpfg") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
      Candidate c{p.filename().string(), parse_index(p.stem().string()), std::nullopt};
      if (c.index && *c.index < m.record_count) c.design = read_design_file(p);
      candidates.push_back(std::move(c));
    }
  } else if (fs::is_regular_file(f.candidates)) {
    const TpfgHeader h = read_tpfg_header(f.candidates);
    for (std::size_t k = 0; k < h.records; ++k) {
      Candidate c{std::to_string(k), k, std::nullopt};
      if (k < m.record_count) c.design = read_design_file(f.candidates, k);
      candidates.push_back(std::move(c));
    }
  } else {
    throw ValidationError("candidates path " + f.candidates + " does not exist");
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.index && b.index) return *a.index < *b.index;
    if (a.index != b.index) return a.index.has_value();
    return a.id < b.id;
  });

  std::vector<EvaluationSample> samples;
  std::vector<std::string> unpaired;
  for (auto& c : candidates) {
    if (!c.design) {
      unpaired.push_back(c.id);
      continue;
    }
    const SampleRecord ref = read_record(m, *c.index);
    samples.push_back({std::to_string(*c.index), ref.scenario, std::move(*c.design), ref.design});
  }
  if (samples.empty()) throw ValidationError("no candidate design pairs with a reference record");

  ReportOptions options;
  options.threads = effective_threads(f.threads);
  ConstraintReport report = constraint_report(samples, options);
  report.unpaired = unpaired;

  fs::create_directories(f.out);
  if (f.format != "json") write_text(fs::path(f.out) / "report.csv", report_csv(report));
  if (f.format != "csv") write_text(fs::path(f.out) / "report.json", report_json(report).dump(2) + "\n");

  out << "evaluated " << report.samples << " designs";
  if (!unpaired.empty()) out << " (" << unpaired.size() << " unpaired)";
  out << "\n" << report_csv(report);
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchFlags {
  std::size_t max_n = 100;
  int nx = 100;
  int ny = 100;
  std::uint64_t seed = 0;
  int threads = default_threads();
  std::string out;
};

double fe_compliance(const Scenario& s, const ElementMatrix& k0) {
  const DesignDomain domain = s.domain();
  const LoadCase lc = scenario_to_system(s, domain);
  const Field density = Field::Constant(domain.ny, domain.nx, s.volfrac);
  LinearSystem sys{assemble_global(domain, density, 3.0, k0), lc.load, lc.fixed_dofs};
  return compliance(solve_equilibrium(sys), lc.load);
}

int cmd_bench(const BenchFlags& f, std::ostream& out) {
  if (f.max_n < 1) throw UsageError("--max-n must be >= 1");
  const DesignDomain domain(f.nx, f.ny);
  const ElementMatrix k0 = element_stiffness(Material{});
  const int threads = effective_threads(f.threads);

  std::vector<int> modes{1};
  if (threads > 1) modes.push_back(threads);

  std::ostringstream csv;
  csv << "n,threads,fe_total_seconds,fe_per_design_seconds,mean_compliance\n";
  for (std::size_t n = 1; n <= f.max_n; n *= 10) {
    std::vector<Scenario> scenarios;
    for (std::size_t k = 0; k < n; ++k) scenarios.push_back(sample_scenario(f.seed + k, Split::kTrain, domain));
    for (int t : modes) {
      std::vector<double> c(n);
      const auto start = std::chrono::steady_clock::now();
      parallel_for(n, t, [&](std::size_t k) { c[k] = fe_compliance(scenarios[k], k0); });
      const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      double mean = 0.0;
      for (double v : c) mean += v / static_cast<double>(n);
      csv << n << ',' << t << ',' << std::setprecision(6) << total << ',' << total / static_cast<double>(n) << ','
          << std::setprecision(10) << mean << '\n';
    }
    if (n > f.max_n / 10) break;
  }
  csv << "# grid " << f.nx << "x" << f.ny << ", uniform density at the sampled volume fraction, p=3\n"
      << "# reference: traditional calculator 1.13 s/design (context only)\n";
  if (!f.out.empty()) write_text(f.out, csv.str());
  out << csv.str();
  return kExitOk;
}

// ---------------------------------------------------------------- count-bars

struct CountBarsFlags {
  std::string design;
  std::size_t index = 0;
  std::string scenario;
  std::string out;
  double threshold = 0.5;
};

int cmd_count_bars(const CountBarsFlags& f, std::ostream& out) {
  Field design;
  try {
    design = read_design_file(f.design, f.index);
  } catch (const std::out_of_range& e) {
    throw ValidationError(e.what());
  } catch (const CorruptionError& e) {
    throw ValidationError(e.what());
  }
  const Scenario scenario = read_scenario(f.scenario);
  scenario.validate();
  BarGraphOptions options;
  options.threshold = f.threshold;
  const BarGraph g = extract_bar_graph(design, scenario, options);

  out << "clamped " << g.clamped << "\nloaded " << g.loaded << "\ninternal " << g.internal << "\ntotal " << g.total()
      << "\n";
  if (!f.out.empty()) {
    nlohmann::json j;
    j["totals"] = {{"clamped", g.clamped}, {"loaded", g.loaded}, {"internal", g.internal}, {"total", g.total()}};
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : g.nodes) j["nodes"].push_back({{"row", n.row}, {"col", n.col}, {"degree", n.degree}});
    j["bars"] = nlohmann::json::array();
    for (const auto& b : g.bars) {
      auto poly = nlohmann::json::array();
      for (const auto& p : b.polyline) poly.push_back({p.row, p.col});
      j["bars"].push_back({{"type", std::string(to_string(b.type))},
                           {"from", b.from},
                           {"to", b.to},
                           {"length", b.length},
                           {"polyline", std::move(poly)}});
    }
    write_text(f.out, j.dump(2) + "\n");
  }
  return kExitOk;
}

// ---------------------------------------------------------------- losses

int cmd_losses(const std::string& batch, const std::string& out_path, std::ostream& out) {
  const nlohmann::json result = evaluate_loss_batch(read_json_file(batch));
  if (!out_path.empty()) write_text(out_path, result.dump(2) + "\n");
  out << result.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Topology optimization, dataset generation and design evaluation", "topoforge"};
  app.require_subcommand(1);

  OptimizeFlags opt;
  auto* optimize_cmd = app.add_subcommand("optimize", "Run SIMP on one scenario");
  optimize_cmd->add_option("--scenario", opt.scenario, "Scenario JSON file");
  optimize_cmd->add_option("--preset", opt.preset, "Built-in scenario (cantilever)");
  optimize_cmd->add_option("--nx", opt.nx, "Elements along x");
  optimize_cmd->add_option("--ny", opt.ny, "Elements along y");
  optimize_cmd->add_option("--volfrac", opt.volfrac, "Target volume fraction (overrides the scenario)");
  optimize_cmd->add_option("--penal", opt.simp.penal, "SIMP penalty")->capture_default_str();
  optimize_cmd->add_option("--rmin", opt.simp.rmin, "Filter radius")->capture_default_str();
  optimize_cmd->add_option("--move", opt.simp.move, "OC move limit")->capture_default_str();
  optimize_cmd->add_option("--max-iters", opt.simp.max_iters, "Iteration limit")->capture_default_str();
  optimize_cmd->add_option("--change-tol", opt.simp.change_tol, "Stop when max density change drops below")
      ->capture_default_str();
  optimize_cmd->add_option("--x-min", opt.simp.x_min, "Minimum density")->capture_default_str();
  optimize_cmd->add_option("--passive-disk", opt.passive_disks, "Void disk x,y,r in element units (repeatable)");
  optimize_cmd->add_option("--active-disk", opt.active_disks, "Solid disk x,y,r in element units (repeatable)");
  optimize_cmd->add_option("--out", opt.out, "Design file (.tpfg)")->required();
  optimize_cmd->add_option("--trace", opt.trace, "Trace CSV (default: <out>.trace.csv)");

  DatasetFlags ds;
  auto* dataset_cmd = app.add_subcommand("dataset", "Generate (or resume) a dataset split");
  dataset_cmd->add_option("--split", ds.split, "train | validation | test")->required();
  dataset_cmd->add_option("--n", ds.n, "Accepted records to produce")->required();
  dataset_cmd->add_option("--seed", ds.seed, "Base scenario seed")->required();
  dataset_cmd->add_option("--workers", ds.workers, "Worker threads")->capture_default_str();
  dataset_cmd->add_option("--out", ds.out, "Output directory")->required();
  dataset_cmd->add_option("--nx", ds.nx, "Elements along x")->capture_default_str();
  dataset_cmd->add_option("--ny", ds.ny, "Elements along y")->capture_default_str();
  dataset_cmd->add_option("--shard-size", ds.shard_size, "Records per shard")->capture_default_str();
  dataset_cmd->add_option("--max-attempts-factor", ds.max_attempts_factor, "Give up after n*factor scenarios")
      ->capture_default_str();
  dataset_cmd->add_flag("--quiet", ds.quiet, "No per-seed log");
  dataset_cmd->add_flag("--no-screen", ds.no_screen, "Keep designs that fail the truss-likeness screen");

  std::string export_dataset, export_out;
  auto* export_cmd = app.add_subcommand("export", "Write a dataset's designs as <index>.tpfg files");
  export_cmd->add_option("--dataset", export_dataset, "Dataset split directory")->required();
  export_cmd->add_option("--out", export_out, "Output directory")->required();

  EvaluateFlags ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Constraint report of candidate designs");
  evaluate_cmd->add_option("--candidates", ev.candidates, "Directory of <index>.tpfg designs, or one multi-record file")
      ->required();
  evaluate_cmd->add_option("--reference", ev.reference, "Reference dataset split directory")->required();
  evaluate_cmd->add_option("--out", ev.out, "Report directory")->required();
  evaluate_cmd->add_option("--format", ev.format, "csv | json | both")->capture_default_str();
  evaluate_cmd->add_option("--threads", ev.threads, "Worker threads");

  BenchFlags bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time FE compliance evaluation");
  bench_cmd->add_option("--max-n", bench.max_n, "Largest batch (1, 10, 100, ... up to this)")->capture_default_str();
  bench_cmd->add_option("--nx", bench.nx, "Elements along x")->capture_default_str();
  bench_cmd->add_option("--ny", bench.ny, "Elements along y")->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "Scenario seed")->capture_default_str();
  bench_cmd->add_option("--threads", bench.threads, "Threads for the parallel rows");
  bench_cmd->add_option("--out", bench.out, "CSV output file");

  CountBarsFlags cb;
  auto* count_cmd = app.add_subcommand("count-bars", "Count and type the bars of a design");
  count_cmd->add_option("--design", cb.design, "Design file (.tpfg)")->required();
  count_cmd->add_option("--index", cb.index, "Record within the design file")->capture_default_str();
  count_cmd->add_option("--scenario", cb.scenario, "Scenario JSON file")->required();
  count_cmd->add_option("--out", cb.out, "Polylines JSON output");
  count_cmd->add_option("--threshold", cb.threshold, "Binarization threshold")->capture_default_str();

  std::string loss_batch, loss_out;
  auto* losses_cmd = app.add_subcommand("losses", "Evaluate GAN loss terms on a JSON batch");
  losses_cmd->add_option("--batch", loss_batch, "Batch JSON file")->required();
  losses_cmd->add_option("--out", loss_out, "Result JSON file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto selected = app.get_subcommands();
    err << (selected.empty() ? app.help() : selected.back()->help());
    return kExitInvalid;
  }

  CLI::App* active = app.get_subcommands().front();
  const std::string stage = active->get_name();
  try {
    if (active == optimize_cmd) return cmd_optimize(opt, out);
    if (active == dataset_cmd) return cmd_dataset(ds, out, err);
    if (active == export_cmd) return cmd_export(export_dataset, export_out, out);
    if (active == evaluate_cmd) return cmd_evaluate(ev, out);
    if (active == bench_cmd) return cmd_bench(bench, out);
    if (active == count_cmd) return cmd_count_bars(cb, out);
    if (active == losses_cmd) return cmd_losses(loss_batch, loss_out, out);
  } catch (const UsageError& e) {
    err << stage << ": " << e.what() << "\n\n" << active->help();
    return kExitInvalid;
  } catch (const SingularityError& e) {
    err << stage << ": solve failed: " << e.what() << "\n";
    return kExitSingular;
  } catch (const ConvergenceError& e) {
    err << stage << ": OC bisection failed: " << e.what() << "\n";
    return kExitBisection;
  } catch (const ValidationError& e) {
    err << stage << ": invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ParameterError& e) {
    err << stage << ": invalid parameter: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const CorruptionError& e) {
    err << stage << ": unreadable data: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << stage << ": " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace topoforge
