#include "topoforge/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "topoforge/errors.hpp"
#include "topoforge/parallel.hpp"
#include "topoforge/tpfg.hpp"

namespace topoforge {

namespace fs = std::filesystem;

nlohmann::json DatasetConfig::to_json() const {
  nlohmann::json j;
  j["domain"] = {{"nx", domain.nx}, {"ny", domain.ny}};
  j["simp"] = {{"penal", simp.penal},       {"move", simp.move},         {"damping", simp.damping},
               {"rmin", simp.rmin},         {"max_iters", simp.max_iters}, {"change_tol", simp.change_tol},
               {"x_min", simp.x_min},       {"young", simp.material.young}, {"poisson", simp.material.poisson}};
  j["sampler"] = {{"volfrac_mean", sampler.volfrac_mean}, {"volfrac_std", sampler.volfrac_std},
                  {"volfrac_min", sampler.volfrac_min},   {"volfrac_max", sampler.volfrac_max},
                  {"load_rate", sampler.load_rate},       {"fixed_rate", sampler.fixed_rate},
                  {"min_fixed", sampler.min_fixed}};
  j["screen"] = {{"threshold", truss.bars.threshold},
                 {"spur_length", truss.bars.spur_length},
                 {"junction_radius", truss.bars.junction_radius},
                 {"attach_radius", truss.bars.attach_radius},
                 {"grey_low", truss.grey_low},
                 {"grey_high", truss.grey_high},
                 {"max_intermediate_fraction", truss.max_intermediate_fraction},
                 {"require_converged", require_converged},
                 {"require_truss_like", require_truss_like}};
  j["shard_size"] = shard_size;
  return j;
}

nlohmann::json labels_to_json(const SampleLabels& l) {
  return {{"compliance", l.compliance}, {"volume_fraction", l.volume_fraction},
          {"clamped", l.clamped},       {"loaded", l.loaded},
          {"internal", l.internal},     {"total_bars", l.total_bars},
          {"simp_iterations", l.simp_iterations}, {"converged", l.converged},
          {"truss_like", l.truss_like}};
}

SampleLabels labels_from_json(const nlohmann::json& j) {
  SampleLabels l;
  l.compliance = j.at("compliance").get<double>();
  l.volume_fraction = j.at("volume_fraction").get<double>();
  l.clamped = j.at("clamped").get<int>();
  l.loaded = j.at("loaded").get<int>();
  l.internal = j.at("internal").get<int>();
  l.total_bars = j.at("total_bars").get<int>();
  l.simp_iterations = j.at("simp_iterations").get<int>();
  l.converged = j.at("converged").get<bool>();
  l.truss_like = j.at("truss_like").get<bool>();
  return l;
}

namespace {

std::vector<Field> tensor_planes(const ConditionTensor& t) {
  return {*t.design, t.bc_x, t.bc_y, t.f_x, t.f_y, t.vf, t.cx};
}

ConditionTensor tensor_from_planes(std::vector<Field> planes) {
  ConditionTensor t;
  t.design = std::move(planes[0]);
  t.bc_x = std::move(planes[1]);
  t.bc_y = std::move(planes[2]);
  t.f_x = std::move(planes[3]);
  t.f_y = std::move(planes[4]);
  t.vf = std::move(planes[5]);
  t.cx = std::move(planes[6]);
  return t;
}

std::string meta_payload(const SampleRecord& r) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["labels"] = labels_to_json(r.labels);
  return j.dump();
}

std::uint32_t crc_of(const std::string& bytes, std::uint32_t crc) {
  return static_cast<std::uint32_t>(
      crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::uint32_t checksum_of(const std::string& tensor_bytes, const std::string& design_bytes, const std::string& meta) {
  std::uint32_t crc = static_cast<std::uint32_t>(crc32(0L, Z_NULL, 0));
  crc = crc_of(tensor_bytes, crc);
  crc = crc_of(design_bytes, crc);
  return crc_of(meta, crc);
}

std::string shard_stem(Split split, int index) {
  std::ostringstream s;
  s << to_string(split) << '-' << std::setw(5) << std::setfill('0') << index;
  return s.str();
}

void write_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_manifest(const ShardManifest& m) {
  write_atomically(m.directory / "manifest.json", m.to_json().dump(2) + "\n");
}

}  // namespace

std::uint32_t record_checksum(const SampleRecord& r) {
  return checksum_of(encode_planes(tensor_planes(r.tensor)), encode_planes({r.design}), meta_payload(r));
}

double ShardManifest::acceptance_rate() const {
  const double attempts = static_cast<double>(record_count + rejected);
  return attempts > 0 ? static_cast<double>(record_count) / attempts : 0.0;
}

nlohmann::json ShardManifest::to_json() const {
  nlohmann::json j;
  j["format_version"] = format_version;
  j["split"] = std::string(to_string(split));
  j["target_count"] = target_count;
  j["record_count"] = record_count;
  j["base_seed"] = base_seed;
  j["next_seed"] = next_seed;
  j["seed_range"] = {base_seed, next_seed};
  j["tensor_dims"] = {rows, cols};
  j["design_dims"] = {design_rows, design_cols};
  j["channels"] = std::vector<std::string>(std::begin(kChannelNames), std::end(kChannelNames));
  j["shard_size"] = shard_size;
  auto shard_list = nlohmann::json::array();
  for (const auto& s : shards) {
    shard_list.push_back({{"index", s.index},
                          {"tensor_file", s.tensor_file},
                          {"design_file", s.design_file},
                          {"meta_file", s.meta_file},
                          {"records", s.records},
                          {"first_record", s.first_record},
                          {"first_seed", s.first_seed},
                          {"last_seed", s.last_seed},
                          {"rejected", s.rejected}});
  }
  j["shards"] = std::move(shard_list);
  j["rejected"] = rejected;
  j["rejection_reasons"] = rejection_reasons;
  j["acceptance_rate"] = acceptance_rate();
  j["complete"] = complete;
  j["config"] = config;
  return j;
}

ShardManifest ShardManifest::from_json(const nlohmann::json& j, const fs::path& directory) {
  ShardManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kManifestVersion) {
      throw CorruptionError("manifest version " + std::to_string(m.format_version) + " is not supported");
    }
    m.split = parse_split(j.at("split").get<std::string>());
    m.target_count = j.at("target_count").get<std::size_t>();
    m.record_count = j.at("record_count").get<std::size_t>();
    m.base_seed = j.at("base_seed").get<std::uint64_t>();
    m.next_seed = j.at("next_seed").get<std::uint64_t>();
    m.rows = j.at("tensor_dims").at(0).get<int>();
    m.cols = j.at("tensor_dims").at(1).get<int>();
    m.design_rows = j.at("design_dims").at(0).get<int>();
    m.design_cols = j.at("design_dims").at(1).get<int>();
    m.shard_size = j.at("shard_size").get<int>();
    for (const auto& s : j.at("shards")) {
      ShardInfo info;
      info.index = s.at("index").get<int>();
      info.tensor_file = s.at("tensor_file").get<std::string>();
      info.design_file = s.at("design_file").get<std::string>();
      info.meta_file = s.at("meta_file").get<std::string>();
      info.records = s.at("records").get<std::size_t>();
      info.first_record = s.at("first_record").get<std::size_t>();
      info.first_seed = s.at("first_seed").get<std::uint64_t>();
      info.last_seed = s.at("last_seed").get<std::uint64_t>();
      info.rejected = s.at("rejected").get<std::size_t>();
      m.shards.push_back(std::move(info));
    }
    m.rejected = j.at("rejected").get<std::size_t>();
    m.rejection_reasons = j.at("rejection_reasons").get<std::map<std::string, std::size_t>>();
    m.complete = j.at("complete").get<bool>();
    m.config = j.at("config");
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError("malformed manifest in " + directory.string() + ": " + e.what());
  }
  std::size_t total = 0;
  for (const auto& s : m.shards) {
    if (s.first_record != total) throw CorruptionError("manifest shard offsets are inconsistent");
    total += s.records;
  }
  if (total != m.record_count) throw CorruptionError("manifest record counts do not sum to record_count");
  m.directory = directory;
  return m;
}

ShardManifest load_manifest(const fs::path& directory) {
  std::ifstream in(directory / "manifest.json");
  if (!in) throw CorruptionError("no manifest.json in " + directory.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError("unreadable manifest in " + directory.string() + ": " + e.what());
  }
  return ShardManifest::from_json(j, directory);
}

SeedOutcome process_seed(std::uint64_t seed, Split split, const DatasetConfig& config) {
  SeedOutcome out;
  Scenario scenario = sample_scenario(seed, split, config.domain, config.sampler);
  OptimizationTrace trace;
  try {
    trace = optimize(config.domain, scenario, config.simp);
  } catch (const SingularityError&) {
    out.rejection = "singular";
    return out;
  } catch (const ConvergenceError&) {
    out.rejection = "bisection";
    return out;
  }
  if (config.require_converged && !trace.converged) {
    out.rejection = "not converged";
    return out;
  }
  const Field design = round_to_float(trace.density);
  const TrussCheck truss = truss_likeness(design, scenario, config.truss);
  if (config.require_truss_like && !truss.pass) {
    out.rejection = !truss.connected ? "disconnected" : !truss.mostly_binary ? "intermediate density" : "unattached";
    return out;
  }
  const BarGraph bars = extract_bar_graph(design, scenario, config.truss.bars);
  if (bars.total() < 1) {
    out.rejection = "no bars";
    return out;
  }
  scenario.complexity = bars.total();

  SampleRecord r;
  r.scenario = scenario;
  r.design = design;
  r.labels.compliance = trace.final_compliance;
  r.labels.volume_fraction = volume_fraction(design);
  r.labels.clamped = bars.clamped;
  r.labels.loaded = bars.loaded;
  r.labels.internal = bars.internal;
  r.labels.total_bars = bars.total();
  r.labels.simp_iterations = trace.iteration_count;
  r.labels.converged = trace.converged;
  r.labels.truss_like = truss.pass;
  ConditionTensor t = encode_condition_tensor(scenario, config.domain, design);
  for (Field* p : {&*t.design, &t.bc_x, &t.bc_y, &t.f_x, &t.f_y, &t.vf, &t.cx}) *p = round_to_float(*p);
  r.tensor = std::move(t);
  out.record = std::move(r);
  return out;
}

ShardManifest generate_split(const fs::path& directory, Split split, std::size_t n, std::uint64_t base_seed,
                             const DatasetConfig& config, const GenerateOptions& options) {
  if (n < 1) throw ParameterError("dataset size must be >= 1");
  if (options.workers < 1) throw ParameterError("worker count must be >= 1");
  if (config.shard_size < 1) throw ParameterError("shard size must be >= 1");
  config.simp.validate();
  fs::create_directories(directory);

  const nlohmann::json config_json = config.to_json();
  ShardManifest m;
  if (fs::exists(directory / "manifest.json")) {
    m = load_manifest(directory);
    if (m.split != split || m.base_seed != base_seed || m.target_count != n || m.config != config_json) {
      throw ValidationError("existing manifest in " + directory.string() +
                            " was generated with different split/seed/size/config");
    }
    if (m.complete) return m;
  } else {
    m.split = split;
    m.target_count = n;
    m.base_seed = base_seed;
    m.next_seed = base_seed;
    m.rows = config.domain.ny + 1;
    m.cols = config.domain.nx + 1;
    m.design_rows = config.domain.ny;
    m.design_cols = config.domain.nx;
    m.shard_size = config.shard_size;
    m.config = config_json;
    m.directory = directory;
  }

  const int workers = effective_threads(options.workers);
  const std::uint64_t attempt_budget = static_cast<std::uint64_t>(n) * std::max(1, config.max_attempts_factor);
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };

  while (m.record_count < n) {
    ShardInfo shard;
    shard.index = static_cast<int>(m.shards.size());
    shard.first_record = m.record_count;
    shard.first_seed = m.next_seed;
    const std::size_t want = std::min<std::size_t>(config.shard_size, n - m.record_count);

    std::vector<SampleRecord> records;
    std::map<std::string, std::size_t> reasons;
    std::uint64_t seed = m.next_seed;
    while (records.size() < want) {
      if (seed - m.base_seed >= attempt_budget) {
        throw std::runtime_error("acceptance too low: " + std::to_string(m.record_count + records.size()) + " of " +
                                 std::to_string(n) + " records after " + std::to_string(seed - m.base_seed) +
                                 " scenarios");
      }
      const std::size_t batch = std::max<std::size_t>(static_cast<std::size_t>(workers), want - records.size());
      std::vector<SeedOutcome> outcomes(batch);
      parallel_for(batch, workers, [&](std::size_t k) { outcomes[k] = process_seed(seed + k, split, config); });
      for (auto& o : outcomes) {
        if (records.size() == want) break;
        if (o.record) {
          o.record->index = shard.first_record + records.size();
          records.push_back(std::move(*o.record));
        } else {
          ++reasons[o.rejection];
          ++shard.rejected;
          log("seed " + std::to_string(seed) + " rejected: " + o.rejection);
        }
        ++seed;
      }
    }
    shard.last_seed = seed - 1;
    shard.records = records.size();

    const std::string stem = shard_stem(split, shard.index);
    shard.tensor_file = stem + ".tpfg";
    shard.design_file = stem + ".design.tpfg";
    shard.meta_file = stem + ".jsonl";
    std::vector<std::vector<Field>> tensor_records;
    std::vector<std::vector<Field>> design_records;
    std::string meta;
    for (auto& r : records) {
      r.checksum = record_checksum(r);
      tensor_records.push_back(tensor_planes(r.tensor));
      design_records.push_back({r.design});
      nlohmann::json line;
      line["index"] = r.index;
      line["scenario"] = r.scenario;
      line["labels"] = labels_to_json(r.labels);
      line["checksum"] = r.checksum;
      meta += line.dump() + "\n";
    }
    write_tpfg(directory / shard.tensor_file, 7, m.rows, m.cols, tensor_records);
    write_tpfg(directory / shard.design_file, 1, m.design_rows, m.design_cols, design_records);
    write_atomically(directory / shard.meta_file, meta);

    m.record_count += records.size();
    m.next_seed = seed;
    m.rejected += shard.rejected;
    for (const auto& [reason, count] : reasons) m.rejection_reasons[reason] += count;
    m.shards.push_back(shard);
    m.complete = m.record_count >= n;
    write_manifest(m);
    log("shard " + stem + ": " + std::to_string(shard.records) + " records, " + std::to_string(shard.rejected) +
        " rejected");
    if (options.on_shard_committed) options.on_shard_committed(m);
  }
  return m;
}

SampleRecord read_record(const ShardManifest& manifest, std::size_t index) {
  if (index >= manifest.record_count) {
    throw std::out_of_range("record " + std::to_string(index) + " out of range (" +
                            std::to_string(manifest.record_count) + " records)");
  }
  const auto it = std::find_if(manifest.shards.begin(), manifest.shards.end(), [&](const ShardInfo& s) {
    return index >= s.first_record && index < s.first_record + s.records;
  });
  if (it == manifest.shards.end()) throw CorruptionError("no shard holds record " + std::to_string(index));
  const std::size_t local = index - it->first_record;
  const fs::path tensor_path = manifest.directory / it->tensor_file;
  const fs::path design_path = manifest.directory / it->design_file;
  const fs::path meta_path = manifest.directory / it->meta_file;

  std::ifstream meta_in(meta_path);
  if (!meta_in) throw CorruptionError("cannot open " + meta_path.string());
  std::string line;
  for (std::size_t k = 0; k <= local; ++k) {
    if (!std::getline(meta_in, line)) throw CorruptionError(meta_path.string() + ": missing record line");
  }

  SampleRecord r;
  std::uint32_t stored = 0;
  try {
    const auto j = nlohmann::json::parse(line);
    r.index = j.at("index").get<std::size_t>();
    r.scenario = j.at("scenario").get<Scenario>();
    r.labels = labels_from_json(j.at("labels"));
    stored = j.at("checksum").get<std::uint32_t>();
  } catch (const std::exception& e) {
    throw CorruptionError(meta_path.string() + ": unreadable record line: " + e.what());
  }
  if (r.index != index) throw CorruptionError(meta_path.string() + ": record index mismatch");

  const std::string tensor_bytes = read_tpfg_record_bytes(tensor_path, local);
  const std::string design_bytes = read_tpfg_record_bytes(design_path, local);
  r.tensor = tensor_from_planes(read_tpfg_record(tensor_path, local));
  r.design = read_tpfg_record(design_path, local).front();
  r.checksum = checksum_of(tensor_bytes, design_bytes, meta_payload(r));
  if (r.checksum != stored) {
    throw CorruptionError("checksum mismatch for record " + std::to_string(index) + " in shard " +
                          tensor_path.string());
  }
  return r;
}

void check_disjoint_seeds(std::span<const ShardManifest> manifests) {
  for (std::size_t a = 0; a < manifests.size(); ++a) {
    for (std::size_t b = a + 1; b < manifests.size(); ++b) {
      const auto& x = manifests[a];
      const auto& y = manifests[b];
      if (x.base_seed < y.next_seed && y.base_seed < x.next_seed) {
        throw ValidationError("splits " + std::string(to_string(x.split)) + " and " + std::string(to_string(y.split)) +
                              " share scenario seeds");
      }
    }
  }
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ParameterError("KS statistic needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace topoforge
