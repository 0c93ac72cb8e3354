#include "catflow/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace catflow::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError(std::string(what) + ": cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PipelineError("cannot write " + path);
  out << content;
}

std::string fmt(const char* format, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&key](const char* a) {
          return key == a;
        }) == allowed.end()) {
      throw ConfigError(path + "." + key + ": unknown field");
    }
  }
}

const char* external_proxy_override() {
  const char* env = std::getenv(kExternalProxyEnvVar);
  return (env != nullptr && *env != '\0') ? env : nullptr;
}

ProxyConfig resolved_proxy_config(const RunConfig& config) {
  ProxyConfig p = config.proxy;
  if (const char* cmd = external_proxy_override()) {
    p.type = ProxyConfig::Type::External;
    p.command = cmd;
  }
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// base64

namespace {
constexpr char kB64Table[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const std::uint8_t* data, std::size_t size) {
  std::string out;
  out.reserve((size + 2) / 3 * 4);
  for (std::size_t i = 0; i < size; i += 3) {
    const std::uint32_t b0 = data[i];
    const std::uint32_t b1 = i + 1 < size ? data[i + 1] : 0;
    const std::uint32_t b2 = i + 2 < size ? data[i + 2] : 0;
    const std::uint32_t triple = (b0 << 16) | (b1 << 8) | b2;
    out += kB64Table[(triple >> 18) & 0x3F];
    out += kB64Table[(triple >> 12) & 0x3F];
    out += i + 1 < size ? kB64Table[(triple >> 6) & 0x3F] : '=';
    out += i + 2 < size ? kB64Table[triple & 0x3F] : '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (int i = 0; i < 64; ++i) lookup[static_cast<unsigned char>(kB64Table[i])] = i;
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    const int v = lookup[static_cast<unsigned char>(c)];
    if (v < 0) throw PipelineError("base64: invalid character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

std::string encode_doubles(const Eigen::VectorXd& values) {
  return base64_encode(reinterpret_cast<const std::uint8_t*>(values.data()),
                       static_cast<std::size_t>(values.size()) * sizeof(double));
}

Eigen::VectorXd decode_doubles(const std::string& text) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % sizeof(double) != 0) {
    throw PipelineError("decode_doubles: byte count not a multiple of 8");
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(bytes.size() / sizeof(double)));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

// ---------------------------------------------------------------------------
// RunConfig

RunConfig default_run_config() {
  RunConfig cfg;
  for (auto symbol : env::kElements) cfg.search_space.elements.emplace_back(symbol);
  cfg.search_space.space_groups.assign(env::kSpaceGroups.begin(),
                                       env::kSpaceGroups.end());
  return cfg;
}

RunConfig run_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig cfg = default_run_config();
  try {
    check_keys(j, "config",
               {"seed", "output_dir", "search_space", "trainer", "reward",
                "relaxation", "surface", "proxy", "energy_table"});
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("search_space")) {
      const auto& s = j["search_space"];
      check_keys(s, "search_space",
                 {"elements", "space_groups", "lattice_min", "lattice_max",
                  "lattice_bins", "offset_bins"});
      if (s.contains("elements"))
        cfg.search_space.elements = s["elements"].get<std::vector<std::string>>();
      if (s.contains("space_groups"))
        cfg.search_space.space_groups = s["space_groups"].get<std::vector<int>>();
      if (s.contains("lattice_min"))
        cfg.search_space.lattice_min = s["lattice_min"].get<double>();
      if (s.contains("lattice_max"))
        cfg.search_space.lattice_max = s["lattice_max"].get<double>();
      if (s.contains("lattice_bins"))
        cfg.search_space.lattice_bins = s["lattice_bins"].get<int>();
      if (s.contains("offset_bins"))
        cfg.search_space.offset_bins = s["offset_bins"].get<int>();
    }
    if (j.contains("trainer")) {
      const auto& t = j["trainer"];
      check_keys(t, "trainer",
                 {"batch_size", "steps", "learning_rate", "log_z_learning_rate",
                  "hidden", "epsilon"});
      if (t.contains("batch_size")) cfg.trainer.batch_size = t["batch_size"].get<int>();
      if (t.contains("steps")) cfg.trainer.steps = t["steps"].get<int>();
      if (t.contains("learning_rate"))
        cfg.trainer.learning_rate = t["learning_rate"].get<double>();
      if (t.contains("log_z_learning_rate"))
        cfg.trainer.log_z_learning_rate = t["log_z_learning_rate"].get<double>();
      if (t.contains("hidden")) cfg.trainer.hidden = t["hidden"].get<int>();
      if (t.contains("epsilon")) cfg.trainer.epsilon = t["epsilon"].get<double>();
    }
    if (j.contains("reward")) {
      const auto& r = j["reward"];
      check_keys(r, "reward", {"b", "e_corr"});
      if (r.contains("b")) cfg.reward.b = r["b"].get<double>();
      if (r.contains("e_corr")) cfg.reward.e_corr = r["e_corr"].get<double>();
    }
    if (j.contains("relaxation")) {
      const auto& r = j["relaxation"];
      check_keys(r, "relaxation", {"window", "energy_window"});
      if (r.contains("window")) cfg.relaxation.window = r["window"].get<double>();
      if (r.contains("energy_window"))
        cfg.relaxation.energy_window = r["energy_window"].get<double>();
    }
    if (j.contains("surface")) {
      const auto& s = j["surface"];
      check_keys(s, "surface",
                 {"n_layers", "min_thickness", "cutoff", "adsorbate",
                  "adsorbate_height"});
      if (s.contains("n_layers")) cfg.surface.n_layers = s["n_layers"].get<int>();
      if (s.contains("min_thickness"))
        cfg.surface.min_thickness = s["min_thickness"].get<double>();
      if (s.contains("cutoff")) cfg.surface.cutoff = s["cutoff"].get<double>();
      if (s.contains("adsorbate")) cfg.surface.adsorbate = s["adsorbate"].get<std::string>();
      if (s.contains("adsorbate_height"))
        cfg.surface.adsorbate_height = s["adsorbate_height"].get<double>();
    }
    if (j.contains("proxy")) {
      const auto& p = j["proxy"];
      check_keys(p, "proxy", {"type", "table", "command", "timeout_seconds"});
      if (p.contains("type")) {
        const std::string type = p["type"].get<std::string>();
        if (type == "tabular") {
          cfg.proxy.type = ProxyConfig::Type::Tabular;
        } else if (type == "external") {
          cfg.proxy.type = ProxyConfig::Type::External;
        } else {
          throw ConfigError("proxy.type: expected 'tabular' or 'external', got '" +
                            type + "'");
        }
      }
      if (p.contains("table")) cfg.proxy.table_path = p["table"].get<std::string>();
      if (p.contains("command")) cfg.proxy.command = p["command"].get<std::string>();
      if (p.contains("timeout_seconds"))
        cfg.proxy.timeout_seconds = p["timeout_seconds"].get<double>();
    }
    if (j.contains("energy_table"))
      cfg.energy_table_path = j["energy_table"].get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json_text(ss.str());
}

std::string run_config_to_json(const RunConfig& config) {
  json j;
  j["seed"] = config.seed;
  j["output_dir"] = config.output_dir;
  j["search_space"] = {{"elements", config.search_space.elements},
                       {"space_groups", config.search_space.space_groups},
                       {"lattice_min", config.search_space.lattice_min},
                       {"lattice_max", config.search_space.lattice_max},
                       {"lattice_bins", config.search_space.lattice_bins},
                       {"offset_bins", config.search_space.offset_bins}};
  j["trainer"] = {{"batch_size", config.trainer.batch_size},
                  {"steps", config.trainer.steps},
                  {"learning_rate", config.trainer.learning_rate},
                  {"log_z_learning_rate", config.trainer.log_z_learning_rate},
                  {"hidden", config.trainer.hidden},
                  {"epsilon", config.trainer.epsilon}};
  j["reward"] = {{"b", config.reward.b}, {"e_corr", config.reward.e_corr}};
  j["relaxation"] = {{"window", config.relaxation.window},
                     {"energy_window", config.relaxation.energy_window}};
  j["surface"] = {{"n_layers", config.surface.n_layers},
                  {"min_thickness", config.surface.min_thickness},
                  {"cutoff", config.surface.cutoff},
                  {"adsorbate", config.surface.adsorbate},
                  {"adsorbate_height", config.surface.adsorbate_height}};
  j["proxy"] = {{"type", config.proxy.type == ProxyConfig::Type::Tabular
                             ? "tabular"
                             : "external"},
                {"table", config.proxy.table_path},
                {"command", config.proxy.command},
                {"timeout_seconds", config.proxy.timeout_seconds}};
  j["energy_table"] = config.energy_table_path;
  return j.dump(2);
}

std::vector<std::string> validate_run_config(const RunConfig& config) {
  std::vector<std::string> issues;
  const auto& ss = config.search_space;
  if (ss.elements.empty()) issues.push_back("search_space.elements: must not be empty");
  for (const auto& e : ss.elements) {
    if (env::element_index(e) < 0)
      issues.push_back("search_space.elements: unknown element '" + e + "'");
  }
  if (ss.space_groups.empty())
    issues.push_back("search_space.space_groups: must not be empty");
  for (int sg : ss.space_groups) {
    if (env::space_group_index(sg) < 0)
      issues.push_back("search_space.space_groups: unsupported space group " +
                       std::to_string(sg));
  }
  if (ss.lattice_bins < 1) issues.push_back("search_space.lattice_bins: must be >= 1");
  if (ss.offset_bins < 1) issues.push_back("search_space.offset_bins: must be >= 1");
  if (!(ss.lattice_min < ss.lattice_max))
    issues.push_back("search_space.lattice_min: must be below lattice_max");

  try {
    config.trainer.validate();
  } catch (const std::invalid_argument& e) {
    issues.push_back(e.what());
  }

  if (!(config.reward.b > 0.0)) issues.push_back("reward.b: must be positive");
  if (!(config.relaxation.window > 0.0))
    issues.push_back("relaxation.window: must be positive");
  if (config.relaxation.energy_window < 0.0)
    issues.push_back("relaxation.energy_window: must be non-negative");
  if (config.surface.n_layers < 1) issues.push_back("surface.n_layers: must be >= 1");
  if (!(config.surface.min_thickness > 0.0))
    issues.push_back("surface.min_thickness: must be positive");
  if (!(config.surface.cutoff > 0.0)) issues.push_back("surface.cutoff: must be positive");

  if (!fs::exists(config.energy_table_path))
    issues.push_back("energy_table: file not found: " + config.energy_table_path);
  const ProxyConfig proxy = resolved_proxy_config(config);
  if (proxy.type == ProxyConfig::Type::Tabular) {
    if (!fs::exists(proxy.table_path))
      issues.push_back("proxy.table: file not found: " + proxy.table_path);
  } else if (proxy.command.empty()) {
    issues.push_back("proxy.command: required for an external proxy");
  }
  return issues;
}

// ---------------------------------------------------------------------------
// SampleRecord

const char* status_name(SampleRecord::Status status) {
  switch (status) {
    case SampleRecord::Status::Unfiltered:
      return "unfiltered";
    case SampleRecord::Status::Kept:
      return "kept";
    case SampleRecord::Status::DroppedEnergy:
      return "dropped-energy";
    case SampleRecord::Status::DroppedSpaceGroup:
      return "dropped-spacegroup";
  }
  return "unknown";
}

std::string record_to_json_line(const SampleRecord& record) {
  json j;
  j["element"] = record.spec.element;
  j["space_group"] = record.spec.space_group;
  j["n_atoms"] = record.spec.n_atoms;
  j["lattice_a"] = record.spec.lattice_a;
  j["miller"] = record.spec.miller;
  j["offset"] = record.spec.offset;
  j["face_top"] = record.spec.face_top;
  j["lattice_a_star"] = record.lattice_a_star;
  j["formation_energy"] = record.formation_energy;
  j["e_h"] = record.e_h;
  j["eta"] = record.eta;
  j["reward"] = record.reward;
  if (record.status != SampleRecord::Status::Unfiltered) {
    j["status"] = status_name(record.status);
  }
  return j.dump();
}

SampleRecord record_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  SampleRecord r;
  r.spec.element = j.at("element").get<std::string>();
  r.spec.element_idx = env::element_index(r.spec.element);
  if (r.spec.element_idx < 0) {
    throw std::invalid_argument("unknown element " + r.spec.element);
  }
  r.spec.space_group = j.at("space_group").get<int>();
  r.spec.n_atoms = j.at("n_atoms").get<int>();
  r.spec.lattice_a = j.at("lattice_a").get<double>();
  const auto& m = j.at("miller");
  r.spec.miller = {m.at(0).get<int>(), m.at(1).get<int>(), m.at(2).get<int>()};
  r.spec.offset = j.at("offset").get<double>();
  r.spec.face_top = j.at("face_top").get<bool>();
  r.lattice_a_star = j.at("lattice_a_star").get<double>();
  r.formation_energy = j.at("formation_energy").get<double>();
  r.e_h = j.at("e_h").get<double>();
  r.eta = j.at("eta").get<double>();
  r.reward = j.at("reward").get<double>();
  if (j.contains("status")) {
    const std::string s = j["status"].get<std::string>();
    if (s == "kept") {
      r.status = SampleRecord::Status::Kept;
    } else if (s == "dropped-energy") {
      r.status = SampleRecord::Status::DroppedEnergy;
    } else if (s == "dropped-spacegroup") {
      r.status = SampleRecord::Status::DroppedSpaceGroup;
    } else if (s == "unfiltered") {
      r.status = SampleRecord::Status::Unfiltered;
    } else {
      throw std::invalid_argument("unknown status '" + s + "'");
    }
  }
  return r;
}

std::vector<SampleRecord> read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("samples: cannot open " + path);
  std::vector<SampleRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json_line(line));
    } catch (const std::exception& e) {
      throw PipelineError(path + ":" + std::to_string(line_no) +
                          ": malformed record: " + e.what());
    }
  }
  return records;
}

void write_samples(const std::string& path, const std::vector<SampleRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json_line(r);
    out += '\n';
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// RewardPipeline

RewardPipeline::RewardPipeline(const RunConfig& config,
                               bulk::EnergyTable energy_table,
                               proxy::ProxyTable proxy_table)
    : reward_(config.reward),
      relaxation_(config.relaxation),
      surface_(config.surface),
      energy_table_(std::move(energy_table)),
      proxy_table_(std::move(proxy_table)) {
  const ProxyConfig proxy = resolved_proxy_config(config);
  if (proxy.type == ProxyConfig::Type::External) {
    external_ = std::make_unique<proxy::ExternalProxyClient>(proxy.command,
                                                             proxy.timeout_seconds);
  }
}

RewardPipeline RewardPipeline::from_config(const RunConfig& config) {
  const ProxyConfig proxy = resolved_proxy_config(config);
  proxy::ProxyTable table;
  if (proxy.type == ProxyConfig::Type::Tabular) {
    table = proxy::ProxyTable::load(proxy.table_path);
  }
  return RewardPipeline(config, bulk::EnergyTable::load(config.energy_table_path),
                        std::move(table));
}

namespace {
std::mutex g_external_proxy_mutex;
}

SampleRecord RewardPipeline::evaluate(const env::CrystalSurfaceSpec& spec) const {
  const bulk::BulkStructure structure =
      bulk::make_bulk(spec.element, spec.space_group, spec.lattice_a);
  if (structure.n_atoms != spec.n_atoms) {
    throw PipelineError("evaluate: atom count " + std::to_string(spec.n_atoms) +
                        " inconsistent with space group " +
                        std::to_string(spec.space_group));
  }
  const bulk::RelaxedStructure relaxed =
      bulk::relax(structure, energy_table_, relaxation_.window);
  const geom::Slab slab =
      geom::cut_slab(relaxed, spec.miller, spec.offset, spec.face_top,
                     surface_.n_layers, surface_.min_thickness);
  const geom::AdsorbateSpec adsorbate{surface_.adsorbate, surface_.adsorbate_height};
  const geom::AtomGraph graph = geom::to_graph(slab, adsorbate, surface_.cutoff);

  double e_h = 0.0;
  if (external_ != nullptr) {
    std::lock_guard<std::mutex> lock(g_external_proxy_mutex);
    e_h = external_->request(geom::graph_to_extended_xyz(graph, slab),
                             surface_.adsorbate);
  } else {
    e_h = proxy::predict_adsorption_energy(proxy_table_, graph);
  }

  SampleRecord record;
  record.spec = spec;
  record.lattice_a_star = relaxed.lattice_a_star;
  record.formation_energy = relaxed.formation_energy;
  record.e_h = e_h;
  record.eta = proxy::overpotential(e_h, reward_);
  record.reward = proxy::reward(record.eta, reward_);
  return record;
}

double RewardPipeline::reward_of(const env::CrystalSurfaceSpec& spec) const {
  return evaluate(spec).reward;
}

// ---------------------------------------------------------------------------
// Checkpoint

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  json j;
  j["version"] = checkpoint.version;
  j["config"] = json::parse(run_config_to_json(checkpoint.config));
  j["params"] = {{"input_dim", checkpoint.params.input_dim},
                 {"hidden", checkpoint.params.hidden},
                 {"arities", checkpoint.params.arities},
                 {"data", encode_doubles(checkpoint.params.flat)}};
  j["optimizer"] = {{"m", encode_doubles(checkpoint.optimizer.m)},
                    {"v", encode_doubles(checkpoint.optimizer.v)},
                    {"t", checkpoint.optimizer.t}};
  j["rng"] = checkpoint.rng_state;
  write_file(path, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path, "checkpoint"));
  } catch (const json::exception& e) {
    throw PipelineError("checkpoint: " + std::string(e.what()));
  }
  Checkpoint c;
  try {
    c.version = j.at("version").get<int>();
    if (c.version != 1) {
      throw PipelineError("checkpoint: unsupported version " +
                          std::to_string(c.version));
    }
    c.config = run_config_from_json_text(j.at("config").dump());
    const auto& p = j.at("params");
    c.params.input_dim = p.at("input_dim").get<int>();
    c.params.hidden = p.at("hidden").get<int>();
    c.params.arities = p.at("arities").get<std::vector<int>>();
    c.params.flat = decode_doubles(p.at("data").get<std::string>());
    Eigen::Index expected =
        static_cast<Eigen::Index>(c.params.hidden) * c.params.input_dim +
        c.params.hidden + 1;
    for (int arity : c.params.arities) {
      expected += static_cast<Eigen::Index>(arity) * (c.params.hidden + 1);
    }
    if (c.params.flat.size() != expected) {
      throw PipelineError("checkpoint: parameter vector has " +
                          std::to_string(c.params.flat.size()) +
                          " entries, expected " + std::to_string(expected));
    }
    const auto& o = j.at("optimizer");
    c.optimizer.m = decode_doubles(o.at("m").get<std::string>());
    c.optimizer.v = decode_doubles(o.at("v").get<std::string>());
    c.optimizer.t = o.at("t").get<long>();
    c.rng_state = j.at("rng").get<std::string>();
  } catch (const json::exception& e) {
    throw PipelineError("checkpoint: " + std::string(e.what()));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Report

Report build_report(const std::vector<SampleRecord>& kept) {
  struct Group {
    std::int64_t count = 0;
    double eta_sum = 0.0;
  };
  std::map<std::pair<std::string, int>, Group> groups;
  for (const auto& r : kept) {
    auto& g = groups[{r.spec.element, r.spec.space_group}];
    g.count += 1;
    g.eta_sum += r.eta;
  }
  Report report;
  report.total = static_cast<std::int64_t>(kept.size());
  for (const auto& [key, g] : groups) {
    ReportRow row;
    row.element = key.first;
    row.space_group = key.second;
    row.count = g.count;
    row.eta = g.eta_sum / static_cast<double>(g.count);
    report.rows.push_back(std::move(row));
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const ReportRow& a, const ReportRow& b) {
              if (a.count != b.count) return a.count > b.count;
              if (a.element != b.element) return a.element < b.element;
              return a.space_group < b.space_group;
            });

  // Largest-remainder apportionment in hundredths of a percent, so the
  // printed percentages sum to exactly 100.00.
  if (report.total > 0) {
    std::vector<std::int64_t> base(report.rows.size());
    std::vector<std::int64_t> remainder(report.rows.size());
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      const std::int64_t scaled = report.rows[i].count * 10000;
      base[i] = scaled / report.total;
      remainder[i] = scaled % report.total;
      assigned += base[i];
    }
    std::vector<std::size_t> order(report.rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return remainder[a] > remainder[b];
    });
    std::int64_t deficit = 10000 - assigned;
    for (std::size_t k = 0; deficit > 0 && k < order.size(); ++k, --deficit) {
      base[order[k]] += 1;
    }
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      report.rows[i].percentage = static_cast<double>(base[i]) / 100.0;
    }
  }
  return report;
}

std::string report_to_csv(const Report& report) {
  std::string out = "composition,space_group,proxy_overpotential,count,percentage\n";
  for (const auto& row : report.rows) {
    out += row.element;
    out += ',';
    out += std::to_string(row.space_group);
    out += ',';
    out += fmt("%.4f", row.eta);
    out += ',';
    out += std::to_string(row.count);
    out += ',';
    out += fmt("%.2f", row.percentage);
    out += '\n';
  }
  return out;
}

std::string report_to_svg(const Report& report) {
  const int width = 720;
  const int height = 420;
  const int margin_left = 60;
  const int margin_bottom = 70;
  const int margin_top = 30;
  const int plot_w = width - margin_left - 20;
  const int plot_h = height - margin_top - margin_bottom;
  double max_pct = 1.0;
  for (const auto& row : report.rows) max_pct = std::max(max_pct, row.percentage);

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(width / 2) +
         "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">Sampled structures by composition (%)</text>\n";
  svg += "<line x1=\"" + std::to_string(margin_left) + "\" y1=\"" +
         std::to_string(margin_top + plot_h) + "\" x2=\"" +
         std::to_string(margin_left + plot_w) + "\" y2=\"" +
         std::to_string(margin_top + plot_h) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + std::to_string(margin_left) + "\" y1=\"" +
         std::to_string(margin_top) + "\" x2=\"" + std::to_string(margin_left) +
         "\" y2=\"" + std::to_string(margin_top + plot_h) + "\" stroke=\"black\"/>\n";

  const std::size_t n = report.rows.size();
  if (n > 0) {
    const double slot = static_cast<double>(plot_w) / static_cast<double>(n);
    const double bar_w = slot * 0.7;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& row = report.rows[i];
      const double h = plot_h * row.percentage / max_pct;
      const double x = margin_left + slot * static_cast<double>(i) + slot * 0.15;
      const double y = margin_top + plot_h - h;
      svg += "<rect x=\"" + fmt("%.2f", x) + "\" y=\"" + fmt("%.2f", y) +
             "\" width=\"" + fmt("%.2f", bar_w) + "\" height=\"" + fmt("%.2f", h) +
             "\" fill=\"#4878a8\"/>\n";
      svg += "<text x=\"" + fmt("%.2f", x + bar_w / 2) + "\" y=\"" +
             fmt("%.2f", y - 4) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"11\">" +
             fmt("%.2f", row.percentage) + "</text>\n";
      svg += "<text x=\"" + fmt("%.2f", x + bar_w / 2) + "\" y=\"" +
             std::to_string(margin_top + plot_h + 16) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"11\">" +
             row.element + "(" + std::to_string(row.space_group) + ")</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

// ---------------------------------------------------------------------------
// Subcommand drivers

namespace {

void require_valid(const RunConfig& config) {
  const auto issues = validate_run_config(config);
  if (!issues.empty()) {
    std::string message = "invalid configuration:";
    for (const auto& issue : issues) message += "\n  " + issue;
    throw ConfigError(message);
  }
}

fs::path ensure_output_dir(const RunConfig& config) {
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw PipelineError("cannot create output directory " + dir.string());
  return dir;
}

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

}  // namespace

TrainOutputs cmd_train(const RunConfig& config) {
  require_valid(config);
  const fs::path out_dir = ensure_output_dir(config);
  const env::SurfaceEnv environment(config.search_space);
  const RewardPipeline pipeline = RewardPipeline::from_config(config);

  policy::TrainerConfig trainer = config.trainer;
  trainer.seed = config.seed;
  const auto result = policy::train<env::SurfaceEnv>(
      environment, trainer,
      [&pipeline](const env::CrystalSurfaceSpec& spec) {
        return pipeline.reward_of(spec);
      });

  Checkpoint checkpoint;
  checkpoint.config = config;
  checkpoint.params = result.params;
  checkpoint.optimizer = result.optimizer;
  checkpoint.rng_state = rng_to_string(result.rng);

  TrainOutputs outputs;
  outputs.checkpoint_path = (out_dir / "checkpoint.json").string();
  outputs.log_path = (out_dir / "train_log.csv").string();
  save_checkpoint(outputs.checkpoint_path, checkpoint);

  std::string log = "step,loss,log_z\n";
  for (const auto& entry : result.log) {
    log += std::to_string(entry.step);
    log += ',';
    log += fmt("%.17g", entry.loss);
    log += ',';
    log += fmt("%.17g", entry.log_z);
    log += '\n';
  }
  write_file(outputs.log_path, log);
  outputs.final_log_z = result.params.log_z();
  outputs.final_loss = result.log.empty() ? 0.0 : result.log.back().loss;
  return outputs;
}

std::string cmd_sample(const RunConfig& config, const std::string& checkpoint_path,
                       std::int64_t n, int threads) {
  require_valid(config);
  if (n <= 0) throw ConfigError("sample: n must be positive");
  if (threads < 1) throw ConfigError("sample: threads must be >= 1");
  const fs::path out_dir = ensure_output_dir(config);

  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  const env::SurfaceEnv environment(config.search_space);
  if (checkpoint.params.input_dim != environment.feature_dim() ||
      checkpoint.params.arities != environment.stage_arities()) {
    throw PipelineError(
        "sample: checkpoint dimensions do not match the configured search space");
  }
  const RewardPipeline pipeline = RewardPipeline::from_config(config);

  std::vector<SampleRecord> records(static_cast<std::size_t>(n));
  const auto worker = [&](int worker_idx, std::int64_t begin, std::int64_t end) {
    std::mt19937_64 rng(policy::splitmix64(
        config.seed ^ (0x53414D504C455221ULL + static_cast<std::uint64_t>(worker_idx))));
    const auto unit_reward = [](const env::CrystalSurfaceSpec&) { return 1.0; };
    for (std::int64_t i = begin; i < end; ++i) {
      const auto traj = policy::sample_trajectory<env::SurfaceEnv>(
          environment, checkpoint.params, rng, /*epsilon=*/0.0, unit_reward);
      records[static_cast<std::size_t>(i)] = pipeline.evaluate(traj.terminal);
    }
  };

  if (threads == 1) {
    worker(0, 0, n);
  } else {
    const std::int64_t chunk = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      const std::int64_t begin = std::min<std::int64_t>(w * chunk, n);
      const std::int64_t end = std::min<std::int64_t>(begin + chunk, n);
      if (begin < end) pool.emplace_back(worker, w, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  const std::string path = (out_dir / "samples.jsonl").string();
  write_samples(path, records);
  return path;
}

std::pair<std::string, std::string> cmd_filter(const RunConfig& config,
                                               const std::string& samples_path) {
  require_valid(config);
  const fs::path out_dir = ensure_output_dir(config);
  std::vector<SampleRecord> records = read_samples(samples_path);

  std::vector<bulk::FilterKey> keys;
  keys.reserve(records.size());
  for (const auto& r : records) {
    keys.push_back({r.spec.element, r.spec.space_group, r.formation_energy});
  }
  const auto statuses = bulk::classify_samples(keys, config.relaxation.energy_window);

  std::vector<SampleRecord> kept;
  for (std::size_t i = 0; i < records.size(); ++i) {
    switch (statuses[i]) {
      case bulk::FilterStatus::Kept:
        records[i].status = SampleRecord::Status::Kept;
        kept.push_back(records[i]);
        break;
      case bulk::FilterStatus::DroppedEnergy:
        records[i].status = SampleRecord::Status::DroppedEnergy;
        break;
      case bulk::FilterStatus::DroppedSpaceGroup:
        records[i].status = SampleRecord::Status::DroppedSpaceGroup;
        break;
    }
  }

  const std::string kept_path = (out_dir / "filtered.jsonl").string();
  const std::string annotated_path = (out_dir / "annotated.jsonl").string();
  write_samples(kept_path, kept);
  write_samples(annotated_path, records);
  return {kept_path, annotated_path};
}

std::pair<std::string, std::string> cmd_report(const RunConfig& config,
                                               const std::string& kept_path) {
  require_valid(config);
  const fs::path out_dir = ensure_output_dir(config);
  const auto records = read_samples(kept_path);
  std::vector<SampleRecord> kept;
  for (const auto& r : records) {
    if (r.status == SampleRecord::Status::Kept ||
        r.status == SampleRecord::Status::Unfiltered) {
      kept.push_back(r);
    }
  }
  if (kept.empty()) {
    throw PipelineError("report: no kept samples in " + kept_path);
  }
  const Report report = build_report(kept);
  const std::string csv_path = (out_dir / "report.csv").string();
  const std::string svg_path = (out_dir / "report.svg").string();
  write_file(csv_path, report_to_csv(report));
  write_file(svg_path, report_to_svg(report));
  return {csv_path, svg_path};
}

std::string cmd_enumerate(const RunConfig& config, bool uniform_reward) {
  require_valid(config);
  if (resolved_proxy_config(config).type == ProxyConfig::Type::External) {
    throw ConfigError(
        "enumerate: the exact oracle requires the tabular proxy; an external "
        "proxy is configured");
  }
  const fs::path out_dir = ensure_output_dir(config);
  const env::SurfaceEnv environment(config.search_space);
  const RewardPipeline pipeline = RewardPipeline::from_config(config);

  policy::SpecReward reward_fn;
  if (uniform_reward) {
    reward_fn = [](const env::CrystalSurfaceSpec&) { return 1.0; };
  } else {
    reward_fn = [&pipeline](const env::CrystalSurfaceSpec& spec) {
      return pipeline.reward_of(spec);
    };
  }
  const auto marginals = policy::enumerate_marginals(environment, reward_fn);

  json j;
  json elements = json::object();
  for (const auto& symbol : config.search_space.elements) {
    const int idx = env::element_index(symbol);
    elements[symbol] = marginals.probability[idx];
  }
  j["elements"] = elements;
  j["log_z"] = marginals.log_z;
  const std::string path = (out_dir / "marginals.json").string();
  write_file(path, j.dump(2) + "\n");
  return path;
}

std::string cmd_cut_surface(const RunConfig& config, const std::string& element,
                            int space_group, double lattice_a,
                            const std::array<int, 3>& miller, double offset,
                            bool face_top, const std::string& out_path) {
  if (env::element_index(element) < 0) {
    throw ConfigError("cut-surface: unknown element '" + element + "'");
  }
  if (env::space_group_index(space_group) < 0) {
    throw ConfigError("cut-surface: unsupported space group " +
                      std::to_string(space_group));
  }
  if (!(lattice_a > 0.0)) throw ConfigError("cut-surface: lattice parameter must be positive");
  if (miller[0] == 0 && miller[1] == 0 && miller[2] == 0) {
    throw ConfigError("cut-surface: Miller indices must not all be zero");
  }
  if (offset < 0.0 || offset >= 1.0) {
    throw ConfigError("cut-surface: offset must be in [0, 1)");
  }
  const bulk::BulkStructure structure = bulk::make_bulk(element, space_group, lattice_a);
  const geom::Slab slab = geom::cut_slab(structure, miller, offset, face_top,
                                         config.surface.n_layers,
                                         config.surface.min_thickness);
  std::string path = out_path;
  if (path.empty()) {
    path = (ensure_output_dir(config) / "slab.xyz").string();
  }
  write_file(path, geom::to_extended_xyz(slab));
  return path;
}

}  // namespace catflow::pipeline
