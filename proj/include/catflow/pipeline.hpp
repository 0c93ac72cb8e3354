#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "catflow/bulk.hpp"
#include "catflow/external_proxy.hpp"
#include "catflow/geometry.hpp"
#include "catflow/oracle.hpp"
#include "catflow/policy.hpp"
#include "catflow/proxy.hpp"
#include "catflow/surface_env.hpp"
#include "catflow/trainer.hpp"

namespace catflow::pipeline {

// Environment variable overriding the external proxy command.
inline constexpr const char* kExternalProxyEnvVar = "CATFLOW_EXTERNAL_PROXY";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RelaxationConfig {
  double window = 1.0;         // Angstrom, basin limit around the sampled a
  double energy_window = 0.05; // eV/atom stability cut
};

struct SurfaceConfig {
  int n_layers = 4;
  double min_thickness = 8.0;  // Angstrom
  double cutoff = 6.0;         // Angstrom, graph edge cutoff
  std::string adsorbate = "H";
  double adsorbate_height = 2.0;
};

struct ProxyConfig {
  enum class Type { Tabular, External };
  Type type = Type::Tabular;
  std::string table_path = "data/proxy_table.json";
  std::string command;                // external proxy command line
  double timeout_seconds = 30.0;
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::string output_dir = "runs/out";
  env::EnvConfig search_space;
  policy::TrainerConfig trainer;
  proxy::RewardConfig reward;
  RelaxationConfig relaxation;
  SurfaceConfig surface;
  ProxyConfig proxy;
  std::string energy_table_path = "data/energy_table.json";
};

RunConfig default_run_config();
RunConfig run_config_from_json_text(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& config);

// Field-path diagnostics for every violated constraint; empty means valid.
std::vector<std::string> validate_run_config(const RunConfig& config);

// One sampled structure with every derived pipeline quantity.
struct SampleRecord {
  env::CrystalSurfaceSpec spec;
  double lattice_a_star = 0.0;
  double formation_energy = 0.0;  // eV/atom
  double e_h = 0.0;               // eV
  double eta = 0.0;               // eV
  double reward = 0.0;

  enum class Status { Unfiltered, Kept, DroppedEnergy, DroppedSpaceGroup };
  Status status = Status::Unfiltered;
};

const char* status_name(SampleRecord::Status status);

std::string record_to_json_line(const SampleRecord& record);
SampleRecord record_from_json_line(const std::string& line);

std::vector<SampleRecord> read_samples(const std::string& path);
void write_samples(const std::string& path, const std::vector<SampleRecord>& records);

// Shared reward path: decode -> bulk -> relax -> cut -> graph -> proxy ->
// overpotential -> reward. Owns the loaded tables and, when configured, the
// external proxy process.
class RewardPipeline {
 public:
  RewardPipeline(const RunConfig& config, bulk::EnergyTable energy_table,
                 proxy::ProxyTable proxy_table);

  static RewardPipeline from_config(const RunConfig& config);

  SampleRecord evaluate(const env::CrystalSurfaceSpec& spec) const;
  double reward_of(const env::CrystalSurfaceSpec& spec) const;

  const bulk::EnergyTable& energy_table() const { return energy_table_; }
  const proxy::ProxyTable& proxy_table() const { return proxy_table_; }
  bool uses_external_proxy() const { return external_ != nullptr; }

 private:
  proxy::RewardConfig reward_;
  RelaxationConfig relaxation_;
  SurfaceConfig surface_;
  bulk::EnergyTable energy_table_;
  proxy::ProxyTable proxy_table_;
  std::unique_ptr<proxy::ExternalProxyClient> external_;
};

// Checkpoint file: versioned JSON with the config echo, flattened parameters
// and optimizer moments (base64 little-endian doubles), and the sampler RNG
// state.
struct Checkpoint {
  int version = 1;
  RunConfig config;
  policy::PolicyParams params;
  policy::AdamState optimizer;
  std::string rng_state;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

struct ReportRow {
  std::string element;
  int space_group = 0;
  double eta = 0.0;
  std::int64_t count = 0;
  double percentage = 0.0;  // largest-remainder rounded to 2 decimals
};

struct Report {
  std::vector<ReportRow> rows;  // sorted by count descending
  std::int64_t total = 0;
};

Report build_report(const std::vector<SampleRecord>& kept);
std::string report_to_csv(const Report& report);
std::string report_to_svg(const Report& report);

struct TrainOutputs {
  std::string checkpoint_path;
  std::string log_path;
  double final_log_z = 0.0;
  double final_loss = 0.0;
};

// Subcommand drivers; paths are resolved against the configured output
// directory, which is created on demand.
TrainOutputs cmd_train(const RunConfig& config);
std::string cmd_sample(const RunConfig& config, const std::string& checkpoint_path,
                       std::int64_t n, int threads = 1);
// Returns (kept_path, annotated_path).
std::pair<std::string, std::string> cmd_filter(const RunConfig& config,
                                               const std::string& samples_path);
// Returns (csv_path, svg_path).
std::pair<std::string, std::string> cmd_report(const RunConfig& config,
                                               const std::string& kept_path);
std::string cmd_enumerate(const RunConfig& config, bool uniform_reward = false);
std::string cmd_cut_surface(const RunConfig& config, const std::string& element,
                            int space_group, double lattice_a,
                            const std::array<int, 3>& miller, double offset,
                            bool face_top, const std::string& out_path);

// base64 helpers shared by checkpoint IO and its tests
std::string base64_encode(const std::uint8_t* data, std::size_t size);
std::vector<std::uint8_t> base64_decode(const std::string& text);
std::string encode_doubles(const Eigen::VectorXd& values);
Eigen::VectorXd decode_doubles(const std::string& text);

}  // namespace catflow::pipeline
