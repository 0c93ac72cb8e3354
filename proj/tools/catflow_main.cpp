// Command-line front end for the catalyst-surface sampling pipeline.
//
// Exit codes: 0 success, 1 usage/configuration error, 2 pipeline error.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "catflow/pipeline.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int threads = 1;
};

catflow::pipeline::RunConfig resolve_config(const GlobalOptions& options) {
  using catflow::pipeline::RunConfig;
  RunConfig config = options.config_path.empty()
                         ? catflow::pipeline::default_run_config()
                         : catflow::pipeline::load_run_config(options.config_path);
  if (options.seed) config.seed = *options.seed;
  if (!options.out_dir.empty()) config.output_dir = options.out_dir;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Catalyst-surface generative sampling pipeline"};
  app.require_subcommand(1);

  GlobalOptions options;
  app.add_option("--config", options.config_path, "JSON run configuration");
  app.add_option("--seed", options.seed, "Override the configured RNG seed");
  app.add_option("--out-dir", options.out_dir, "Override the output directory");
  app.add_option("--threads", options.threads, "Worker threads for sampling")
      ->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "Train the sampler against the reward");

  std::string checkpoint_path;
  std::int64_t n_samples = 1000;
  auto* sample = app.add_subcommand("sample", "Draw samples from a trained checkpoint");
  sample->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  sample->add_option("--n", n_samples, "Number of samples")->check(CLI::PositiveNumber);

  std::string samples_path;
  auto* filter = app.add_subcommand("filter", "Apply the stability filters");
  filter->add_option("--samples", samples_path, "Samples JSON-lines file")->required();

  std::string kept_path;
  auto* report = app.add_subcommand("report", "Summarize filtered samples");
  report->add_option("--samples", kept_path, "Filtered samples file")->required();

  bool uniform_reward = false;
  auto* enumerate = app.add_subcommand("enumerate", "Exact reward-proportional marginals");
  enumerate->add_flag("--uniform-reward", uniform_reward,
                      "Replace the reward with 1 (debug)");

  std::string cut_element = "Pt";
  int cut_sg = 225;
  double cut_a = 3.9242;
  std::vector<int> cut_miller = {1, 1, 1};
  double cut_offset = 0.0;
  std::string cut_face = "top";
  std::string cut_out;
  auto* cut = app.add_subcommand("cut-surface", "Write one slab as extended XYZ");
  cut->add_option("--element", cut_element, "Element symbol")->required();
  cut->add_option("--space-group", cut_sg, "Space group (225 or 229)")->required();
  cut->add_option("--lattice", cut_a, "Lattice parameter in Angstrom")->required();
  cut->add_option("--miller", cut_miller, "Miller indices h k l")
      ->expected(3)
      ->required();
  cut->add_option("--offset", cut_offset, "Cut offset in [0,1)");
  cut->add_option("--face", cut_face, "top or bottom")
      ->check(CLI::IsMember({"top", "bottom"}));
  cut->add_option("--out", cut_out, "Output path (default <out-dir>/slab.xyz)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const auto config = resolve_config(options);
    if (train->parsed()) {
      const auto outputs = catflow::pipeline::cmd_train(config);
      std::cout << "checkpoint: " << outputs.checkpoint_path << "\n"
                << "train log:  " << outputs.log_path << "\n"
                << "final log_z = " << outputs.final_log_z
                << ", final loss = " << outputs.final_loss << "\n";
    } else if (sample->parsed()) {
      const auto path = catflow::pipeline::cmd_sample(config, checkpoint_path,
                                                      n_samples, options.threads);
      std::cout << "samples: " << path << "\n";
    } else if (filter->parsed()) {
      const auto [kept, annotated] = catflow::pipeline::cmd_filter(config, samples_path);
      std::cout << "kept:      " << kept << "\n"
                << "annotated: " << annotated << "\n";
    } else if (report->parsed()) {
      const auto [csv, svg] = catflow::pipeline::cmd_report(config, kept_path);
      std::cout << "report csv: " << csv << "\n"
                << "report svg: " << svg << "\n";
    } else if (enumerate->parsed()) {
      const auto path = catflow::pipeline::cmd_enumerate(config, uniform_reward);
      std::cout << "marginals: " << path << "\n";
    } else if (cut->parsed()) {
      const auto path = catflow::pipeline::cmd_cut_surface(
          config, cut_element, cut_sg, cut_a,
          {cut_miller[0], cut_miller[1], cut_miller[2]}, cut_offset,
          cut_face == "top", cut_out);
      std::cout << "slab: " << path << "\n";
    }
  } catch (const catflow::pipeline::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
