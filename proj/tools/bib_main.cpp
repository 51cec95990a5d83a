// Command-line entry points: gen-task writes a landscape + offline split
// file, run executes a configured experiment, report aggregates summaries
// into a cross-task ranking table.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "bib/harness.hpp"
#include "bib/kernels.hpp"
#include "bib/rng.hpp"

namespace {

std::string default_output_dir() {
  if (const char* env = std::getenv("BIB_OUTPUT_DIR")) return env;
  return ".";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bib: offline gradient-based sequence design on synthetic landscapes"};
  app.require_subcommand(1);

  // gen-task
  auto* gen = app.add_subcommand("gen-task", "generate a seeded landscape and offline split");
  std::uint64_t seed = 1;
  int length = 8, alphabet = 4, nk_neighbors = 4;
  std::string order = "pairwise", name, out_path;
  std::size_t size = 512;
  double cap = 0.5;
  std::uint64_t split_seed = 0;
  bool has_split_seed = false, force = false;
  gen->add_option("--seed", seed, "landscape seed")->required();
  gen->add_option("--length,-L", length, "sequence length")->required();
  gen->add_option("--alphabet,-A", alphabet, "alphabet size")->required();
  gen->add_option("--order", order, "linear | pairwise | nk")->required();
  gen->add_option("--nk-neighbors", nk_neighbors, "NK neighborhood size (order=nk)");
  gen->add_option("--size", size, "offline split size");
  gen->add_option("--cap", cap, "score percentile cap for the split");
  gen->add_option("--split-seed", split_seed, "split sampling seed (default: derived)")
      ->each([&](const std::string&) { has_split_seed = true; });
  gen->add_option("--name", name, "task name (default: derived)");
  gen->add_option("--out,-o", out_path, "output file (default: <name>.task in BIB_OUTPUT_DIR)");
  gen->add_flag("--force", force, "override the design size guard");

  // run
  auto* run = app.add_subcommand("run", "run a configured experiment");
  std::string config_path, output_dir;
  int workers_override = 0;
  run->add_option("--config,-c", config_path, "experiment config (JSON)")->required();
  run->add_option("--output-dir,-o", output_dir, "override the output directory");
  run->add_option("--workers", workers_override, "override the worker count");

  // report
  auto* report = app.add_subcommand("report", "rank methods across summary files");
  std::vector<std::string> summaries;
  report->add_option("summaries", summaries, "summary.json files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      bib::LandscapeSpec spec;
      spec.seed = seed;
      spec.length = length;
      spec.alphabet = alphabet;
      spec.order = bib::order_from_string(order);
      spec.nk_neighbors = nk_neighbors;
      if (name.empty())
        name = order + "-L" + std::to_string(length) + "-A" + std::to_string(alphabet) + "-s" +
               std::to_string(seed);
      if (!has_split_seed) split_seed = bib::mix_seed({seed, bib::hash_bytes("split")});
      const bib::LoadedTask task = bib::make_task(spec, size, cap, split_seed, name, force);
      if (out_path.empty())
        out_path = (std::filesystem::path(default_output_dir()) / (name + ".task")).string();
      bib::write_task_file(out_path, task);
      std::cout << "task\t" << name << "\n"
                << "file\t" << out_path << "\n"
                << "space\t" << task.landscape.space_size() << "\n"
                << "bounds\t" << bib::format_double(task.landscape.min_entire()) << "\t"
                << bib::format_double(task.landscape.max_entire()) << "\t"
                << task.landscape.bound_method() << "\n"
                << "split\t" << task.split.size() << "\tcap\t" << bib::format_double(cap) << "\n";
      return 0;
    }

    if (run->parsed()) {
      bib::ExperimentConfig config = bib::load_experiment_config(config_path);
      if (!output_dir.empty()) config.output_dir = output_dir;
      if (workers_override > 0) config.workers = workers_override;
      std::cerr << "[bib] kernels: " << bib::kern::isa_name(bib::kern::active_isa()) << "\n";
      const bib::ExperimentResult result = bib::run_experiment(config, &std::cerr);
      std::cout << "summary\t" << result.summary_path << "\n"
                << "config_hash\t" << result.hash << "\n"
                << "complete\t" << (result.all_complete ? "yes" : "no") << "\n";
      return result.all_complete ? 0 : 1;
    }

    if (report->parsed()) {
      const bib::RankingTable table = bib::build_ranking(summaries);
      std::cout << bib::format_ranking(table);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
