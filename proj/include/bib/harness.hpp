#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bib/embedder.hpp"
#include "bib/landscape.hpp"
#include "bib/optimizer.hpp"
#include "bib/sequence.hpp"

// Experiment orchestration: config loading, task file IO, multi-trial runs
// fanned out over a worker pool, run-record CSVs, the JSON summary, and the
// cross-task ranking report.

namespace bib {

struct TaskFileMeta {
  std::string name;
  double percentile_cap = 0.5;
  double cap_threshold = 0.0;
  std::uint64_t split_seed = 0;
  std::size_t split_size = 0;
};

struct LoadedTask {
  Landscape landscape;
  OfflineSplit split;
  TaskFileMeta meta;
};

// Header lines (key<TAB>value) followed by sequence<TAB>score rows.
void write_task_file(const std::string& path, const LoadedTask& task);
LoadedTask load_task_file(const std::string& path);

// Canonical construction order: generate landscape, build the split, then
// widen the bounds with the split scores.
LoadedTask make_task(const LandscapeSpec& spec, std::size_t split_size, double percentile_cap,
                     std::uint64_t split_seed, const std::string& name, bool allow_large = false);

struct TaskDefinition {
  std::string name;
  std::string path;  // when set, the task is loaded instead of generated
  LandscapeSpec spec;
  std::size_t split_size = 512;
  double percentile_cap = 0.5;
  std::optional<std::uint64_t> split_seed;  // default: derived from the task seed
  std::optional<int> candidates;            // per-task override
  std::optional<double> y_h;
  std::optional<EmbedderSpec> embedder;
};

struct MethodSpec {
  Method method = Method::bib;
  std::string label;
  bool adaptive_eta = false;
  std::optional<double> gamma0;
};

struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  int trials = 16;
  int candidates = 128;
  int workers = 1;
  std::size_t n_eval = 128;
  std::string output_dir;
  bool save_designs = false;
  EmbedderSpec embedder;
  RunConfig run;  // per-method fields overridden by MethodSpec
  std::vector<TaskDefinition> tasks;
  std::vector<MethodSpec> methods;

  void validate() const;
};

// Relative task paths resolve against base_dir (the config file's directory
// in load_experiment_config).
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::string& base_dir = ".");
std::string config_hash(const ExperimentConfig& config);

// init noise is shared by every method within a trial so comparisons pair up
std::uint64_t trial_init_seed(std::uint64_t master_seed, int trial, int candidate);

struct MethodTaskResult {
  std::string task;
  std::string label;
  EvaluationReport report;
  std::string csv_path;
  bool complete = true;
};

struct ExperimentResult {
  std::vector<MethodTaskResult> results;
  std::string summary_path;
  std::string hash;
  bool all_complete = true;
};

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

// formatting shared by the CSV writer and the tests
std::string format_double(double v);

// Rank aggregation over one or more summary JSON files.
struct RankingRow {
  std::string label;
  std::vector<double> per_task_rank;
  double rank_mean = 0.0;
  double rank_median = 0.0;
};

struct RankingTable {
  std::vector<std::string> tasks;
  std::vector<RankingRow> rows;  // sorted by rank mean
};

RankingTable build_ranking(const std::vector<std::string>& summary_paths);
std::string format_ranking(const RankingTable& table);

}  // namespace bib
