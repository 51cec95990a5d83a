#include "bib/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "bib/rng.hpp"

namespace bib {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad number: " + s);
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::size_t pos = 0;
  const std::uint64_t v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad integer: " + s);
  return v;
}

std::string sanitize_label(const std::string& label) {
  std::string out;
  for (char c : label)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_');
  return out;
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key))
      throw std::invalid_argument("unknown config key '" + key + "' in " + where);
  }
}

}  // namespace

void write_task_file(const std::string& path, const LoadedTask& task) {
  std::ostringstream out;
  const LandscapeSpec& spec = task.landscape.spec();
  out << "#bib-task v1\n";
  out << "name\t" << task.meta.name << "\n";
  out << "seed\t" << spec.seed << "\n";
  out << "L\t" << spec.length << "\n";
  out << "A\t" << spec.alphabet << "\n";
  out << "order\t" << order_to_string(spec.order) << "\n";
  out << "nk_neighbors\t" << spec.nk_neighbors << "\n";
  out << "alphabet\t" << task.landscape.alphabet().labels << "\n";
  out << "bound_method\t" << task.landscape.bound_method() << "\n";
  out << "min_entire\t" << format_double(task.landscape.min_entire()) << "\n";
  out << "max_entire\t" << format_double(task.landscape.max_entire()) << "\n";
  out << "percentile_cap\t" << format_double(task.meta.percentile_cap) << "\n";
  out << "cap_threshold\t" << format_double(task.meta.cap_threshold) << "\n";
  out << "split_seed\t" << task.meta.split_seed << "\n";
  out << "split_size\t" << task.split.size() << "\n";
  out << "sequences\n";
  for (std::size_t i = 0; i < task.split.size(); ++i)
    out << tokens_to_string(task.split.sequences[i].tokens, task.landscape.alphabet()) << "\t"
        << format_double(task.split.scores[i]) << "\n";

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write task file: " + path);
  f << out.str();
}

LoadedTask load_task_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read task file: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "#bib-task v1")
    throw std::runtime_error("not a bib task file: " + path);

  std::map<std::string, std::string> header;
  while (std::getline(f, line)) {
    if (line == "sequences") break;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("malformed task header line: " + line);
    header[line.substr(0, tab)] = line.substr(tab + 1);
  }
  auto need = [&](const char* key) -> const std::string& {
    const auto it = header.find(key);
    if (it == header.end())
      throw std::runtime_error(std::string("task header missing key: ") + key);
    return it->second;
  };

  LandscapeSpec spec;
  spec.seed = parse_u64(need("seed"));
  spec.length = static_cast<int>(parse_u64(need("L")));
  spec.alphabet = static_cast<int>(parse_u64(need("A")));
  spec.order = order_from_string(need("order"));
  spec.nk_neighbors = static_cast<int>(parse_u64(need("nk_neighbors")));

  LoadedTask task{
      Landscape::from_stored_bounds(spec, parse_double(need("min_entire")),
                                    parse_double(need("max_entire")), need("bound_method")),
      OfflineSplit{},
      TaskFileMeta{need("name"), parse_double(need("percentile_cap")),
                   parse_double(need("cap_threshold")), parse_u64(need("split_seed")),
                   static_cast<std::size_t>(parse_u64(need("split_size")))}};
  if (task.landscape.alphabet().labels != need("alphabet"))
    throw std::runtime_error("task alphabet labels mismatch");

  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("malformed task row: " + line);
    const auto tokens = string_to_tokens(line.substr(0, tab), task.landscape.alphabet());
    const double stored = parse_double(line.substr(tab + 1));
    const double recomputed = task.landscape.score(tokens);
    if (stored != recomputed)
      throw std::runtime_error("task file score disagrees with the landscape oracle");
    task.split.sequences.push_back(OneHotSequence{tokens, spec.alphabet});
    task.split.scores.push_back(stored);
  }
  if (task.split.size() != task.meta.split_size)
    throw std::runtime_error("task file row count disagrees with split_size");
  task.split.validate();
  return task;
}

LoadedTask make_task(const LandscapeSpec& spec, std::size_t split_size, double percentile_cap,
                     std::uint64_t split_seed, const std::string& name, bool allow_large) {
  LoadedTask task{Landscape::generate(spec, allow_large), OfflineSplit{}, TaskFileMeta{}};
  task.meta.name = name;
  task.meta.percentile_cap = percentile_cap;
  task.meta.cap_threshold = task.landscape.quantile(percentile_cap);
  task.meta.split_seed = split_seed;
  task.meta.split_size = split_size;
  task.split = build_offline_split(task.landscape, split_size, percentile_cap, split_seed);
  task.landscape.absorb_scores(task.split.scores);
  return task;
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (candidates < 1) throw std::invalid_argument("candidates must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (n_eval < 1) throw std::invalid_argument("n_eval must be >= 1");
  if (tasks.empty()) throw std::invalid_argument("no tasks configured");
  if (methods.empty()) throw std::invalid_argument("no methods configured");
  run.validate();
  std::set<std::string> labels;
  for (const auto& m : methods)
    if (!labels.insert(m.label).second)
      throw std::invalid_argument("duplicate method label: " + m.label);
  std::set<std::string> names;
  for (const auto& t : tasks) {
    if (t.name.empty()) throw std::invalid_argument("task without a name");
    if (!names.insert(t.name).second) throw std::invalid_argument("duplicate task name: " + t.name);
  }
}

namespace {

EmbedderSpec parse_embedder_spec(const json& j, const EmbedderSpec& base) {
  check_keys(j, {"kind", "feature_dim", "seed", "hidden_width", "k"}, "embedder");
  EmbedderSpec spec = base;
  if (j.contains("kind")) spec.kind = embedder_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("feature_dim")) spec.feature_dim = j.at("feature_dim").get<int>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("hidden_width")) spec.hidden_width = j.at("hidden_width").get<int>();
  if (j.contains("k")) spec.k = j.at("k").get<int>();
  return spec;
}

json embedder_spec_json(const EmbedderSpec& spec) {
  json j;
  j["kind"] = embedder_kind_to_string(spec.kind);
  j["feature_dim"] = spec.feature_dim;
  j["seed"] = spec.seed;
  j["hidden_width"] = spec.hidden_width;
  j["k"] = spec.k;
  return j;
}

std::string default_method_label(const MethodSpec& m) {
  std::string label = method_to_string(m.method);
  if (m.method == Method::fixed_gamma || m.method == Method::joint_gamma) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", m.gamma0.value_or(0.5));
    label += "-";
    label += buf;
  }
  if (m.adaptive_eta) label += "+ada-eta";
  return label;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::string& base_dir) {
  const json j = json::parse(json_text);
  check_keys(j,
             {"master_seed", "trials", "candidates", "workers", "n_eval", "output_dir",
              "save_designs", "embedder", "run", "tasks", "methods"},
             "config");

  ExperimentConfig cfg;
  if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
  if (j.contains("candidates")) cfg.candidates = j.at("candidates").get<int>();
  if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
  if (j.contains("n_eval")) cfg.n_eval = j.at("n_eval").get<std::size_t>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("save_designs")) cfg.save_designs = j.at("save_designs").get<bool>();
  if (j.contains("embedder")) cfg.embedder = parse_embedder_spec(j.at("embedder"), EmbedderSpec{});

  if (j.contains("run")) {
    const json& r = j.at("run");
    check_keys(r,
               {"iterations", "y_h", "gamma0", "eta0", "outer_rate_gamma", "outer_rate_eta",
                "beta", "beta_aux", "paper_verbatim_loss", "paper_verbatim_sign",
                "baseline_head_std", "baseline_head_seed", "adam"},
               "run");
    RunConfig& rc = cfg.run;
    if (r.contains("iterations")) rc.iterations = r.at("iterations").get<int>();
    if (r.contains("y_h")) rc.y_h = r.at("y_h").get<double>();
    if (r.contains("gamma0")) rc.gamma0 = r.at("gamma0").get<double>();
    if (r.contains("eta0")) rc.eta0 = r.at("eta0").get<double>();
    if (r.contains("outer_rate_gamma")) rc.outer_rate_gamma = r.at("outer_rate_gamma").get<double>();
    if (r.contains("outer_rate_eta")) rc.outer_rate_eta = r.at("outer_rate_eta").get<double>();
    if (r.contains("beta")) rc.beta = r.at("beta").get<double>();
    if (r.contains("beta_aux")) rc.beta_aux = r.at("beta_aux").get<double>();
    if (r.contains("paper_verbatim_loss"))
      rc.paper_verbatim_loss = r.at("paper_verbatim_loss").get<bool>();
    if (r.contains("paper_verbatim_sign"))
      rc.paper_verbatim_sign = r.at("paper_verbatim_sign").get<bool>();
    if (r.contains("baseline_head_std"))
      rc.baseline_head_std = r.at("baseline_head_std").get<double>();
    if (r.contains("baseline_head_seed"))
      rc.baseline_head_seed = r.at("baseline_head_seed").get<std::uint64_t>();
    if (r.contains("adam")) {
      const json& a = r.at("adam");
      check_keys(a, {"beta1", "beta2", "eps"}, "adam");
      if (a.contains("beta1")) rc.adam.beta1 = a.at("beta1").get<double>();
      if (a.contains("beta2")) rc.adam.beta2 = a.at("beta2").get<double>();
      if (a.contains("eps")) rc.adam.eps = a.at("eps").get<double>();
    }
  }

  if (!j.contains("tasks")) throw std::invalid_argument("config needs a tasks array");
  for (const json& t : j.at("tasks")) {
    check_keys(t,
               {"name", "path", "seed", "length", "alphabet", "order", "nk_neighbors",
                "split_size", "percentile_cap", "split_seed", "candidates", "y_h", "embedder"},
               "task");
    TaskDefinition def;
    if (t.contains("name")) def.name = t.at("name").get<std::string>();
    if (t.contains("path")) {
      fs::path p = t.at("path").get<std::string>();
      if (p.is_relative()) p = fs::path(base_dir) / p;
      def.path = p.lexically_normal().string();
    }
    if (def.path.empty()) {
      if (!t.contains("seed") || !t.contains("length") || !t.contains("alphabet") ||
          !t.contains("order"))
        throw std::invalid_argument("inline task needs seed, length, alphabet and order");
      def.spec.seed = t.at("seed").get<std::uint64_t>();
      def.spec.length = t.at("length").get<int>();
      def.spec.alphabet = t.at("alphabet").get<int>();
      def.spec.order = order_from_string(t.at("order").get<std::string>());
      if (t.contains("nk_neighbors")) def.spec.nk_neighbors = t.at("nk_neighbors").get<int>();
      if (t.contains("split_size")) def.split_size = t.at("split_size").get<std::size_t>();
      if (t.contains("percentile_cap")) def.percentile_cap = t.at("percentile_cap").get<double>();
      if (t.contains("split_seed")) def.split_seed = t.at("split_seed").get<std::uint64_t>();
      if (def.name.empty()) throw std::invalid_argument("inline task needs a name");
    }
    if (t.contains("candidates")) def.candidates = t.at("candidates").get<int>();
    if (t.contains("y_h")) def.y_h = t.at("y_h").get<double>();
    if (t.contains("embedder")) def.embedder = parse_embedder_spec(t.at("embedder"), cfg.embedder);
    cfg.tasks.push_back(std::move(def));
  }

  if (!j.contains("methods")) throw std::invalid_argument("config needs a methods array");
  for (const json& m : j.at("methods")) {
    check_keys(m, {"method", "label", "adaptive_eta", "gamma0"}, "method");
    MethodSpec spec;
    spec.method = method_from_string(m.at("method").get<std::string>());
    if (m.contains("adaptive_eta")) spec.adaptive_eta = m.at("adaptive_eta").get<bool>();
    if (m.contains("gamma0")) spec.gamma0 = m.at("gamma0").get<double>();
    spec.label = m.contains("label") ? m.at("label").get<std::string>()
                                     : default_method_label(spec);
    cfg.methods.push_back(std::move(spec));
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const auto dir = fs::path(path).parent_path();
  return parse_experiment_config(ss.str(), dir.empty() ? "." : dir.string());
}

std::string config_hash(const ExperimentConfig& cfg) {
  // canonical dump of the parsed config; key order is sorted by nlohmann
  json j;
  j["master_seed"] = cfg.master_seed;
  j["trials"] = cfg.trials;
  j["candidates"] = cfg.candidates;
  j["n_eval"] = cfg.n_eval;
  j["save_designs"] = cfg.save_designs;
  j["embedder"] = embedder_spec_json(cfg.embedder);
  j["run"] = {{"iterations", cfg.run.iterations},
              {"y_h", cfg.run.y_h},
              {"gamma0", cfg.run.gamma0},
              {"eta0", cfg.run.eta0},
              {"outer_rate_gamma", cfg.run.outer_rate_gamma},
              {"outer_rate_eta", cfg.run.outer_rate_eta},
              {"beta", cfg.run.beta},
              {"beta_aux", cfg.run.beta_aux},
              {"paper_verbatim_loss", cfg.run.paper_verbatim_loss},
              {"paper_verbatim_sign", cfg.run.paper_verbatim_sign},
              {"baseline_head_std", cfg.run.baseline_head_std},
              {"baseline_head_seed", cfg.run.baseline_head_seed},
              {"adam", {{"beta1", cfg.run.adam.beta1},
                        {"beta2", cfg.run.adam.beta2},
                        {"eps", cfg.run.adam.eps}}}};
  j["tasks"] = json::array();
  for (const auto& t : cfg.tasks) {
    json tj;
    tj["name"] = t.name;
    tj["path"] = t.path;
    tj["seed"] = t.spec.seed;
    tj["length"] = t.spec.length;
    tj["alphabet"] = t.spec.alphabet;
    tj["order"] = order_to_string(t.spec.order);
    tj["nk_neighbors"] = t.spec.nk_neighbors;
    tj["split_size"] = t.split_size;
    tj["percentile_cap"] = t.percentile_cap;
    if (t.split_seed) tj["split_seed"] = *t.split_seed;
    if (t.candidates) tj["candidates"] = *t.candidates;
    if (t.y_h) tj["y_h"] = *t.y_h;
    if (t.embedder) tj["embedder"] = embedder_spec_json(*t.embedder);
    j["tasks"].push_back(tj);
  }
  j["methods"] = json::array();
  for (const auto& m : cfg.methods) {
    json mj;
    mj["method"] = method_to_string(m.method);
    mj["label"] = m.label;
    mj["adaptive_eta"] = m.adaptive_eta;
    if (m.gamma0) mj["gamma0"] = *m.gamma0;
    j["methods"].push_back(mj);
  }
  // note: workers and output_dir are intentionally outside the hash; they
  // must not change the results
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash_bytes(j.dump())));
  return buf;
}

std::uint64_t trial_init_seed(std::uint64_t master_seed, int trial, int candidate) {
  return mix_seed({master_seed, hash_bytes("trial-init"), static_cast<std::uint64_t>(trial),
                   static_cast<std::uint64_t>(candidate)});
}

namespace {

struct PreparedTask {
  const TaskDefinition* def = nullptr;
  LoadedTask data;
  Embedder embedder;
  RidgeModel ridge;
  AuxiliaryModel aux;
  int candidates = 0;
  double y_h = 0.0;
  double d_best = 0.0;
};

struct TrialOutput {
  std::vector<Trajectory> trajectories;
  double max_normalized = 0.0;
  bool complete = true;
  std::string error;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  config.validate();

  std::string outdir = config.output_dir;
  if (outdir.empty()) {
    if (const char* env = std::getenv("BIB_OUTPUT_DIR")) outdir = env;
    if (outdir.empty()) outdir = "bib-out";
  }
  fs::create_directories(outdir);

  ExperimentResult result;
  result.hash = config_hash(config);

  // shared per-task models; the offline split is fixed, so one fit serves
  // every method and trial
  std::vector<PreparedTask> prepared;
  prepared.reserve(config.tasks.size());
  for (const auto& def : config.tasks) {
    PreparedTask p;
    p.def = &def;
    if (!def.path.empty()) {
      p.data = load_task_file(def.path);
      if (!def.name.empty()) p.data.meta.name = def.name;
    } else {
      const std::uint64_t split_seed =
          def.split_seed ? *def.split_seed : mix_seed({def.spec.seed, hash_bytes("split")});
      p.data = make_task(def.spec, def.split_size, def.percentile_cap, split_seed, def.name,
                         /*allow_large=*/false);
    }
    p.candidates = def.candidates.value_or(config.candidates);
    p.y_h = def.y_h.value_or(config.run.y_h);
    if (static_cast<std::size_t>(p.candidates) > p.data.split.size())
      throw std::invalid_argument("candidates exceed the offline split size for task " +
                                  p.data.meta.name);

    const EmbedderSpec espec = def.embedder.value_or(config.embedder);
    p.embedder = Embedder::build(espec, p.data.split.sequences.front().length(),
                                 static_cast<std::size_t>(p.data.landscape.spec().alphabet));
    RidgeOptions ropts;
    ropts.beta = config.run.beta;
    ropts.paper_verbatim_loss = config.run.paper_verbatim_loss;
    ropts.baseline_head_std = config.run.baseline_head_std;
    ropts.baseline_head_seed = config.run.baseline_head_seed;
    p.ridge = fit_ridge(p.data.split, p.embedder, ropts);
    p.aux = fit_auxiliary(p.data.split, p.embedder, config.run.beta_aux);

    double best = -std::numeric_limits<double>::infinity();
    for (double y : p.data.split.scores) best = std::max(best, p.data.landscape.normalize(y));
    p.d_best = best;

    if (log)
      *log << "[bib] task " << p.data.meta.name << ": split " << p.data.split.size()
           << ", bounds " << p.data.landscape.bound_method() << ", D(best) "
           << format_double(p.d_best) << "\n";
    prepared.push_back(std::move(p));
  }

  // fan out (task, method, trial) items over the worker pool; each slot is
  // written by exactly one worker so the assembly below is order-independent
  struct Item {
    std::size_t task = 0;
    std::size_t method = 0;
    int trial = 0;
  };
  std::vector<Item> items;
  for (std::size_t t = 0; t < prepared.size(); ++t)
    for (std::size_t m = 0; m < config.methods.size(); ++m)
      for (int trial = 0; trial < config.trials; ++trial) items.push_back({t, m, trial});
  std::vector<TrialOutput> outputs(items.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      const Item& item = items[i];
      const PreparedTask& p = prepared[item.task];
      const MethodSpec& mspec = config.methods[item.method];
      TrialOutput& out = outputs[i];
      try {
        RunConfig rc = config.run;
        rc.method = mspec.method;
        rc.adaptive_eta = mspec.adaptive_eta;
        if (mspec.gamma0) rc.gamma0 = *mspec.gamma0;
        rc.y_h = p.y_h;

        TaskModel tm{&p.data.split, &p.embedder, &p.ridge, &p.aux};
        std::vector<CandidateResult> finals;
        finals.reserve(static_cast<std::size_t>(p.candidates));
        for (int cand = 0; cand < p.candidates; ++cand) {
          Trajectory traj = run_trajectory(
              tm, rc, static_cast<std::size_t>(cand),
              trial_init_seed(config.master_seed, item.trial, cand));
          if (traj.aborted || traj.steps.size() != static_cast<std::size_t>(rc.iterations)) {
            out.complete = false;
            out.error = traj.aborted ? traj.abort_reason : "short trajectory";
          }
          const auto phi = p.embedder.embed(
              OneHotSequence{traj.final_tokens, p.data.split.sequences.front().alphabet});
          finals.push_back(CandidateResult{traj.final_tokens, p.aux.predict(phi)});
          out.trajectories.push_back(std::move(traj));
        }
        out.max_normalized =
            evaluate_topN(finals, p.data.landscape, config.n_eval).max_normalized;
      } catch (const std::exception& e) {
        out.complete = false;
        out.error = e.what();
      }
    }
  };
  {
    std::vector<std::thread> threads;
    const int n_workers = std::min<int>(config.workers, static_cast<int>(items.size()));
    threads.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }

  // deterministic assembly: rows ordered by (trial, candidate, step)
  ordered_json summary;
  summary["format"] = "bib-summary v1";
  summary["config_hash"] = result.hash;
  summary["master_seed"] = config.master_seed;
  summary["trials"] = config.trials;
  summary["n_eval"] = config.n_eval;
  summary["tasks"] = ordered_json::array();

  for (std::size_t t = 0; t < prepared.size(); ++t) {
    const PreparedTask& p = prepared[t];
    ordered_json tj;
    tj["name"] = p.data.meta.name;
    tj["seed"] = p.data.landscape.spec().seed;
    tj["L"] = p.data.landscape.spec().length;
    tj["A"] = p.data.landscape.spec().alphabet;
    tj["order"] = order_to_string(p.data.landscape.spec().order);
    tj["bound_method"] = p.data.landscape.bound_method();
    tj["min_entire"] = p.data.landscape.min_entire();
    tj["max_entire"] = p.data.landscape.max_entire();
    tj["split_size"] = p.data.split.size();
    tj["candidates"] = p.candidates;
    tj["y_h"] = p.y_h;
    tj["d_best"] = p.d_best;
    tj["methods"] = ordered_json::array();

    for (std::size_t m = 0; m < config.methods.size(); ++m) {
      const MethodSpec& mspec = config.methods[m];
      const std::string csv_name =
          sanitize_label(p.data.meta.name) + "__" + sanitize_label(mspec.label) + ".csv";
      const std::string csv_path = (fs::path(outdir) / csv_name).string();

      std::ostringstream csv;
      csv << "trial,candidate,step,l2h,h2l,gamma,eta,aux_score,sequence\n";
      std::vector<double> per_trial;
      bool method_complete = true;
      std::ostringstream designs;
      for (int trial = 0; trial < config.trials; ++trial) {
        const std::size_t slot =
            (t * config.methods.size() + m) * static_cast<std::size_t>(config.trials) +
            static_cast<std::size_t>(trial);
        const TrialOutput& out = outputs[slot];
        method_complete = method_complete && out.complete;
        per_trial.push_back(out.max_normalized);
        for (std::size_t cand = 0; cand < out.trajectories.size(); ++cand) {
          const Trajectory& traj = out.trajectories[cand];
          for (const StepRecord& rec : traj.steps) {
            csv << trial << ',' << cand << ',' << rec.step << ',' << format_double(rec.l2h)
                << ',' << format_double(rec.h2l) << ',' << format_double(rec.gamma) << ','
                << format_double(rec.eta) << ',' << format_double(rec.aux_score) << ','
                << tokens_to_string(rec.tokens, p.data.landscape.alphabet()) << '\n';
          }
          if (config.save_designs) {
            designs << trial << '\t' << cand;
            for (double v : traj.final_design.logits.values())
              designs << '\t' << format_double(v);
            designs << '\n';
          }
        }
      }
      {
        std::ofstream f(csv_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write csv: " + csv_path);
        f << csv.str();
      }
      if (config.save_designs) {
        const std::string dpath =
            (fs::path(outdir) / (sanitize_label(p.data.meta.name) + "__" +
                                 sanitize_label(mspec.label) + "__designs.tsv"))
                .string();
        std::ofstream f(dpath, std::ios::binary);
        f << "#bib-designs v1\ttrial\tcandidate\tlogits row-major "
          << p.data.landscape.spec().length << "x" << p.data.landscape.spec().alphabet << "\n";
        f << designs.str();
      }

      MethodTaskResult r;
      r.task = p.data.meta.name;
      r.label = mspec.label;
      r.report = summarize_trials(mspec.label, per_trial, config.n_eval);
      r.csv_path = csv_path;
      r.complete = method_complete;
      result.all_complete = result.all_complete && method_complete;

      ordered_json mj;
      mj["label"] = mspec.label;
      mj["method"] = method_to_string(mspec.method);
      mj["adaptive_eta"] = mspec.adaptive_eta;
      mj["mean"] = r.report.mean;
      mj["stddev"] = r.report.stddev;
      mj["per_trial"] = r.report.per_trial;
      mj["csv"] = csv_name;
      mj["complete"] = method_complete;
      tj["methods"].push_back(mj);

      if (log)
        *log << "[bib] " << p.data.meta.name << " / " << mspec.label << ": mean "
             << format_double(r.report.mean) << " +- " << format_double(r.report.stddev)
             << (method_complete ? "" : "  [INCOMPLETE]") << "\n";
      result.results.push_back(std::move(r));
    }
    summary["tasks"].push_back(tj);
  }
  summary["complete"] = result.all_complete;

  result.summary_path = (fs::path(outdir) / "summary.json").string();
  std::ofstream f(result.summary_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write summary: " + result.summary_path);
  f << summary.dump(2) << "\n";
  return result;
}

RankingTable build_ranking(const std::vector<std::string>& summary_paths) {
  if (summary_paths.empty()) throw std::invalid_argument("no summaries given");

  // label -> task -> mean
  std::vector<std::pair<std::string, std::map<std::string, double>>> methods;
  std::set<std::string> tasks_seen;
  bool first = true;
  for (const auto& path : summary_paths) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read summary: " + path);
    json j = json::parse(f);
    std::set<std::string> record_tasks;
    for (const auto& tj : j.at("tasks")) {
      const std::string task = tj.at("name").get<std::string>();
      record_tasks.insert(task);
      for (const auto& mj : tj.at("methods")) {
        const std::string label = mj.at("label").get<std::string>();
        auto it = std::find_if(methods.begin(), methods.end(),
                               [&](const auto& m) { return m.first == label; });
        if (it == methods.end()) {
          methods.push_back({label, {}});
          it = std::prev(methods.end());
        }
        if (it->second.count(task))
          throw std::runtime_error("method '" + label + "' appears twice for task '" + task + "'");
        it->second[task] = mj.at("mean").get<double>();
      }
    }
    if (first) {
      tasks_seen = record_tasks;
      first = false;
    } else if (record_tasks != tasks_seen) {
      throw std::runtime_error("summary task sets do not match across records");
    }
  }

  RankingTable table;
  table.tasks.assign(tasks_seen.begin(), tasks_seen.end());
  for (const auto& [label, by_task] : methods) {
    if (by_task.size() != tasks_seen.size())
      throw std::runtime_error("method '" + label + "' is missing tasks");
    table.rows.push_back(RankingRow{label, {}, 0.0, 0.0});
  }

  // competition ranks with ties averaged, higher mean is better
  for (const auto& task : table.tasks) {
    std::vector<double> means;
    for (const auto& [label, by_task] : methods) means.push_back(by_task.at(task));
    for (std::size_t i = 0; i < methods.size(); ++i) {
      double rank = 1.0;
      int ties = 0;
      for (std::size_t k = 0; k < methods.size(); ++k) {
        if (k == i) continue;
        if (means[k] > means[i]) rank += 1.0;
        if (means[k] == means[i]) ++ties;
      }
      table.rows[i].per_task_rank.push_back(rank + 0.5 * static_cast<double>(ties));
    }
  }
  for (auto& row : table.rows) {
    double sum = 0.0;
    for (double r : row.per_task_rank) sum += r;
    row.rank_mean = sum / static_cast<double>(row.per_task_rank.size());
    std::vector<double> sorted = row.per_task_rank;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    row.rank_median = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const RankingRow& a, const RankingRow& b) {
                     return a.rank_mean < b.rank_mean;
                   });
  return table;
}

std::string format_ranking(const RankingTable& table) {
  std::ostringstream out;
  out << "method";
  for (const auto& t : table.tasks) out << '\t' << t;
  out << "\trank_mean\trank_median\n";
  for (const auto& row : table.rows) {
    out << row.label;
    char buf[32];
    for (double r : row.per_task_rank) {
      std::snprintf(buf, sizeof(buf), "%g", r);
      out << '\t' << buf;
    }
    std::snprintf(buf, sizeof(buf), "%g", row.rank_mean);
    out << '\t' << buf;
    std::snprintf(buf, sizeof(buf), "%g", row.rank_median);
    out << '\t' << buf << '\n';
  }
  return out.str();
}

}  // namespace bib
