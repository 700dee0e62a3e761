#include "alphax/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace alphax {

namespace {

// mcts-plain: no learned component at all; the prior stays a flat 0.5.
class FixedPriorSurrogate final : public Surrogate {
 public:
  double predict(const EncodingVector&) const override { return 0.5; }
  void fit(const SampleSet&, Rng&) override {}
  nlohmann::json to_json() const override { return {{"type", "fixed"}}; }
  void load_json(const nlohmann::json&) override {}
};

bool is_engine_algo(const std::string& algo) {
  return algo == "alphax" || algo == "alphax-no-metadnn" ||
         algo == "mcts-plain";
}

std::shared_ptr<Surrogate> make_surrogate(const ExperimentConfig& cfg,
                                          const SpaceConfig& space,
                                          std::uint64_t seed) {
  if (cfg.algo == "alphax-no-metadnn")
    return std::make_shared<ConstantMeanSurrogate>();
  if (cfg.algo == "mcts-plain") return std::make_shared<FixedPriorSurrogate>();
  MlpTopology topo{encoding_length(space.kind), cfg.surrogate_hidden, 1};
  TrainConfig tcfg;
  tcfg.epochs = cfg.surrogate_epochs;
  return std::make_shared<MultiStageModel>(space.kind, topo, 4, tcfg, seed);
}

void append_row(Trace& t, const EncodingVector& enc, double accuracy,
                int epochs_charged) {
  TraceRow row;
  row.encoding = enc;
  row.accuracy = accuracy;
  row.epochs_charged = epochs_charged;
  if (accuracy > t.best_accuracy) {
    t.best_accuracy = accuracy;
    t.best_encoding = enc;
  }
  row.best_so_far = t.best_accuracy;
  t.rows.push_back(std::move(row));
}

nlohmann::json trace_to_json(const Trace& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const TraceRow& r : t.rows)
    rows.push_back({{"encoding", r.encoding.digits},
                    {"accuracy", r.accuracy},
                    {"best_so_far", r.best_so_far},
                    {"epochs_charged", r.epochs_charged}});
  return {{"algo", t.algo}, {"seed", t.seed}, {"rows", std::move(rows)}};
}

Trace trace_from_json(const nlohmann::json& j, SpaceKind space) {
  Trace t;
  t.algo = j["algo"].get<std::string>();
  t.seed = j["seed"].get<std::uint64_t>();
  for (const auto& r : j["rows"]) {
    EncodingVector enc;
    enc.space = space;
    enc.digits = r["encoding"].get<std::vector<int>>();
    append_row(t, enc, r["accuracy"].get<double>(),
               r["epochs_charged"].get<int>());
  }
  return t;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.space = space_kind_from_string(j["space"].get<std::string>());
  cfg.max_dag_nodes = j["max_dag_nodes"].get<int>();
  cfg.oracle = OracleSpec::parse(j["oracle"].get<std::string>());
  cfg.algo = j["algo"].get<std::string>();
  cfg.trials = j["trials"].get<int>();
  cfg.budget = j["budget"].get<long>();
  cfg.c = j["c"].get<double>();
  cfg.k = j["k"].get<int>();
  cfg.re_population = j["re_population"].get<int>();
  cfg.re_tournament = j["re_tournament"].get<int>();
  cfg.seed = j["seed"].get<std::uint64_t>();
  cfg.out_dir = j["out_dir"].get<std::string>();
  cfg.snapshot_every = j["snapshot_every"].get<int>();
  cfg.workers = j["workers"].get<int>();
  cfg.surrogate_hidden = j["surrogate_hidden"].get<std::vector<int>>();
  cfg.surrogate_epochs = j["surrogate_epochs"].get<int>();
  cfg.threads = j["threads"].get<int>();
  cfg.stop_at_optimum = j["stop_at_optimum"].get<bool>();
  return cfg;
}

// Continues `engine` until the sample budget / early stop, appending new
// evaluations to `trace`. Covers both the sequential and the in-process
// distributed topology.
void run_engine_loop(const ExperimentConfig& cfg, Engine& engine,
                     std::shared_ptr<const OracleBackend> backend,
                     Trace& trace, std::optional<double> stop_at,
                     const std::string& snapshot_path) {
  long since_snapshot = 0;
  auto maybe_snapshot = [&] {
    if (cfg.snapshot_every <= 0 || snapshot_path.empty()) return;
    if (++since_snapshot < cfg.snapshot_every) return;
    since_snapshot = 0;
    std::ofstream out(snapshot_path, std::ios::binary);
    out << snapshot_serialize(experiment_snapshot(cfg, engine, trace));
    if (!out) throw IoError("cannot write snapshot: " + snapshot_path);
  };

  if (cfg.workers <= 0) {
    Evaluator& evaluator = engine.evaluator();
    while (evaluator.distinct_evaluations() < cfg.budget &&
           engine.iteration() < engine.config().max_episodes) {
      if (stop_at && trace.best_accuracy >= *stop_at) break;
      RolloutResult r = engine.search_step();
      if (r.cached || !r.actual_accuracy) continue;
      append_row(trace, r.encoding, *r.actual_accuracy, r.epoch_budget);
      maybe_snapshot();
    }
    return;
  }

  InMemoryHub hub;
  auto master = hub.master();
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(cfg.workers));
  for (int i = 0; i < cfg.workers; ++i) {
    std::string id = "w" + std::to_string(i);
    auto transport = hub.connect_worker(id);
    workers.emplace_back([transport, backend, id] {
      WorkerConfig wcfg;
      wcfg.worker_id = id;
      worker_loop(*transport, *backend, wcfg);
    });
  }

  JobQueue queue;
  // Jobs that were in flight when a snapshot was taken must re-enter the
  // queue, or their pending tree records would never resolve.
  for (const Engine::PendingJob& job : engine.pending_jobs())
    queue.push(job.encoding, job.transfer_parent, job.epoch_budget);

  MasterConfig mcfg;
  mcfg.sample_budget = cfg.budget;
  // A single worker with watermark 1 runs fully synchronously and
  // reproduces the sequential engine's sample sequence.
  mcfg.high_watermark = cfg.workers == 1 ? 1 : 0;
  mcfg.stale_timeout = std::chrono::seconds(10);
  mcfg.stop_at_accuracy = stop_at;
  mcfg.on_evaluation = [&](const EvalRecord& rec) {
    append_row(trace, rec.encoding, rec.accuracy, rec.epochs_charged);
    maybe_snapshot();
  };
  master_loop(engine, queue, *master, mcfg);
  for (std::thread& w : workers) w.join();
}

double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return 0.0;
  double pos = p * static_cast<double>(v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] + (v[hi] - v[lo]) * frac;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

OracleSpec OracleSpec::parse(const std::string& s) {
  auto colon = s.find(':');
  std::string head = colon == std::string::npos ? s : s.substr(0, colon);
  std::string rest = colon == std::string::npos ? "" : s.substr(colon + 1);
  OracleSpec spec;
  if (head == "synthetic") {
    if (colon == std::string::npos || rest.empty())
      throw ParseError("synthetic oracle needs a seed, e.g. synthetic:0");
    spec.kind = Kind::Synthetic;
    std::size_t used = 0;
    try {
      spec.seed = std::stoull(rest, &used);
    } catch (const std::exception&) {
      throw ParseError("bad synthetic oracle seed: " + rest);
    }
    if (used != rest.size())
      throw ParseError("bad synthetic oracle seed: " + rest);
  } else if (head == "tabular") {
    if (rest.empty()) throw ParseError("tabular oracle needs a path");
    spec.kind = Kind::Tabular;
    spec.path = rest;
  } else {
    throw ParseError("unknown oracle spec: " + s);
  }
  return spec;
}

std::string OracleSpec::to_string() const {
  return kind == Kind::Synthetic ? "synthetic:" + std::to_string(seed)
                                 : "tabular:" + path;
}

SpaceConfig make_space(const ExperimentConfig& cfg) {
  SpaceConfig space = SpaceConfig::make(cfg.space);
  space.max_dag_nodes = cfg.max_dag_nodes;
  return space;
}

std::shared_ptr<const OracleBackend> make_backend(const SpaceConfig& space,
                                                  const OracleSpec& spec) {
  if (spec.kind == OracleSpec::Kind::Synthetic) {
    SyntheticBenchConfig scfg;
    scfg.seed = spec.seed;
    return std::make_shared<SyntheticBench>(space, scfg);
  }
  return std::make_shared<TabularBench>(load_tabular(space, spec.path));
}

Trace run_single(const ExperimentConfig& cfg, std::uint64_t seed,
                 std::shared_ptr<const OracleBackend> backend,
                 std::optional<double> stop_at,
                 std::unique_ptr<Engine>* engine_out) {
  SpaceConfig space = make_space(cfg);

  if (!is_engine_algo(cfg.algo)) {
    Evaluator evaluator(backend);
    if (cfg.algo == "rs")
      return random_search(space, evaluator, cfg.budget, seed, stop_at);
    if (cfg.algo == "re") {
      EvolutionConfig ecfg;
      ecfg.population = cfg.re_population;
      ecfg.tournament = cfg.re_tournament;
      return regularized_evolution(space, evaluator, cfg.budget, ecfg, seed,
                                   stop_at);
    }
    if (cfg.algo == "ql")
      return q_learning(space, evaluator, cfg.budget, QLearningConfig{}, seed,
                        stop_at);
    if (cfg.algo == "hc")
      return hill_climbing(space, evaluator, cfg.budget, seed, stop_at);
    throw ParseError("unknown algorithm: " + cfg.algo);
  }

  SearchConfig scfg;
  scfg.c = cfg.c;
  scfg.k = cfg.k;
  scfg.rng_seed = seed;
  auto surrogate = make_surrogate(cfg, space, seed);
  auto evaluator = std::make_shared<Evaluator>(backend);
  auto engine = std::make_unique<Engine>(
      space, scfg, surrogate, evaluator,
      cfg.workers > 0 ? EngineMode::Distributed : EngineMode::Sequential);

  Trace trace;
  trace.algo = cfg.algo;
  trace.seed = seed;
  std::string snapshot_path =
      cfg.snapshot_every > 0 ? cfg.out_dir + "/snapshot.bin" : "";
  if (!snapshot_path.empty()) std::filesystem::create_directories(cfg.out_dir);
  run_engine_loop(cfg, *engine, backend, trace, stop_at, snapshot_path);
  if (engine_out) *engine_out = std::move(engine);
  return trace;
}

ExperimentOutput run_trials(const ExperimentConfig& cfg) {
  SpaceConfig space = make_space(cfg);
  auto backend = make_backend(space, cfg.oracle);
  auto [opt_state, opt_acc] = global_optimum(*backend);

  ExperimentOutput out;
  out.optimum_accuracy = opt_acc;
  out.optimum_encoding = encode(opt_state);
  out.trials.resize(static_cast<std::size_t>(cfg.trials));
  out.traces.resize(static_cast<std::size_t>(cfg.trials));

  std::optional<double> stop_at;
  if (cfg.stop_at_optimum) stop_at = opt_acc - 1e-12;

  std::unique_ptr<Engine> first_engine;
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next.fetch_add(1); i < cfg.trials; i = next.fetch_add(1)) {
      auto t0 = std::chrono::steady_clock::now();
      std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
      Trace trace = run_single(cfg, seed, backend, stop_at,
                               i == 0 ? &first_engine : nullptr);

      TrialResult res;
      res.seed = seed;
      res.best_accuracy = trace.best_accuracy;
      for (std::size_t s = 0; s < trace.rows.size(); ++s) {
        res.total_epochs_charged += trace.rows[s].epochs_charged;
        if (!res.samples_to_optimum &&
            trace.rows[s].accuracy >= opt_acc - 1e-12)
          res.samples_to_optimum = static_cast<long>(s + 1);
      }
      res.wall_time_s = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
      out.trials[static_cast<std::size_t>(i)] = res;
      out.traces[static_cast<std::size_t>(i)] = std::move(trace);
    }
  };

  int nthread = cfg.threads > 0
                    ? cfg.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  // In-process distributed trials already own their worker threads.
  if (cfg.workers > 0) nthread = 1;
  nthread = std::max(1, std::min(nthread, cfg.trials));
  if (nthread == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthread; ++i) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }

  std::filesystem::create_directories(cfg.out_dir);
  write_samples_csv(cfg.out_dir + "/samples.csv", cfg.algo, out.traces);
  write_trials_csv(cfg.out_dir + "/trials.csv", cfg.algo, out.trials);
  write_manifest(cfg.out_dir + "/manifest.json", cfg, out);
  if (first_engine) export_tree(*first_engine, cfg.out_dir + "/tree.json");

  Quartiles q = samples_to_optimum_quartiles(out.trials, cfg.budget);
  long reached = 0;
  for (const TrialResult& t : out.trials)
    if (t.samples_to_optimum) ++reached;
  if (cfg.print_summary)
    std::cout << cfg.algo << ": trials=" << cfg.trials << " reached="
              << reached << " samples-to-optimum q1=" << q.q1
              << " median=" << q.median << " q3=" << q.q3
              << " (unreached counted as budget+1)\n";
  return out;
}

void export_tree(Engine& engine, const std::string& path) {
  nlohmann::json nodes = nlohmann::json::array();
  nlohmann::json edges = nlohmann::json::array();
  struct Item {
    TreeNode* node;
    int id;
    int parent_id;
  };
  std::deque<Item> queue{{engine.root(), 0, -1}};
  int next_id = 1;
  while (!queue.empty()) {
    auto [node, id, parent_id] = queue.front();
    queue.pop_front();
    nlohmann::json e;
    e["id"] = id;
    e["encoding"] = encode(node->state).digits;
    if (node->parent) {
      long v = node->parent->visits[static_cast<std::size_t>(node->incoming_action)];
      e["visits"] = v;
      if (v > 0)
        e["mean_q"] =
            node->parent->q_sum[static_cast<std::size_t>(node->incoming_action)] /
            static_cast<double>(v);
      else
        e["mean_q"] = nullptr;
      edges.push_back(
          {{"parent", parent_id},
           {"action",
            node->parent->actions[static_cast<std::size_t>(node->incoming_action)]
                .to_string()},
           {"child", id}});
    } else {
      e["visits"] = node->total_visits();
      e["mean_q"] = nullptr;
    }
    nodes.push_back(std::move(e));
    for (std::size_t i = 0; i < node->children.size(); ++i)
      if (node->children[i])
        queue.push_back({node->children[i].get(), next_id++, id});
  }
  std::ofstream out(path);
  out << nlohmann::json{{"nodes", std::move(nodes)},
                        {"edges", std::move(edges)}}
             .dump(2)
      << "\n";
  if (!out) throw IoError("cannot write tree export: " + path);
}

nlohmann::json experiment_snapshot(const ExperimentConfig& cfg,
                                   const Engine& engine, const Trace& trace) {
  return {{"experiment", config_to_json(cfg)},
          {"trace", trace_to_json(trace)},
          {"engine", engine.snapshot()}};
}

Trace resume_run(const std::string& snapshot_path,
                 std::optional<long> budget_override,
                 ExperimentConfig* cfg_out) {
  std::ifstream in(snapshot_path, std::ios::binary);
  if (!in) throw IoError("cannot read snapshot: " + snapshot_path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  nlohmann::json wrapper = snapshot_parse(bytes);
  if (!wrapper.contains("experiment") || !wrapper.contains("engine") ||
      !wrapper.contains("trace"))
    throw CorruptSnapshot("snapshot lacks an experiment wrapper");

  ExperimentConfig cfg = config_from_json(wrapper["experiment"]);
  if (budget_override) cfg.budget = *budget_override;

  SpaceConfig space = make_space(cfg);
  auto backend = make_backend(space, cfg.oracle);
  Trace trace = trace_from_json(wrapper["trace"], space.kind);
  auto surrogate = make_surrogate(cfg, space, trace.seed);
  auto evaluator = std::make_shared<Evaluator>(backend);
  auto engine = Engine::restore(wrapper["engine"], surrogate, evaluator);

  std::optional<double> stop_at;
  if (cfg.stop_at_optimum)
    stop_at = global_optimum(*backend).second - 1e-12;

  std::string out_snapshot =
      cfg.snapshot_every > 0 ? cfg.out_dir + "/snapshot.bin" : "";
  if (!out_snapshot.empty()) std::filesystem::create_directories(cfg.out_dir);
  run_engine_loop(cfg, *engine, backend, trace, stop_at, out_snapshot);
  if (cfg_out) *cfg_out = cfg;
  return trace;
}

std::string encoding_to_field(const EncodingVector& enc) {
  std::string s;
  for (std::size_t i = 0; i < enc.digits.size(); ++i) {
    if (i) s.push_back('-');
    s += std::to_string(enc.digits[i]);
  }
  return s;
}

void write_samples_csv(const std::string& path, const std::string& algo,
                       const std::vector<Trace>& traces) {
  std::ofstream out(path);
  out << "algo,seed,sample_index,encoding,accuracy,best_so_far,epochs_charged\n";
  for (const Trace& t : traces)
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const TraceRow& r = t.rows[i];
      out << algo << ',' << t.seed << ',' << i + 1 << ','
          << encoding_to_field(r.encoding) << ',' << format_double(r.accuracy)
          << ',' << format_double(r.best_so_far) << ',' << r.epochs_charged
          << '\n';
    }
  if (!out) throw IoError("cannot write " + path);
}

void write_trials_csv(const std::string& path, const std::string& algo,
                      const std::vector<TrialResult>& trials) {
  std::ofstream out(path);
  out << "algo,seed,samples_to_optimum,best_accuracy,total_epochs_charged,"
         "wall_time_s\n";
  for (const TrialResult& t : trials) {
    out << algo << ',' << t.seed << ',';
    if (t.samples_to_optimum)
      out << *t.samples_to_optimum;
    else
      out << "not_reached";
    out << ',' << format_double(t.best_accuracy) << ','
        << t.total_epochs_charged << ',' << format_double(t.wall_time_s)
        << '\n';
  }
  if (!out) throw IoError("cannot write " + path);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  return {{"space", to_string(cfg.space)},
          {"max_dag_nodes", cfg.max_dag_nodes},
          {"oracle", cfg.oracle.to_string()},
          {"algo", cfg.algo},
          {"trials", cfg.trials},
          {"budget", cfg.budget},
          {"c", cfg.c},
          {"k", cfg.k},
          {"re_population", cfg.re_population},
          {"re_tournament", cfg.re_tournament},
          {"seed", cfg.seed},
          {"out_dir", cfg.out_dir},
          {"snapshot_every", cfg.snapshot_every},
          {"workers", cfg.workers},
          {"surrogate_hidden", cfg.surrogate_hidden},
          {"surrogate_epochs", cfg.surrogate_epochs},
          {"threads", cfg.threads},
          {"stop_at_optimum", cfg.stop_at_optimum}};
}

void write_manifest(const std::string& path, const ExperimentConfig& cfg,
                    const ExperimentOutput& out) {
  nlohmann::json seeds = nlohmann::json::array();
  for (const TrialResult& t : out.trials) seeds.push_back(t.seed);
  nlohmann::json j = {
      {"version", "alphax 0.1.0"},
      {"config", config_to_json(cfg)},
      {"seeds", std::move(seeds)},
      {"optimum",
       {{"encoding", out.optimum_encoding.digits},
        {"accuracy", out.optimum_accuracy}}},
      {"notes",
       {{"sample_axis",
         "samples.csv rows are per evaluated architecture, not per search "
         "iteration"},
        {"unreached_policy",
         "quartiles count unreached trials as budget + 1"}}}};
  std::ofstream f(path);
  f << j.dump(2) << "\n";
  if (!f) throw IoError("cannot write " + path);
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) +
                       ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ParseError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

Quartiles samples_to_optimum_quartiles(const std::vector<TrialResult>& trials,
                                       long budget) {
  std::vector<double> v;
  v.reserve(trials.size());
  for (const TrialResult& t : trials)
    v.push_back(t.samples_to_optimum
                    ? static_cast<double>(*t.samples_to_optimum)
                    : static_cast<double>(budget + 1));
  Quartiles q;
  q.q1 = percentile(v, 0.25);
  q.median = percentile(v, 0.5);
  q.q3 = percentile(v, 0.75);
  return q;
}

}  // namespace alphax
