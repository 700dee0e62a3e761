#pragma once

// Experiment harness: seeded multi-trial runs of the tree-search engine
// and the baselines against one oracle, samples-to-optimum measurement,
// CSV/JSON export, snapshots and resume.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "alphax/baselines.hpp"
#include "alphax/dist.hpp"
#include "alphax/mcts.hpp"
#include "alphax/oracle.hpp"

namespace alphax {

// "synthetic:<seed>" or "tabular:<path>".
struct OracleSpec {
  enum class Kind { Synthetic, Tabular };
  Kind kind = Kind::Synthetic;
  std::uint64_t seed = 0;
  std::string path;

  static OracleSpec parse(const std::string& s);  // throws ParseError
  std::string to_string() const;
};

struct ExperimentConfig {
  SpaceKind space = SpaceKind::NasBenchDag;
  int max_dag_nodes = 5;  // desk-scale default; paper subset uses <= 6
  OracleSpec oracle;
  // alphax | alphax-no-metadnn | mcts-plain | rs | re | ql | hc
  std::string algo = "alphax";
  int trials = 1;
  long budget = 200;
  double c = 0.5;
  int k = 10;
  int re_population = 50;
  int re_tournament = 10;
  std::uint64_t seed = 0;  // trial i runs with seed + i
  std::string out_dir = "out";
  int snapshot_every = 0;  // new evaluations between snapshots; 0 = off
  int workers = 0;         // > 0: in-process master + N worker threads
  // Desk-scale surrogate width; {512,2048,2048,512} restores the full
  // published topology.
  std::vector<int> surrogate_hidden = {16, 32, 16};
  int surrogate_epochs = 20;
  int threads = 0;  // parallel trials; 0 = hardware concurrency
  bool stop_at_optimum = true;
  bool print_summary = true;  // one-line quartile summary on stdout
};

struct TrialResult {
  std::uint64_t seed = 0;
  std::optional<long> samples_to_optimum;  // nullopt = not reached
  double best_accuracy = -1.0;
  long total_epochs_charged = 0;
  double wall_time_s = 0.0;
};

struct ExperimentOutput {
  std::vector<TrialResult> trials;
  std::vector<Trace> traces;  // one per trial, same order
  double optimum_accuracy = 0.0;
  EncodingVector optimum_encoding;
};

std::shared_ptr<const OracleBackend> make_backend(const SpaceConfig& space,
                                                  const OracleSpec& spec);
SpaceConfig make_space(const ExperimentConfig& cfg);

// One seeded run of cfg.algo against a fresh Evaluator over `backend`.
// stop_at is the early-termination accuracy (the optimum), or nullopt.
Trace run_single(const ExperimentConfig& cfg, std::uint64_t seed,
                 std::shared_ptr<const OracleBackend> backend,
                 std::optional<double> stop_at,
                 std::unique_ptr<Engine>* engine_out = nullptr);

// Computes the global optimum, runs cfg.trials seeded runs (in parallel
// across threads), writes trials.csv / samples.csv / manifest.json under
// cfg.out_dir, and prints the samples-to-optimum quartiles.
ExperimentOutput run_trials(const ExperimentConfig& cfg);

// Tree export: {"nodes": [{id, encoding, mean_q, visits}], "edges":
// [{parent, action, child}]} . Throws IoError on write failure.
void export_tree(Engine& engine, const std::string& path);

// Snapshot wrapper carrying the engine payload plus the experiment
// config and the trace rows emitted so far.
nlohmann::json experiment_snapshot(const ExperimentConfig& cfg,
                                   const Engine& engine, const Trace& trace);

// Continues an interrupted single-trial engine run. budget_override
// replaces the stored sample budget when set. Returns the completed
// trace (pre- plus post-interruption rows).
Trace resume_run(const std::string& snapshot_path,
                 std::optional<long> budget_override,
                 ExperimentConfig* cfg_out = nullptr);

// CSV / manifest writers. Encodings are dash-joined digit strings.
std::string encoding_to_field(const EncodingVector& enc);
void write_samples_csv(const std::string& path, const std::string& algo,
                       const std::vector<Trace>& traces);
void write_trials_csv(const std::string& path, const std::string& algo,
                      const std::vector<TrialResult>& trials);
void write_manifest(const std::string& path, const ExperimentConfig& cfg,
                    const ExperimentOutput& out);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// `key = value` lines, '#' comments, blank lines ignored.
// Throws ParseError with a line number on anything else.
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Quartiles of samples-to-optimum; trials that never reached the optimum
// count as budget + 1.
struct Quartiles {
  double q1 = 0.0, median = 0.0, q3 = 0.0;
};
Quartiles samples_to_optimum_quartiles(const std::vector<TrialResult>& trials,
                                       long budget);

}  // namespace alphax
