// alphax command-line interface.
//
//   alphax search   run a seeded multi-trial experiment
//   alphax worker   serve evaluations to a remote master
//   alphax optimum  print the global optimum of an enumerable space
//   alphax resume   continue an interrupted run from a snapshot

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "alphax/harness.hpp"

namespace {

using namespace alphax;

std::string oracle_spec_string;
std::string space_string = "nasbench";

void add_common_flags(CLI::App* cmd, ExperimentConfig& cfg) {
  cmd->add_option("--space", space_string, "nasnet | nasbench | convnet")
      ->check(CLI::IsMember({"nasnet", "nasbench", "convnet"}));
  cmd->add_option("--oracle", oracle_spec_string,
                  "synthetic:<seed> or tabular:<path>");
  cmd->add_option("--nodes", cfg.max_dag_nodes,
                  "NASBench DAG node limit (desk-scale default 5)");
}

SpaceKind parse_space(const std::string& s) {
  if (s == "nasnet") return SpaceKind::NasNetCell;
  if (s == "convnet") return SpaceKind::LinearConvNet;
  return SpaceKind::NasBenchDag;
}

void finish_config(ExperimentConfig& cfg) {
  cfg.space = parse_space(space_string);
  if (!oracle_spec_string.empty())
    cfg.oracle = OracleSpec::parse(oracle_spec_string);
}

int run_tcp_master(const ExperimentConfig& cfg, const std::string& listen_addr) {
  SpaceConfig space = make_space(cfg);
  auto backend = make_backend(space, cfg.oracle);
  auto [opt_state, opt_acc] = global_optimum(*backend);

  SearchConfig scfg;
  scfg.c = cfg.c;
  scfg.k = cfg.k;
  scfg.rng_seed = cfg.seed;
  auto evaluator = std::make_shared<Evaluator>(backend);
  MlpTopology topo{encoding_length(space.kind), cfg.surrogate_hidden, 1};
  TrainConfig tcfg;
  tcfg.epochs = cfg.surrogate_epochs;
  auto surrogate =
      std::make_shared<MultiStageModel>(space.kind, topo, 4, tcfg, cfg.seed);
  Engine engine(space, scfg, surrogate, evaluator, EngineMode::Distributed);

  std::filesystem::create_directories(cfg.out_dir);
  Trace trace;
  trace.algo = cfg.algo;
  trace.seed = cfg.seed;

  JobQueue queue;
  auto transport = tcp_listen(listen_addr);
  std::cout << "listening on " << listen_addr << "\n";

  MasterConfig mcfg;
  mcfg.sample_budget = cfg.budget;
  mcfg.snapshot_every = 0;  // wrapped snapshots are written below instead
  mcfg.stale_timeout = std::chrono::seconds(30);
  if (cfg.stop_at_optimum) mcfg.stop_at_accuracy = opt_acc - 1e-12;
  long since_snapshot = 0;
  mcfg.on_evaluation = [&](const EvalRecord& rec) {
    TraceRow row;
    row.encoding = rec.encoding;
    row.accuracy = rec.accuracy;
    row.epochs_charged = rec.epochs_charged;
    if (rec.accuracy > trace.best_accuracy) {
      trace.best_accuracy = rec.accuracy;
      trace.best_encoding = rec.encoding;
    }
    row.best_so_far = trace.best_accuracy;
    trace.rows.push_back(std::move(row));
    if (cfg.snapshot_every > 0 && ++since_snapshot >= cfg.snapshot_every) {
      since_snapshot = 0;
      std::ofstream out(cfg.out_dir + "/snapshot.bin", std::ios::binary);
      out << snapshot_serialize(experiment_snapshot(cfg, engine, trace));
    }
  };
  MasterSummary summary = master_loop(engine, queue, *transport, mcfg);

  write_samples_csv(cfg.out_dir + "/samples.csv", cfg.algo, {trace});
  export_tree(engine, cfg.out_dir + "/tree.json");
  std::cout << "samples=" << summary.samples
            << " epochs=" << summary.epochs_charged
            << " best=" << format_double(summary.best_accuracy) << "\n";
  return 0;
}

int run_worker(const std::string& master_addr, const ExperimentConfig& cfg,
               const std::string& worker_id, int max_reconnect) {
  SpaceConfig space = make_space(cfg);
  auto backend = make_backend(space, cfg.oracle);
  WorkerConfig wcfg;
  wcfg.worker_id = worker_id;
  for (int attempt = 0; attempt <= max_reconnect; ++attempt) {
    try {
      auto transport = tcp_connect(master_addr);
      std::cout << "connected to " << master_addr << "\n";
      worker_loop(*transport, *backend, wcfg);
      return 0;  // clean shutdown
    } catch (const TransportFailure& e) {
      std::cerr << "transport: " << e.what() << "\n";
      std::this_thread::sleep_for(std::chrono::seconds(1));
    }
  }
  std::cerr << "giving up after " << max_reconnect << " reconnects\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AlphaX: MCTS neural-architecture search"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value file mirroring the flags");

  ExperimentConfig cfg;
  std::string listen_addr, master_addr, worker_id = "worker";
  int max_reconnect = 5;
  std::string snapshot_path;
  long resume_budget = -1;

  CLI::App* search = app.add_subcommand("search", "run an experiment");
  add_common_flags(search, cfg);
  search->add_option("--algo", cfg.algo,
                     "alphax | alphax-no-metadnn | mcts-plain | rs | re | ql | hc");
  search->add_option("--trials", cfg.trials);
  search->add_option("--budget", cfg.budget, "samples per trial");
  search->add_option("--c", cfg.c, "UCB exploration constant");
  search->add_option("--k", cfg.k, "surrogate simulations per expansion");
  search->add_option("--seed", cfg.seed, "base seed; trial i uses seed+i");
  search->add_option("--out", cfg.out_dir);
  search->add_option("--snapshot-every", cfg.snapshot_every,
                     "evaluations between snapshots (0 = off)");
  search->add_option("--re-population", cfg.re_population);
  search->add_option("--re-tournament", cfg.re_tournament);
  search->add_option("--surrogate-hidden", cfg.surrogate_hidden,
                     "surrogate hidden widths");
  search->add_option("--surrogate-epochs", cfg.surrogate_epochs);
  search->add_option("--threads", cfg.threads, "parallel trials (0 = auto)");
  search->add_flag("!--no-stop-at-optimum", cfg.stop_at_optimum,
                   "run every trial to the full budget");
  auto* topo_workers = search->add_option(
      "--workers", cfg.workers, "in-process worker threads (0 = sequential)");
  auto* topo_listen = search->add_option(
      "--listen", listen_addr, "serve a distributed search on host:port");
  auto* topo_master = search->add_option(
      "--master", master_addr, "join an existing search as an evaluator");
  topo_listen->excludes(topo_workers)->excludes(topo_master);
  topo_master->excludes(topo_workers);

  CLI::App* worker = app.add_subcommand("worker", "serve evaluations");
  add_common_flags(worker, cfg);
  worker->add_option("--master", master_addr, "master host:port")->required();
  worker->add_option("--id", worker_id);
  worker->add_option("--max-reconnect", max_reconnect);

  CLI::App* optimum = app.add_subcommand("optimum", "print the optimum");
  add_common_flags(optimum, cfg);

  CLI::App* resume = app.add_subcommand("resume", "continue from a snapshot");
  resume->add_option("--snapshot", snapshot_path)->required();
  resume->add_option("--budget", resume_budget, "override the sample budget");

  CLI11_PARSE(app, argc, argv);

  try {
    finish_config(cfg);
    if (search->parsed()) {
      if (!listen_addr.empty()) return run_tcp_master(cfg, listen_addr);
      if (!master_addr.empty())
        return run_worker(master_addr, cfg, worker_id, max_reconnect);
      run_trials(cfg);
      return 0;
    }
    if (worker->parsed())
      return run_worker(master_addr, cfg, worker_id, max_reconnect);
    if (optimum->parsed()) {
      SpaceConfig space = make_space(cfg);
      auto backend = make_backend(space, cfg.oracle);
      auto [state, acc] = global_optimum(*backend);
      std::cout << "encoding=" << encoding_to_field(encode(state))
                << " accuracy=" << format_double(acc) << "\n";
      return 0;
    }
    if (resume->parsed()) {
      ExperimentConfig resumed;
      Trace trace = resume_run(
          snapshot_path,
          resume_budget >= 0 ? std::optional<long>(resume_budget) : std::nullopt,
          &resumed);
      std::filesystem::create_directories(resumed.out_dir);
      write_samples_csv(resumed.out_dir + "/samples.csv", trace.algo, {trace});
      std::cout << "resumed: samples=" << trace.rows.size()
                << " best=" << format_double(trace.best_accuracy) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
