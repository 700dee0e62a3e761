// Acceptance suite: one self-contained check per headline property of the
// search library, each printing a single PASS/FAIL line. Run all checks
// with no arguments or one check with `--only N`.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "alphax/baselines.hpp"
#include "alphax/dist.hpp"
#include "alphax/errors.hpp"
#include "alphax/harness.hpp"
#include "alphax/mcts.hpp"
#include "alphax/oracle.hpp"
#include "alphax/space.hpp"
#include "alphax/surrogate.hpp"

using namespace alphax;
namespace fs = std::filesystem;

namespace {

struct Check {
  int id;
  const char* title;
  std::function<bool(std::string&)> run;
};

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("alphax_accept_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

// ---------------------------------------------------------------------
// shared helpers

SpaceConfig default_space(int nodes) {
  SpaceConfig cfg = SpaceConfig::make(SpaceKind::NasBenchDag);
  cfg.max_dag_nodes = nodes;
  return cfg;
}

// A linear chain of TreeNodes with randomized pre-existing statistics;
// returns the selection path root->leaf.
struct Chain {
  std::vector<std::unique_ptr<TreeNode>> storage;
  SelectionPath path;
};

Chain random_chain(Rng& rng) {
  Chain c;
  const int depth = 1 + static_cast<int>(uniform_index(rng, 6));
  TreeNode* prev = nullptr;
  for (int d = 0; d < depth; ++d) {
    auto node = std::make_unique<TreeNode>();
    const std::size_t arity = 1 + uniform_index(rng, 4);
    node->q_sum.resize(arity);
    node->visits.resize(arity);
    for (std::size_t a = 0; a < arity; ++a) {
      node->q_sum[a] = uniform_real(rng) * 10.0;
      node->visits[a] = static_cast<long>(uniform_index(rng, 50));
    }
    if (prev) node->parent = prev;
    c.path.emplace_back(node.get(),
                        static_cast<int>(uniform_index(rng, arity)));
    prev = node.get();
    c.storage.push_back(std::move(node));
  }
  return c;
}

ExperimentConfig experiment_base(const std::string& out_dir,
                                 const std::string& algo, int nodes,
                                 long budget, int trials,
                                 std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.space = SpaceKind::NasBenchDag;
  cfg.max_dag_nodes = nodes;
  cfg.oracle = OracleSpec::parse("synthetic:17");
  cfg.algo = algo;
  cfg.trials = trials;
  cfg.budget = budget;
  cfg.seed = seed;
  cfg.out_dir = out_dir;
  cfg.stop_at_optimum = true;
  cfg.print_summary = false;
  return cfg;
}

double median_samples(const std::vector<TrialResult>& trials, long budget) {
  std::vector<double> v;
  for (const TrialResult& t : trials)
    v.push_back(t.samples_to_optimum
                    ? static_cast<double>(*t.samples_to_optimum)
                    : static_cast<double>(budget + 1));
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::unique_ptr<Engine> fresh_engine(const SpaceConfig& space, EngineMode mode,
                                     std::shared_ptr<Evaluator> eval,
                                     std::uint64_t seed) {
  SearchConfig cfg;
  cfg.c = 0.5;
  cfg.k = 5;
  cfg.rng_seed = seed;
  return std::make_unique<Engine>(space, cfg,
                                  std::make_shared<ConstantMeanSurrogate>(),
                                  std::move(eval), mode);
}

// ---------------------------------------------------------------------
// 1. two-phase backprop equivalence

bool check_two_phase(std::string& detail) {
  Rng rng(101);
  double worst = 0.0;
  for (int it = 0; it < 1000; ++it) {
    Chain a = random_chain(rng);
    // mirror the chain for the sequential variant
    Chain b;
    for (std::size_t d = 0; d < a.storage.size(); ++d) {
      auto node = std::make_unique<TreeNode>();
      node->q_sum = a.storage[d]->q_sum;
      node->visits = a.storage[d]->visits;
      b.path.emplace_back(node.get(), a.path[d].second);
      b.storage.push_back(std::move(node));
    }
    const double q_hat = uniform_real(rng);
    const double acc = uniform_real(rng);
    backpropagate(a.path, q_hat, 1);              // preemptive
    backpropagate(a.path, (acc - q_hat) / 2, 0);  // final correction
    backpropagate(b.path, (acc + q_hat) / 2, 1);  // sequential
    for (std::size_t d = 0; d < a.storage.size(); ++d) {
      for (std::size_t k = 0; k < a.storage[d]->q_sum.size(); ++k) {
        worst = std::max(worst, std::abs(a.storage[d]->q_sum[k] -
                                         b.storage[d]->q_sum[k]));
        if (a.storage[d]->visits[k] != b.storage[d]->visits[k]) {
          detail = "visit counts diverged";
          return false;
        }
      }
    }
  }
  detail = "max |q_sum| gap " + std::to_string(worst) + " over 1000 cases";
  return worst <= 1e-12;
}

// ---------------------------------------------------------------------
// 2. UCB1 correctness

bool check_ucb(std::string& detail) {
  const double e1 = 0.9 + std::sqrt(2.0 * std::log(3.0) / 2.0);
  const double e2 = 0.7 + std::sqrt(2.0 * std::log(3.0));
  if (std::abs(ucb_score(1.8, 2, 3, 0.5) - e1) > 1e-9 ||
      std::abs(ucb_score(0.7, 1, 3, 0.5) - e2) > 1e-9) {
    detail = "hand-computed score mismatch";
    return false;
  }
  if (!(ucb_score(0.7, 1, 3, 0.5) > ucb_score(1.8, 2, 3, 0.5))) {
    detail = "less-visited action does not win the documented pair";
    return false;
  }
  // unvisited-first over randomized stat vectors
  Rng rng(202);
  for (int it = 0; it < 10000; ++it) {
    const std::size_t arity = 2 + uniform_index(rng, 6);
    std::vector<double> qs(arity);
    std::vector<long> ns(arity);
    long total = 0;
    for (std::size_t a = 0; a < arity; ++a) {
      qs[a] = uniform_real(rng) * 20.0;
      ns[a] = 1 + static_cast<long>(uniform_index(rng, 100));
      total += ns[a];
    }
    const std::size_t hole = uniform_index(rng, arity);
    total -= ns[hole];
    ns[hole] = 0;
    std::size_t best = 0;
    for (std::size_t a = 1; a < arity; ++a)
      if (ucb_score(qs[a], ns[a], total, 0.5) >
          ucb_score(qs[best], ns[best], total, 0.5))
        best = a;
    // ties between several unvisited actions keep the first, which is
    // still an unvisited action
    if (ns[best] != 0) {
      detail = "a visited action outranked an unvisited one";
      return false;
    }
  }
  detail = "2 hand cases + 10000 unvisited-first draws";
  return true;
}

// ---------------------------------------------------------------------
// 3. encoding fidelity

bool check_encoding(std::string& detail) {
  if (encoding_length(SpaceKind::NasNetCell) != 60 ||
      encoding_length(SpaceKind::NasBenchDag) != 56) {
    detail = "encoding lengths are not 60/56";
    return false;
  }
  // the absent block is six zeros: the empty cell encodes as all zeros
  SpaceConfig nasnet = SpaceConfig::make(SpaceKind::NasNetCell);
  for (int d : encode(initial_state(nasnet)).digits)
    if (d != 0) {
      detail = "absent block does not encode as zeros";
      return false;
    }
  // layer-code bijection over the full table
  for (int code = 1; code <= layer_code::kCount; ++code)
    if (layer_code::code_of(layer_code::name(code)) != code) {
      detail = "layer code table is not a bijection";
      return false;
    }
  // 10,000 random states per space round-trip exactly
  for (SpaceKind kind : {SpaceKind::NasNetCell, SpaceKind::NasBenchDag,
                         SpaceKind::LinearConvNet}) {
    SpaceConfig cfg = SpaceConfig::make(kind);
    if (kind == SpaceKind::NasBenchDag) cfg.max_dag_nodes = 5;
    Rng rng(303);
    for (int it = 0; it < 10000; ++it) {
      // random partial state: walk a random number of steps
      ArchState s = initial_state(cfg);
      const int steps = static_cast<int>(uniform_index(rng, 12));
      for (int k = 0; k < steps && !s.is_terminal; ++k) {
        auto actions = legal_actions(cfg, s);
        s = apply(cfg, s, actions[uniform_index(rng, actions.size())]);
      }
      EncodingVector e = encode(s);
      ArchState back = decode(cfg, e);
      back.is_terminal = s.is_terminal;  // decode does not mark terminal
      if (encode(back) != e) {
        detail = "round trip failed for " + e.key();
        return false;
      }
    }
  }
  detail = "lengths, zero block, code table, 3x10000 round trips";
  return true;
}

// ---------------------------------------------------------------------
// 4. surrogate gradient check

bool grad_check_net(Mlp& net, int batch, double tol, int probes_per_tensor,
                    Rng& rng, std::string& detail) {
  const int in_dim = net.topology().input_dim;
  std::vector<std::vector<double>> xs;
  std::vector<double> ts;
  for (int i = 0; i < batch; ++i) {
    std::vector<double> x(static_cast<std::size_t>(in_dim));
    for (double& v : x) v = uniform_real(rng);
    xs.push_back(std::move(x));
    ts.push_back(uniform_real(rng));
  }
  Gradients g = net.gradients(xs, ts, Loss::MeanSquaredError);
  const double h = 1e-6;
  for (std::size_t layer = 0; layer < net.num_layers(); ++layer) {
    for (int probe = 0; probe < probes_per_tensor; ++probe) {
      for (bool bias : {false, true}) {
        auto& params = bias ? net.biases(layer) : net.weights(layer);
        const std::size_t idx = uniform_index(rng, params.size());
        const double analytic =
            bias ? g.biases[layer][idx] : g.weights[layer][idx];
        // central differences are polluted by roundoff at small h and by
        // ReLU kinks / truncation at large h; accept the best step size
        double numeric = 0.0, best_err = 1e300;
        for (double step : {h / 100, h / 10, h, 10 * h, 100 * h}) {
          const double saved = params[idx];
          params[idx] = saved + step;
          const double up = net.loss_value(xs, ts, Loss::MeanSquaredError);
          params[idx] = saved - step;
          const double down = net.loss_value(xs, ts, Loss::MeanSquaredError);
          params[idx] = saved;
          const double est = (up - down) / (2 * step);
          if (std::abs(est - analytic) < best_err) {
            best_err = std::abs(est - analytic);
            numeric = est;
          }
        }
        const double scale = std::max({std::abs(numeric),
                                       std::abs(analytic), 1e-6});
        if (std::abs(numeric - analytic) / scale > tol) {
          std::ostringstream os;
          os << "layer " << layer << (bias ? " bias" : " weight") << "["
             << idx << "]: analytic " << analytic << " vs numeric "
             << numeric;
          detail = os.str();
          return false;
        }
      }
    }
  }
  return true;
}

bool check_gradients(std::string& detail) {
  Rng rng(404);
  Mlp reduced({56, {64, 256, 256, 64}, 1}, OutputHead::Sigmoid, 0.1, rng);
  if (!grad_check_net(reduced, 8, 1e-4, 40, rng, detail)) return false;
  // spot check on the published full-width topology
  Mlp full({56, {512, 2048, 2048, 512}, 1}, OutputHead::Sigmoid, 0.1, rng);
  if (!grad_check_net(full, 8, 1e-4, 2, rng, detail)) return false;
  detail = "reduced topology (40 probes/tensor) + full-width spot checks";
  return true;
}

// ---------------------------------------------------------------------
// 5. surrogate capacity

bool check_capacity(std::string& detail) {
  SpaceConfig space = default_space(5);
  SyntheticBenchConfig bcfg;
  bcfg.seed = 17;
  SyntheticBench bench(space, bcfg);
  Rng walk_rng(505);
  SampleSet samples;
  std::set<std::string> seen;
  while (samples.size() < 500) {
    ArchState s = random_terminal_walk(space, walk_rng);
    EncodingVector e = encode(s);
    if (!seen.insert(e.key()).second) continue;
    samples.add(e, bench.accuracy(s));
  }

  TrainConfig tcfg;
  tcfg.epochs = 50;
  tcfg.learning_rate = 1e-3;
  tcfg.batch_size = 32;
  MultiStageModel model(space.kind,
                        {encoding_length(space.kind), {64, 64}, 1}, 4, tcfg,
                        55);
  Rng train_rng(606);
  double corr = -1.0;
  for (int round = 0; round < 40; ++round) {
    model.fit(samples, train_rng);
    std::vector<double> preds, truths;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      preds.push_back(model.predict(samples.encodings()[i]));
      truths.push_back(samples.accuracies()[i]);
    }
    corr = pearson_correlation(preds, truths);
    if (corr >= 0.99) break;
  }
  detail = "train-set Pearson " + std::to_string(corr) + " on 500 samples";
  return corr >= 0.99;
}

// ---------------------------------------------------------------------
// 6/7. sample-efficiency orderings

bool check_efficiency(std::string& detail) {
  // 4-node instance (602 architectures): large enough to separate the
  // algorithms, small enough that every trial can terminate in budget
  const int nodes = 4;
  const long budget = 600;
  const int trials = 100;
  TempDir da("eff_ax"), dr("eff_rs"), de("eff_re");

  ExperimentConfig ax = experiment_base(da.str(), "alphax", nodes, budget,
                                        trials, 9000);
  ax.c = 0.2;  // desk-scale exploration constant (see notes on budget 600)
  ax.k = 30;   // more surrogate rollouts per node sharpens q-hat estimates
  ExperimentOutput ax_out = run_trials(ax);

  ExperimentConfig rs = experiment_base(dr.str(), "rs", nodes, budget,
                                        trials, 9000);
  ExperimentOutput rs_out = run_trials(rs);

  ExperimentConfig re = experiment_base(de.str(), "re", nodes, budget,
                                        trials, 9000);
  re.re_population = 50;
  re.re_tournament = 10;
  ExperimentOutput re_out = run_trials(re);

  const double m_ax = median_samples(ax_out.trials, budget);
  const double m_rs = median_samples(rs_out.trials, budget);
  const double m_re = median_samples(re_out.trials, budget);
  std::ostringstream os;
  os << "medians: alphax " << m_ax << ", rs " << m_rs << ", re " << m_re
     << " (ratio rs/alphax " << m_rs / m_ax << ")";
  detail = os.str();
  return m_rs >= 1.5 * m_ax && m_ax <= m_re;
}

bool check_ablation(std::string& detail) {
  const int nodes = 4;
  const long budget = 600;
  const int trials = 100;
  TempDir da("abl_ax"), dn("abl_none");

  ExperimentConfig with = experiment_base(da.str(), "alphax", nodes, budget,
                                          trials, 9000);
  with.c = 0.2;
  with.k = 30;
  ExperimentOutput with_out = run_trials(with);
  ExperimentConfig without = experiment_base(dn.str(), "alphax-no-metadnn",
                                             nodes, budget, trials, 9000);
  without.c = 0.2;
  without.k = 30;
  ExperimentOutput without_out = run_trials(without);

  const double m_with = median_samples(with_out.trials, budget);
  const double m_without = median_samples(without_out.trials, budget);
  std::ostringstream os;
  os << "median with meta-DNN " << m_with << " vs without " << m_without;
  detail = os.str();
  return m_with <= m_without;
}

// ---------------------------------------------------------------------
// 8. random-search calibration

bool check_rs_calibration(std::string& detail) {
  SpaceConfig space = default_space(4);
  SyntheticBenchConfig bcfg;
  bcfg.seed = 23;
  bcfg.noise_scale = 0.0;
  auto backend = std::make_shared<SyntheticBench>(space, bcfg);
  auto [opt, acc] = global_optimum(*backend);
  // require a unique optimum
  auto states = enumerate_space(space);
  long hits = 0;
  for (const ArchState& s : states)
    if (backend->accuracy(s) == acc) ++hits;
  if (hits != 1) {
    detail = "optimum not unique for this landscape seed";
    return false;
  }
  const double n = static_cast<double>(states.size());
  double total = 0.0;
  const int trials = 500;
  for (int i = 0; i < trials; ++i) {
    Evaluator eval(backend);
    Trace t = random_search(space, eval, 1'000'000, 40000 + i, acc - 1e-12);
    total += static_cast<double>(t.rows.size());
  }
  const double mean = total / trials;
  std::ostringstream os;
  os << "space size " << n << ", mean samples " << mean << " vs n/2 "
     << n / 2;
  detail = os.str();
  return std::abs(mean - n / 2) <= 0.15 * (n / 2);
}

// ---------------------------------------------------------------------
// 9. Q-learning arithmetic + epsilon uniformity

bool check_qlearning(std::string& detail) {
  if (q_update(0.5, 1.0, 0.0, 0.2, 1.0) != 0.6) {
    detail = "Q' != 0.6 for (0.5, r=1, max=0, a=0.2, g=1)";
    return false;
  }
  if (q_update(0.5, 0.0, 0.5, 0.2, 1.0) != 0.5) {
    detail = "0.5 is not a fixed point of the neutral update";
    return false;
  }
  // epsilon = 1: the exploration draw must be uniform over the arity
  Rng rng(909);
  for (std::size_t arity : {2, 3, 5, 8}) {
    std::vector<long> counts(arity, 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) ++counts[uniform_index(rng, arity)];
    for (std::size_t a = 0; a < arity; ++a) {
      const double freq = static_cast<double>(counts[a]) / draws;
      if (std::abs(freq - 1.0 / static_cast<double>(arity)) > 0.03) {
        detail = "draw frequency off by more than 3%";
        return false;
      }
    }
  }
  detail = "Bellman cases exact; 10000-draw uniformity within 3%";
  return true;
}

// ---------------------------------------------------------------------
// 10. regularized-evolution discipline

bool check_re_discipline(std::string& detail) {
  SpaceConfig space = default_space(4);
  SyntheticBenchConfig bcfg;
  bcfg.seed = 31;
  Evaluator eval(std::make_shared<SyntheticBench>(space, bcfg));
  EvolutionConfig ecfg;
  ecfg.population = 20;
  ecfg.tournament = 5;
  long violations = 0, evictions = 0;
  ecfg.on_evict = [&](std::size_t pop, long evicted, long oldest) {
    ++evictions;
    if (pop != static_cast<std::size_t>(ecfg.population)) ++violations;
    if (evicted != oldest) ++violations;
  };
  regularized_evolution(space, eval, 200, ecfg, 77);
  if (evictions == 0 || violations != 0) {
    detail = "population/eviction discipline violated";
    return false;
  }
  // 10,000 mutations all valid
  Rng rng(111);
  for (int i = 0; i < 10000; ++i) {
    EncodingVector parent = encode(random_terminal_walk(space, rng));
    EncodingVector child = mutate(space, parent, rng);
    try {
      decode(space, child);
    } catch (const MalformedEncoding&) {
      detail = "mutation produced an invalid architecture";
      return false;
    }
  }
  std::ostringstream os;
  os << evictions << " evictions, 0 violations, 10000 valid mutations";
  detail = os.str();
  return true;
}

// ---------------------------------------------------------------------
// 11. distributed equivalence & fault tolerance

bool check_distributed(std::string& detail) {
  SpaceConfig space = default_space(5);
  SyntheticBenchConfig bcfg;
  bcfg.seed = 47;

  // (a) single synchronous worker == sequential, 200 samples
  const long budget = 200;
  auto seq_eval = std::make_shared<Evaluator>(
      std::make_shared<SyntheticBench>(space, bcfg));
  auto seq = fresh_engine(space, EngineMode::Sequential, seq_eval, 42);
  std::vector<std::string> seq_keys;
  while (seq_eval->distinct_evaluations() < budget) {
    RolloutResult r = seq->search_step();
    if (!r.cached) seq_keys.push_back(r.encoding.key());
  }

  auto backend = std::make_shared<SyntheticBench>(space, bcfg);
  auto dist_eval = std::make_shared<Evaluator>(backend);
  auto dist = fresh_engine(space, EngineMode::Distributed, dist_eval, 42);
  InMemoryHub hub;
  auto master = hub.master();
  auto wt = hub.connect_worker("w-1");
  std::thread worker([&] {
    WorkerConfig wc;
    wc.worker_id = "w-1";
    worker_loop(*wt, *backend, wc);
  });
  std::vector<std::string> dist_keys;
  MasterConfig mc;
  mc.sample_budget = budget;
  mc.high_watermark = 1;
  mc.on_evaluation = [&](const EvalRecord& r) {
    dist_keys.push_back(r.encoding.key());
  };
  JobQueue q;
  master_loop(*dist, q, *master, mc);
  worker.join();
  if (seq_keys != dist_keys) {
    detail = "sequential vs single-worker encoding sequences differ";
    return false;
  }

  // (b) fault injection: >= 100 dropped jobs, exactly-once completion
  auto ft_backend = std::make_shared<SyntheticBench>(space, bcfg);
  auto ft_eval = std::make_shared<Evaluator>(ft_backend);
  auto ft_engine = fresh_engine(space, EngineMode::Distributed, ft_eval, 7);
  InMemoryHub ft_hub;
  auto ft_master = ft_hub.master();
  std::atomic<long> dropped{0};
  const long ft_budget = 150;

  // faulty worker: drops every job on the floor (simulating a kill
  // mid-job) until 100 failures are injected, then behaves normally
  auto faulty = ft_hub.connect_worker("w-faulty");
  std::thread faulty_thread([&] {
    Message hello;
    hello.type = Message::Type::Hello;
    hello.worker_id = "w-faulty";
    faulty->send(hello);
    while (true) {
      auto m = faulty->receive(std::chrono::milliseconds(100));
      if (!m) continue;
      if (m->type == Message::Type::Shutdown) return;
      if (m->type != Message::Type::Job) continue;
      if (dropped.load() < 100) {
        ++dropped;  // job vanishes: no result, no release
        continue;
      }
      Message r;
      r.type = Message::Type::Result;
      r.job_id = m->job_id;
      r.encoding = m->encoding;
      r.accuracy = ft_backend->accuracy(decode(space, *m->encoding));
      faulty->send(r);
    }
  });
  // healthy but slow worker: without the delay it would drain the whole
  // budget before the first stale sweep ever re-enables w-faulty
  auto good = ft_hub.connect_worker("w-good");
  std::thread good_thread([&] {
    Message hello;
    hello.type = Message::Type::Hello;
    hello.worker_id = "w-good";
    good->send(hello);
    while (true) {
      auto m = good->receive(std::chrono::milliseconds(100));
      if (!m) continue;
      if (m->type == Message::Type::Shutdown) return;
      if (m->type != Message::Type::Job) continue;
      std::this_thread::sleep_for(std::chrono::milliseconds(150));
      Message r;
      r.type = Message::Type::Result;
      r.job_id = m->job_id;
      r.encoding = m->encoding;
      r.accuracy = ft_backend->accuracy(decode(space, *m->encoding));
      good->send(r);
    }
  });

  long applied = 0;
  MasterConfig ft_mc;
  ft_mc.sample_budget = ft_budget;
  ft_mc.stale_timeout = std::chrono::milliseconds(120);
  ft_mc.on_evaluation = [&](const EvalRecord&) { ++applied; };
  JobQueue ft_q;
  MasterSummary ft_summary = master_loop(*ft_engine, ft_q, *ft_master, ft_mc);
  faulty_thread.join();
  good_thread.join();
  if (ft_summary.samples != ft_budget || applied != ft_budget ||
      ft_eval->distinct_evaluations() != ft_budget) {
    detail = "fault-injected run lost or double-applied results";
    return false;
  }

  // (c) snapshot-interrupt-resume CSV equality
  TempDir full_dir("dist_full"), cut_dir("dist_cut");
  ExperimentConfig cfg = experiment_base(full_dir.str(), "alphax", 4, 80, 1,
                                         321);
  cfg.stop_at_optimum = false;
  ExperimentOutput full = run_trials(cfg);

  ExperimentConfig cut = cfg;
  cut.out_dir = cut_dir.str();
  cut.budget = 40;
  cut.snapshot_every = 1;
  run_trials(cut);
  Trace resumed = resume_run((cut_dir.path / "snapshot.bin").string(), 80);
  write_samples_csv((cut_dir.path / "resumed.csv").string(), cfg.algo,
                    {resumed});
  std::ifstream fa(full_dir.path / "samples.csv"),
      fb(cut_dir.path / "resumed.csv");
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  if (sa.str() != sb.str() || sa.str().empty()) {
    detail = "resumed CSV differs from the uninterrupted run";
    return false;
  }

  std::ostringstream os;
  os << "200-sample sync equivalence; " << dropped.load()
     << " injected faults with exactly-once completion; resume CSV equal";
  detail = os.str();
  return dropped.load() >= 100;
}

// ---------------------------------------------------------------------
// 12. transfer cost accounting

bool check_cost_accounting(std::string& detail) {
  TempDir dir("cost");
  ExperimentConfig cfg = experiment_base(dir.str(), "alphax", 4, 60, 2, 55);
  cfg.stop_at_optimum = false;
  ExperimentOutput out = run_trials(cfg);

  // recount from the emitted trace CSV
  std::ifstream in(dir.path / "samples.csv");
  std::string line;
  std::getline(in, line);  // header
  std::map<std::string, long> csv_epochs;  // seed -> total
  long seventy = 0, twenty = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    if (cols.size() != 7) {
      detail = "bad CSV row: " + line;
      return false;
    }
    const int epochs = std::stoi(cols[6]);
    if (epochs == 70)
      ++seventy;
    else if (epochs == 20)
      ++twenty;
    else {
      detail = "unexpected epoch charge " + cols[6];
      return false;
    }
    csv_epochs[cols[1]] += epochs;
  }
  if (twenty == 0) {
    detail = "no transfer-parent evaluations occurred";
    return false;
  }
  for (std::size_t i = 0; i < out.trials.size(); ++i) {
    const std::string seed = std::to_string(out.trials[i].seed);
    if (csv_epochs[seed] != out.trials[i].total_epochs_charged) {
      detail = "CSV recount disagrees with the trial total";
      return false;
    }
  }
  std::ostringstream os;
  os << seventy << " evals at 70 epochs, " << twenty
     << " at 20; totals match the CSV recount";
  detail = os.str();
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc)
      only = std::atoi(argv[++i]);
  }

  const std::vector<Check> checks = {
      {1, "two-phase backprop equivalence", check_two_phase},
      {2, "UCB1 correctness and unvisited-first selection", check_ucb},
      {3, "encoding fidelity and round trips", check_encoding},
      {4, "surrogate analytic gradients vs finite differences",
       check_gradients},
      {5, "surrogate train-set capacity (Pearson >= 0.99)", check_capacity},
      {6, "sample-efficiency ordering vs random search and evolution",
       check_efficiency},
      {7, "meta-DNN ablation direction", check_ablation},
      {8, "random-search n/2 calibration", check_rs_calibration},
      {9, "Q-learning update arithmetic and exploration uniformity",
       check_qlearning},
      {10, "regularized-evolution population discipline", check_re_discipline},
      {11, "distributed equivalence and fault tolerance", check_distributed},
      {12, "transfer cost accounting", check_cost_accounting},
  };

  int failures = 0;
  for (const Check& c : checks) {
    if (only != 0 && c.id != only) continue;
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << "criterion " << c.id << ": "
              << c.title << (detail.empty() ? "" : " — " + detail)
              << std::endl;
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
