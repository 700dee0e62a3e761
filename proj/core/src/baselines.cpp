#include "alphax/baselines.hpp"

#include <algorithm>
#include <deque>
#include <map>

namespace alphax {

namespace {

void record(Trace& t, const EvalRecord& rec) {
  TraceRow row;
  row.encoding = rec.encoding;
  row.accuracy = rec.accuracy;
  row.epochs_charged = rec.epochs_charged;
  if (rec.accuracy > t.best_accuracy) {
    t.best_accuracy = rec.accuracy;
    t.best_encoding = rec.encoding;
  }
  row.best_so_far = t.best_accuracy;
  t.rows.push_back(std::move(row));
}

bool done(const Trace& t, long budget, std::optional<double> stop_at) {
  if (static_cast<long>(t.rows.size()) >= budget) return true;
  return stop_at && t.best_accuracy >= *stop_at;
}

}  // namespace

ArchState random_terminal_walk(const SpaceConfig& cfg, Rng& rng) {
  ArchState s = initial_state(cfg);
  while (!s.is_terminal) {
    auto actions = legal_actions(cfg, s);
    s = apply(cfg, s, actions[uniform_index(rng, actions.size())]);
  }
  return s;
}

EncodingVector mutate(const SpaceConfig& cfg, const EncodingVector& parent,
                      Rng& rng, int max_retries) {
  const int max_digit = encoding_max_digit(parent.space);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    EncodingVector child = parent;
    std::size_t pos = uniform_index(rng, child.digits.size());
    int old = child.digits[pos];
    int nv = static_cast<int>(uniform_index(rng, max_digit + 1));
    if (nv == old) nv = (nv + 1) % (max_digit + 1);
    child.digits[pos] = nv;
    try {
      decode(cfg, child);
    } catch (const MalformedEncoding&) {
      continue;
    }
    return child;
  }
  return encode(random_terminal_walk(cfg, rng));
}

Trace random_search(const SpaceConfig& cfg, Evaluator& oracle, long budget,
                    std::uint64_t seed, std::optional<double> stop_at_accuracy,
                    std::size_t state_cap) {
  Trace t;
  t.algo = "rs";
  t.seed = seed;
  Rng rng(seed);
  std::vector<ArchState> space = enumerate_space(cfg, state_cap);
  std::vector<std::size_t> order(space.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  deterministic_shuffle(order, rng);
  for (std::size_t i : order) {
    if (done(t, budget, stop_at_accuracy)) break;
    record(t, oracle.evaluate(space[i], std::nullopt));
  }
  return t;
}

Trace regularized_evolution(const SpaceConfig& cfg, Evaluator& oracle,
                            long budget, const EvolutionConfig& ecfg,
                            std::uint64_t seed,
                            std::optional<double> stop_at_accuracy) {
  Trace t;
  t.algo = "re";
  t.seed = seed;
  Rng rng(seed);
  struct Member {
    EncodingVector encoding;
    double accuracy;
    long birth;
  };
  std::deque<Member> population;
  long births = 0;

  // warmup
  while (static_cast<int>(population.size()) < ecfg.population &&
         !done(t, budget, stop_at_accuracy)) {
    ArchState s = random_terminal_walk(cfg, rng);
    EvalRecord rec = oracle.evaluate(s, std::nullopt);
    record(t, rec);
    population.push_back({rec.encoding, rec.accuracy, births++});
  }

  while (!done(t, budget, stop_at_accuracy)) {
    // tournament: T members sampled uniformly with replacement
    std::size_t best = uniform_index(rng, population.size());
    for (int i = 1; i < ecfg.tournament; ++i) {
      std::size_t cand = uniform_index(rng, population.size());
      if (population[cand].accuracy > population[best].accuracy) best = cand;
    }
    EncodingVector child = mutate(cfg, population[best].encoding, rng);
    EvalRecord rec = oracle.evaluate(decode(cfg, child), std::nullopt);
    record(t, rec);
    population.push_back({rec.encoding, rec.accuracy, births++});
    if (static_cast<int>(population.size()) > ecfg.population) {
      long oldest = std::min_element(population.begin(), population.end(),
                                     [](const Member& a, const Member& b) {
                                       return a.birth < b.birth;
                                     })
                        ->birth;
      long evicted = population.front().birth;
      population.pop_front();  // evict the oldest
      if (ecfg.on_evict) ecfg.on_evict(population.size(), evicted, oldest);
    }
  }
  return t;
}

double q_update(double q, double reward, double max_next, double alpha,
                double gamma) {
  return q + alpha * (reward + gamma * max_next - q);
}

Trace q_learning(const SpaceConfig& cfg, Evaluator& oracle, long budget,
                 const QLearningConfig& qcfg, std::uint64_t seed,
                 std::optional<double> stop_at_accuracy) {
  enumerate_space(cfg, qcfg.state_cap);  // table-size guard: SpaceTooLarge

  Trace t;
  t.algo = "ql";
  t.seed = seed;
  Rng rng(seed);
  // (state key, action index in canonical order) -> Q
  std::map<std::pair<std::string, std::size_t>, double> table;
  auto q_of = [&](const std::string& key, std::size_t a) {
    auto it = table.find({key, a});
    return it == table.end() ? qcfg.q_init : it->second;
  };

  while (!done(t, budget, stop_at_accuracy)) {
    // one episode
    struct Step {
      std::string key;
      std::size_t action;
      std::string next_key;
      std::size_t next_arity;  // 0 at terminal
    };
    std::vector<Step> episode;
    ArchState s = initial_state(cfg);
    while (!s.is_terminal) {
      std::string key = encode(s).key();
      auto actions = legal_actions(cfg, s);
      std::size_t pick;
      if (uniform_real(rng) < qcfg.epsilon) {
        pick = uniform_index(rng, actions.size());
      } else {
        pick = 0;
        for (std::size_t a = 1; a < actions.size(); ++a)
          if (q_of(key, a) > q_of(key, pick)) pick = a;
      }
      ArchState next = apply(cfg, s, actions[pick]);
      auto next_actions =
          next.is_terminal ? std::vector<Action>{} : legal_actions(cfg, next);
      episode.push_back(
          {key, pick, encode(next).key(), next_actions.size()});
      s = std::move(next);
    }

    EvalRecord rec = oracle.evaluate(s, std::nullopt);
    record(t, rec);

    // reverse-order one-step updates; reward only at the terminal step
    for (auto it = episode.rbegin(); it != episode.rend(); ++it) {
      double reward = (it == episode.rbegin()) ? rec.accuracy : 0.0;
      double max_next = 0.0;
      for (std::size_t a = 0; a < it->next_arity; ++a)
        max_next = std::max(max_next, q_of(it->next_key, a));
      double q = q_of(it->key, it->action);
      table[{it->key, it->action}] =
          q_update(q, reward, max_next, qcfg.alpha, qcfg.gamma);
    }
  }
  return t;
}

Trace hill_climbing(const SpaceConfig& cfg, Evaluator& oracle, long budget,
                    std::uint64_t seed,
                    std::optional<double> stop_at_accuracy) {
  Trace t;
  t.algo = "hc";
  t.seed = seed;
  Rng rng(seed);

  // A partially-built restart state: a uniform-depth prefix of a random
  // action walk (Terminate excluded until the chosen depth is reached).
  auto random_restart = [&] {
    ArchState s = initial_state(cfg);
    std::size_t depth = uniform_index(rng, 6);
    for (std::size_t d = 0; d < depth; ++d) {
      std::vector<Action> growth;
      for (const Action& a : legal_actions(cfg, s))
        if (a.kind != Action::Kind::Terminate) growth.push_back(a);
      if (growth.empty()) break;
      s = apply(cfg, s, growth[uniform_index(rng, growth.size())]);
    }
    return s;
  };

  // Scores a state at its terminal form; walks the rest of the way when
  // Terminate is not immediately legal.
  auto terminal_form = [&](ArchState s) {
    while (!s.is_terminal) {
      auto actions = legal_actions(cfg, s);
      auto term = std::find_if(actions.begin(), actions.end(), [](const Action& a) {
        return a.kind == Action::Kind::Terminate;
      });
      if (term != actions.end())
        s = apply(cfg, s, *term);
      else
        s = apply(cfg, s, actions[uniform_index(rng, actions.size())]);
    }
    return s;
  };

  ArchState current = random_restart();
  double current_score = -1.0;

  while (!done(t, budget, stop_at_accuracy)) {
    auto actions = legal_actions(cfg, current);
    ArchState best_child;
    double best_score = -1.0;
    bool have_child = false;
    for (const Action& a : actions) {
      if (done(t, budget, stop_at_accuracy)) break;
      if (a.kind == Action::Kind::Terminate) continue;
      ArchState child = apply(cfg, current, a);
      EvalRecord rec = oracle.evaluate(terminal_form(child), std::nullopt);
      record(t, rec);
      if (rec.accuracy > best_score) {
        best_score = rec.accuracy;
        best_child = child;
        have_child = true;
      }
    }
    if (have_child && best_score > current_score) {
      current = std::move(best_child);
      current_score = best_score;
    } else {
      current = random_restart();  // local optimum (or dead end)
      current_score = -1.0;
    }
  }
  return t;
}

}  // namespace alphax
