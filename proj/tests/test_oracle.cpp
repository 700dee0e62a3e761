#include "doctest.h"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "alphax/baselines.hpp"
#include "alphax/errors.hpp"
#include "alphax/oracle.hpp"

using namespace alphax;

namespace {

SpaceConfig small_space() {
  SpaceConfig cfg = SpaceConfig::make(SpaceKind::NasBenchDag);
  cfg.max_dag_nodes = 4;
  return cfg;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& contents) {
    static int counter = 0;
    path = "alphax_test_tmp_" + std::to_string(counter++) + ".jsonl";
    std::ofstream out(path, std::ios::binary);
    out << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

class ConstantOracle final : public OracleBackend {
 public:
  explicit ConstantOracle(SpaceConfig space) : space_(space) {}
  double accuracy(const ArchState&) const override { return 0.5; }
  const SpaceConfig& space() const override { return space_; }

 private:
  SpaceConfig space_;
};

}  // namespace

TEST_CASE("synthetic accuracy is deterministic and in range") {
  SpaceConfig space = small_space();
  SyntheticBench bench(space, SyntheticBenchConfig{.seed = 3});
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    ArchState s = random_terminal_walk(space, rng);
    double a = bench.accuracy(s);
    CHECK(a == bench.accuracy(s));
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("synthetic accuracy is a function of the canonical encoding") {
  SpaceConfig space = small_space();
  SyntheticBench bench(space, SyntheticBenchConfig{.seed = 3});
  // two different action orders reaching the same architecture
  ArchState a = initial_state(space);
  a = apply(space, a, {Action::Kind::AddNode, 1});
  a = apply(space, a, {Action::Kind::AddEdge, 0, 2});
  a = apply(space, a, {Action::Kind::AddEdge, 2, 1});
  ArchState b = initial_state(space);
  b = apply(space, b, {Action::Kind::AddNode, 1});
  b = apply(space, b, {Action::Kind::AddEdge, 2, 1});
  b = apply(space, b, {Action::Kind::AddEdge, 0, 2});
  REQUIRE(encode(a) == encode(b));
  CHECK(bench.accuracy(a) == bench.accuracy(b));
}

TEST_CASE("noise-free synthetic optimum matches a closed-form scan") {
  SpaceConfig space = small_space();
  SyntheticBenchConfig cfg;
  cfg.seed = 11;
  cfg.noise_scale = 0.0;
  SyntheticBench bench(space, cfg);

  auto states = enumerate_space(space);
  double best = -1.0;
  EncodingVector best_enc;
  for (const ArchState& s : states) {
    double a = bench.accuracy(s);
    EncodingVector e = encode(s);
    if (a > best || (a == best && e < best_enc)) {
      best = a;
      best_enc = e;
    }
  }
  auto [opt, acc] = global_optimum(bench);
  CHECK(acc == best);
  CHECK(encode(opt) == best_enc);
}

TEST_CASE("noise is bounded by noise_scale") {
  SpaceConfig space = small_space();
  SyntheticBenchConfig noisy;
  noisy.seed = 5;
  SyntheticBenchConfig clean = noisy;
  clean.noise_scale = 0.0;
  SyntheticBench nb(space, noisy), cb(space, clean);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    ArchState s = random_terminal_walk(space, rng);
    CHECK(std::abs(nb.accuracy(s) - cb.accuracy(s)) <=
          noisy.noise_scale + 1e-12);
  }
}

TEST_CASE("global_optimum ties break to the smallest encoding") {
  SpaceConfig space = small_space();
  ConstantOracle bench(space);
  auto [opt, acc] = global_optimum(bench);
  CHECK(acc == 0.5);
  EncodingVector opt_enc = encode(opt);
  for (const ArchState& s : enumerate_space(space)) {
    EncodingVector e = encode(s);
    CHECK_FALSE(e < opt_enc);
  }
}

TEST_CASE("evaluator: transfer epochs and caching") {
  SpaceConfig space = small_space();
  Evaluator eval(std::make_shared<SyntheticBench>(space, SyntheticBenchConfig{}));
  Rng rng(8);
  ArchState x = random_terminal_walk(space, rng);
  ArchState y = random_terminal_walk(space, rng);
  while (encode(y) == encode(x)) y = random_terminal_walk(space, rng);

  EvalRecord r1 = eval.evaluate(x, std::nullopt);
  CHECK(r1.epochs_charged == 70);
  CHECK_FALSE(r1.cached);

  EvalRecord r2 = eval.evaluate(y, encode(x));
  CHECK(r2.epochs_charged == 20);
  REQUIRE(r2.transfer_parent.has_value());
  CHECK(*r2.transfer_parent == encode(x));

  EvalRecord r3 = eval.evaluate(x, std::nullopt);
  CHECK(r3.cached);
  CHECK(r3.epochs_charged == 0);
  CHECK(r3.accuracy == r1.accuracy);

  CHECK(eval.total_epochs_charged() == 90);
  CHECK(eval.distinct_evaluations() == 2);
}

TEST_CASE("tabular bench loading") {
  SpaceConfig space = SpaceConfig::make(SpaceKind::NasBenchDag);
  space.max_dag_nodes = 2;
  EncodingVector e0 = encode(enumerate_space(space)[0]);
  EncodingVector e1 = encode(enumerate_space(space)[1]);
  auto line = [](const EncodingVector& e, double acc) {
    nlohmann::json j = {{"encoding", e.digits}, {"accuracy", acc}};
    return j.dump() + "\n";
  };

  SUBCASE("valid file with meta header") {
    TempFile f("{\"meta\": {\"space\": \"nasbench\"}}\n" + line(e0, 0.4) +
               line(e1, 0.9));
    TabularBench bench = load_tabular(space, f.path);
    CHECK(bench.size() == 2);
    ArchState s0 = decode(space, e0);
    CHECK(bench.accuracy(s0) == 0.4);
  }
  SUBCASE("accuracy out of range names the line") {
    TempFile f(line(e0, 0.4) + line(e1, 1.2));
    try {
      load_tabular(space, f.path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
  }
  SUBCASE("conflicting duplicate rejected, equal duplicate allowed") {
    TempFile bad(line(e0, 0.4) + line(e0, 0.5));
    CHECK_THROWS_AS(load_tabular(space, bad.path), ParseError);
    TempFile ok(line(e0, 0.4) + line(e0, 0.4));
    CHECK(load_tabular(space, ok.path).size() == 1);
  }
  SUBCASE("bad JSON names the line") {
    TempFile f(line(e0, 0.4) + "not json\n");
    CHECK_THROWS_AS(load_tabular(space, f.path), ParseError);
  }
  SUBCASE("bad encoding digits") {
    EncodingVector broken = e0;
    broken.digits[2 * 7 + 0] = 1;  // cyclic entry
    TempFile f(line(broken, 0.4));
    CHECK_THROWS_AS(load_tabular(space, f.path), MalformedEncoding);
  }
  SUBCASE("missing entry at lookup time") {
    TempFile f(line(e0, 0.4));
    TabularBench bench = load_tabular(space, f.path);
    CHECK_THROWS_AS(bench.accuracy(decode(space, e1)), MissingEntry);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_tabular(space, "does_not_exist.jsonl"), IoError);
  }
}

TEST_CASE("cost accounting identity over a run") {
  SpaceConfig space = small_space();
  Evaluator eval(std::make_shared<SyntheticBench>(space, SyntheticBenchConfig{}));
  Rng rng(99);
  long no_parent = 0, with_parent = 0;
  std::optional<EncodingVector> prev;
  for (int i = 0; i < 100; ++i) {
    ArchState s = random_terminal_walk(space, rng);
    bool was_cached = eval.is_cached(encode(s));
    std::optional<EncodingVector> parent =
        (i % 3 == 0) ? std::nullopt : prev;
    EvalRecord r = eval.evaluate(s, parent);
    if (!was_cached) {
      if (parent)
        ++with_parent;
      else
        ++no_parent;
    }
    prev = r.encoding;
  }
  CHECK(eval.total_epochs_charged() == 70 * no_parent + 20 * with_parent);
}
