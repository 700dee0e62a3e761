#include "doctest.h"

#include <atomic>
#include <thread>

#include "alphax/dist.hpp"
#include "alphax/errors.hpp"

using namespace alphax;

namespace {

SpaceConfig small_space() {
  SpaceConfig cfg = SpaceConfig::make(SpaceKind::NasBenchDag);
  cfg.max_dag_nodes = 4;
  return cfg;
}

EncodingVector some_encoding(const SpaceConfig& space, int idx) {
  return encode(enumerate_space(space)[static_cast<std::size_t>(idx)]);
}

std::unique_ptr<Engine> make_engine(const SpaceConfig& space, EngineMode mode,
                                    std::shared_ptr<Evaluator> eval,
                                    std::uint64_t seed = 7) {
  SearchConfig cfg;
  cfg.c = 0.5;
  cfg.k = 3;
  cfg.rng_seed = seed;
  return std::make_unique<Engine>(space, cfg,
                                  std::make_shared<ConstantMeanSurrogate>(),
                                  std::move(eval), mode);
}

}  // namespace

TEST_CASE("message codec round trips every variant") {
  SpaceConfig space = small_space();
  Message hello;
  hello.type = Message::Type::Hello;
  hello.worker_id = "w-1";
  hello.capabilities = "synthetic";

  Message job;
  job.type = Message::Type::Job;
  job.job_id = "42";
  job.encoding = some_encoding(space, 1);
  job.transfer_parent = some_encoding(space, 0);
  job.epoch_budget = 20;

  Message result;
  result.type = Message::Type::Result;
  result.job_id = "42";
  result.encoding = some_encoding(space, 1);
  result.accuracy = 0.84;

  Message heartbeat;
  heartbeat.type = Message::Type::Heartbeat;
  heartbeat.worker_id = "w-1";

  Message shutdown;
  shutdown.type = Message::Type::Shutdown;

  for (const Message& m : {hello, job, result, heartbeat, shutdown}) {
    std::string frame = encode_message(m);
    CHECK(decode_message(frame) == m);
  }
  // accuracy survives exactly
  CHECK(decode_message(encode_message(result)).accuracy == 0.84);
  // a job without a transfer parent stays parentless
  job.transfer_parent.reset();
  job.epoch_budget = 70;
  Message back = decode_message(encode_message(job));
  CHECK_FALSE(back.transfer_parent.has_value());
  CHECK(back.epoch_budget == 70);
}

TEST_CASE("decode_message rejects malformed frames") {
  CHECK_THROWS_AS(decode_message(""), FrameError);
  CHECK_THROWS_AS(decode_message("{not json"), FrameError);
  CHECK_THROWS_AS(decode_message("{\"type\":\"bogus\"}"), FrameError);
  CHECK_THROWS_AS(decode_message("[1,2,3]"), FrameError);
}

TEST_CASE("job queue state discipline") {
  SpaceConfig space = small_space();
  JobQueue q;
  auto now = Clock::now();

  SUBCASE("push/dispatch/complete happy path") {
    std::uint64_t id = q.push(some_encoding(space, 0), std::nullopt, 70);
    CHECK(q.pending_count() == 1);
    auto job = q.dispatch("w", now);
    REQUIRE(job.has_value());
    CHECK(job->job_id == id);
    CHECK(q.pending_count() == 0);
    CHECK(q.inflight_count() == 1);
    CHECK(q.complete(id));
    CHECK(q.inflight_count() == 0);
    CHECK(q.completed_count() == 1);
    CHECK(q.is_completed(id));
  }
  SUBCASE("dispatch is FIFO and empties cleanly") {
    auto a = q.push(some_encoding(space, 0), std::nullopt, 70);
    auto b = q.push(some_encoding(space, 1), std::nullopt, 70);
    CHECK(q.dispatch("w", now)->job_id == a);
    CHECK(q.dispatch("w", now)->job_id == b);
    CHECK_FALSE(q.dispatch("w", now).has_value());
  }
  SUBCASE("complete is idempotent and ignores unknown ids") {
    auto id = q.push(some_encoding(space, 0), std::nullopt, 70);
    q.dispatch("w", now);
    CHECK(q.complete(id));
    CHECK_FALSE(q.complete(id));
    CHECK_FALSE(q.complete(999));
    CHECK(q.completed_count() == 1);
  }
  SUBCASE("requeue_stale returns old jobs to the front") {
    auto a = q.push(some_encoding(space, 0), std::nullopt, 70);
    q.push(some_encoding(space, 1), std::nullopt, 70);
    q.dispatch("w1", now);
    CHECK(q.requeue_stale(now + std::chrono::seconds(30),
                          std::chrono::seconds(10)) == 1);
    CHECK(q.inflight_count() == 0);
    CHECK(q.pending_count() == 2);
    // the requeued job is dispatched before the younger pending one
    CHECK(q.dispatch("w2", now)->job_id == a);
  }
  SUBCASE("requeue then late result completes the job exactly once") {
    auto id = q.push(some_encoding(space, 0), std::nullopt, 70);
    q.dispatch("w1", now);
    q.requeue_stale(now + std::chrono::seconds(30), std::chrono::seconds(10));
    // late result from w1 arrives while the copy is pending again
    CHECK(q.complete(id));
    CHECK(q.completed_count() == 1);
    // the pending duplicate must not be dispatched
    CHECK_FALSE(q.dispatch("w2", now).has_value());
    CHECK(q.outstanding() == 0);
  }
  SUBCASE("release_worker returns only that worker's jobs") {
    auto a = q.push(some_encoding(space, 0), std::nullopt, 70);
    auto b = q.push(some_encoding(space, 1), std::nullopt, 70);
    q.dispatch("w1", now);
    q.dispatch("w2", now);
    CHECK(q.release_worker("w1") == 1);
    CHECK(q.inflight_count() == 1);
    CHECK(q.pending_count() == 1);
    CHECK(q.dispatch("w3", now)->job_id == a);
    CHECK(q.complete(b));
  }
  SUBCASE("conservation: pending + inflight + completed == pushed") {
    Rng rng(5);
    std::vector<std::uint64_t> ids;
    for (int i = 0; i < 50; ++i)
      ids.push_back(q.push(some_encoding(space, i % 8), std::nullopt, 70));
    for (int i = 0; i < 30; ++i) q.dispatch("w", now);
    for (int i = 0; i < 20; ++i) q.complete(ids[static_cast<std::size_t>(i)]);
    CHECK(q.pending_count() + q.inflight_count() + q.completed_count() == 50);
  }
}

TEST_CASE("in-memory transport delivers frames both ways") {
  InMemoryHub hub;
  auto master = hub.master();
  auto worker = hub.connect_worker("w-1");

  Message hello;
  hello.type = Message::Type::Hello;
  hello.worker_id = "w-1";
  worker->send(hello);

  auto events = master->poll(std::chrono::milliseconds(200));
  REQUIRE(events.size() == 1);
  CHECK(events[0].worker_id == "w-1");
  CHECK(events[0].message == hello);

  Message job;
  job.type = Message::Type::Job;
  job.job_id = "1";
  job.encoding = some_encoding(small_space(), 0);
  job.epoch_budget = 70;
  master->send("w-1", job);
  auto got = worker->receive(std::chrono::milliseconds(200));
  REQUIRE(got.has_value());
  CHECK(*got == job);

  master->broadcast_shutdown();
  auto down = worker->receive(std::chrono::milliseconds(200));
  REQUIRE(down.has_value());
  CHECK(down->type == Message::Type::Shutdown);
}

TEST_CASE("master loop runs a full search with one worker") {
  SpaceConfig space = small_space();
  auto backend =
      std::make_shared<SyntheticBench>(space, SyntheticBenchConfig{.seed = 1});
  auto eval = std::make_shared<Evaluator>(backend);
  auto engine = make_engine(space, EngineMode::Distributed, eval);

  InMemoryHub hub;
  auto master = hub.master();
  auto wt = hub.connect_worker("w-1");
  std::thread worker([&] {
    WorkerConfig wc;
    wc.worker_id = "w-1";
    worker_loop(*wt, *backend, wc);
  });

  MasterConfig mc;
  mc.sample_budget = 50;
  long seen = 0;
  mc.on_evaluation = [&](const EvalRecord&) { ++seen; };
  JobQueue q;
  MasterSummary summary = master_loop(*engine, q, *master, mc);
  worker.join();

  CHECK(seen == 50);
  CHECK(summary.samples == 50);
  CHECK(eval->distinct_evaluations() == 50);
  CHECK(summary.best_accuracy > 0.0);
  REQUIRE(summary.best_encoding.has_value());
  CHECK(summary.best_accuracy ==
        backend->accuracy(decode(space, *summary.best_encoding)));
  // jobs pre-filled up to the watermark may still be pending when the
  // budget stops the loop; they are bounded by the watermark
  CHECK(engine->pending_count() <= 3);
}

TEST_CASE("single worker at watermark 1 reproduces the sequential run") {
  SpaceConfig space = small_space();
  SyntheticBenchConfig bcfg;
  bcfg.seed = 2;
  const long budget = 40;

  // sequential reference
  auto seq_eval = std::make_shared<Evaluator>(
      std::make_shared<SyntheticBench>(space, bcfg));
  auto seq = make_engine(space, EngineMode::Sequential, seq_eval, 11);
  std::vector<std::pair<std::string, double>> seq_rows;
  while (seq_eval->distinct_evaluations() < budget) {
    RolloutResult r = seq->search_step();
    if (!r.cached)
      seq_rows.emplace_back(r.encoding.key(), *r.actual_accuracy);
  }

  // distributed with one synchronous worker
  auto backend = std::make_shared<SyntheticBench>(space, bcfg);
  auto dist_eval = std::make_shared<Evaluator>(backend);
  auto dist = make_engine(space, EngineMode::Distributed, dist_eval, 11);
  InMemoryHub hub;
  auto master = hub.master();
  auto wt = hub.connect_worker("w-1");
  std::thread worker([&] {
    WorkerConfig wc;
    wc.worker_id = "w-1";
    worker_loop(*wt, *backend, wc);
  });
  std::vector<std::pair<std::string, double>> dist_rows;
  MasterConfig mc;
  mc.sample_budget = budget;
  mc.high_watermark = 1;
  mc.on_evaluation = [&](const EvalRecord& r) {
    dist_rows.emplace_back(r.encoding.key(), r.accuracy);
  };
  JobQueue q;
  master_loop(*dist, q, *master, mc);
  worker.join();

  CHECK(seq_rows == dist_rows);
}

TEST_CASE("flaky worker: results are recovered via requeue") {
  SpaceConfig space = small_space();
  auto backend =
      std::make_shared<SyntheticBench>(space, SyntheticBenchConfig{.seed = 3});
  auto eval = std::make_shared<Evaluator>(backend);
  auto engine = make_engine(space, EngineMode::Distributed, eval);

  InMemoryHub hub;
  auto master = hub.master();

  // worker 1 answers two jobs then silently stops consuming
  auto w1 = hub.connect_worker("w-flaky");
  std::thread flaky([&] {
    Message hello;
    hello.type = Message::Type::Hello;
    hello.worker_id = "w-flaky";
    w1->send(hello);
    int answered = 0;
    while (answered < 2) {
      auto m = w1->receive(std::chrono::milliseconds(200));
      if (!m) continue;
      if (m->type == Message::Type::Shutdown) return;
      if (m->type != Message::Type::Job) continue;
      Message r;
      r.type = Message::Type::Result;
      r.job_id = m->job_id;
      r.encoding = m->encoding;
      r.accuracy = backend->accuracy(decode(space, *m->encoding));
      w1->send(r);
      ++answered;
    }
    // drain until shutdown without answering
    while (true) {
      auto m = w1->receive(std::chrono::milliseconds(200));
      if (m && m->type == Message::Type::Shutdown) return;
      if (!m) return;
    }
  });

  auto w2 = hub.connect_worker("w-good");
  std::thread good([&] {
    WorkerConfig wc;
    wc.worker_id = "w-good";
    worker_loop(*w2, *backend, wc);
  });

  MasterConfig mc;
  mc.sample_budget = 25;
  mc.stale_timeout = std::chrono::milliseconds(300);
  JobQueue q;
  MasterSummary summary = master_loop(*engine, q, *master, mc);
  flaky.join();
  good.join();

  CHECK(summary.samples == 25);
  CHECK(eval->distinct_evaluations() == 25);
}

TEST_CASE("stop_at_accuracy halts the master early") {
  SpaceConfig space = small_space();
  auto backend =
      std::make_shared<SyntheticBench>(space, SyntheticBenchConfig{.seed = 4});
  auto eval = std::make_shared<Evaluator>(backend);
  auto engine = make_engine(space, EngineMode::Distributed, eval);

  InMemoryHub hub;
  auto master = hub.master();
  auto wt = hub.connect_worker("w-1");
  std::thread worker([&] {
    WorkerConfig wc;
    wc.worker_id = "w-1";
    worker_loop(*wt, *backend, wc);
  });

  MasterConfig mc;
  mc.sample_budget = 100000;
  mc.high_watermark = 1;
  mc.stop_at_accuracy = 0.0;  // every result qualifies
  JobQueue q;
  MasterSummary summary = master_loop(*engine, q, *master, mc);
  worker.join();
  CHECK(summary.samples == 1);
}
