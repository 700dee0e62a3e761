#pragma once

// Master-worker runtime: newline-delimited JSON wire protocol, job queue
// with requeue-on-timeout and idempotent completion, and the master /
// worker loops. The in-memory and TCP transports share one interface so
// the distributed tests need no sockets.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "alphax/mcts.hpp"
#include "alphax/space.hpp"

namespace alphax {

struct Message {
  enum class Type { Hello, Job, Result, Heartbeat, Shutdown };
  Type type = Type::Heartbeat;

  std::string worker_id;     // hello, heartbeat
  std::string capabilities;  // hello
  std::string job_id;        // job, result (decimal string)
  std::optional<EncodingVector> encoding;          // job, result
  std::optional<EncodingVector> transfer_parent;   // job
  int epoch_budget = 0;                            // job
  double accuracy = 0.0;                           // result

  bool operator==(const Message&) const = default;
};

// One UTF-8 JSON object per LF-terminated line. decode_message throws
// FrameError on an empty frame, bad JSON, or an unknown tag; unknown
// fields are ignored.
std::string encode_message(const Message& m);
Message decode_message(const std::string& frame);

struct JobRecord {
  std::uint64_t job_id = 0;
  EncodingVector encoding;
  std::optional<EncodingVector> transfer_parent;
  int epoch_budget = 70;
  std::optional<double> accuracy;
};

using Clock = std::chrono::steady_clock;

// A job is in exactly one of {pending, in-flight, completed}.
class JobQueue {
 public:
  std::uint64_t push(EncodingVector enc,
                     std::optional<EncodingVector> parent, int epoch_budget);
  std::optional<JobRecord> dispatch(const std::string& worker_id,
                                    Clock::time_point now);
  // Marks a job complete. Returns false (and changes nothing) when the
  // job is already completed or unknown: duplicate/late results are
  // accepted once and ignored thereafter.
  bool complete(std::uint64_t job_id);
  // Returns every in-flight job older than `timeout` to the front of the
  // pending queue; returns the number requeued.
  int requeue_stale(Clock::time_point now, Clock::duration timeout);
  // Drops the in-flight jobs held by a worker back to pending.
  int release_worker(const std::string& worker_id);

  std::size_t pending_count() const { return pending_.size(); }
  std::size_t inflight_count() const { return inflight_.size(); }
  std::size_t completed_count() const { return completed_.size(); }
  std::size_t outstanding() const { return pending_.size() + inflight_.size(); }
  bool is_completed(std::uint64_t job_id) const {
    return completed_.count(job_id) > 0;
  }
  // True while any dispatched job is still assigned to this worker.
  bool has_inflight(const std::string& worker_id) const;

 private:
  struct InFlight {
    JobRecord job;
    std::string worker_id;
    Clock::time_point dispatch_time;
  };

  std::uint64_t next_id_ = 1;
  std::deque<JobRecord> pending_;
  std::map<std::uint64_t, InFlight> inflight_;
  std::set<std::uint64_t> completed_;
};

// Master-side transport endpoint.
struct TransportEvent {
  std::string worker_id;  // transport-level identity
  Message message;
};

class MasterTransport {
 public:
  virtual ~MasterTransport() = default;
  virtual void send(const std::string& worker_id, const Message& m) = 0;
  // Blocks up to `timeout` for at least one event.
  virtual std::vector<TransportEvent> poll(Clock::duration timeout) = 0;
  virtual void broadcast_shutdown() = 0;
};

class WorkerTransport {
 public:
  virtual ~WorkerTransport() = default;
  virtual void send(const Message& m) = 0;
  virtual std::optional<Message> receive(Clock::duration timeout) = 0;
  virtual bool connected() const = 0;
};

// In-process duplex channel shared by one master and many workers.
class InMemoryHub {
 public:
  struct Shared;

  std::shared_ptr<WorkerTransport> connect_worker(const std::string& id);
  std::shared_ptr<MasterTransport> master();

 private:
  std::shared_ptr<Shared> shared_ = nullptr;
  void ensure();
};

// TCP transports (LF-framed JSON over a stream socket).
std::shared_ptr<MasterTransport> tcp_listen(const std::string& addr);
std::shared_ptr<WorkerTransport> tcp_connect(const std::string& addr);

struct MasterConfig {
  long sample_budget = 100;
  int high_watermark = 0;  // 0 -> workers + 2
  int snapshot_every = 0;  // 0 -> disabled
  std::string snapshot_path;
  Clock::duration stale_timeout = std::chrono::seconds(10);
  std::optional<double> stop_at_accuracy;  // early stop when reached
  // Called once per newly completed evaluation.
  std::function<void(const EvalRecord&)> on_evaluation;
};

struct MasterSummary {
  long samples = 0;
  long epochs_charged = 0;
  double best_accuracy = -1.0;
  std::optional<EncodingVector> best_encoding;
};

// Algorithm-2 style server loop: fill the queue from search steps up to
// the high watermark, dispatch to idle workers, drain results (final
// backprop + sample + retrain), snapshot periodically.
MasterSummary master_loop(Engine& engine, JobQueue& queue,
                          MasterTransport& transport, const MasterConfig& cfg);

struct WorkerConfig {
  std::string worker_id = "worker";
  int max_reconnect = 5;
  Clock::duration poll_timeout = std::chrono::milliseconds(200);
};

// Algorithm-1 style client loop: hello, then evaluate jobs with the
// local oracle backend until shutdown. Reconnection is handled by the
// caller supplying a fresh transport (socket workers retry in the CLI).
void worker_loop(WorkerTransport& transport, const OracleBackend& backend,
                 const WorkerConfig& cfg);

}  // namespace alphax
