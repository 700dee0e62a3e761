#include "alphax/dist.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <thread>

#include "alphax/util.hpp"
#include "json.hpp"

namespace alphax {

namespace {

const char* type_tag(Message::Type t) {
  switch (t) {
    case Message::Type::Hello: return "hello";
    case Message::Type::Job: return "job";
    case Message::Type::Result: return "result";
    case Message::Type::Heartbeat: return "heartbeat";
    case Message::Type::Shutdown: return "shutdown";
  }
  return "?";
}

}  // namespace

std::string encode_message(const Message& m) {
  nlohmann::json j;
  j["type"] = type_tag(m.type);
  switch (m.type) {
    case Message::Type::Hello:
      j["worker_id"] = m.worker_id;
      j["capabilities"] = m.capabilities;
      break;
    case Message::Type::Heartbeat:
      j["worker_id"] = m.worker_id;
      break;
    case Message::Type::Job:
      j["job_id"] = m.job_id;
      j["encoding"] = m.encoding->digits;
      j["space"] = to_string(m.encoding->space);
      if (m.transfer_parent) j["transfer_parent"] = m.transfer_parent->digits;
      j["epoch_budget"] = m.epoch_budget;
      break;
    case Message::Type::Result:
      j["job_id"] = m.job_id;
      j["encoding"] = m.encoding->digits;
      j["space"] = to_string(m.encoding->space);
      j["accuracy"] = m.accuracy;
      break;
    case Message::Type::Shutdown:
      break;
  }
  return j.dump() + "\n";
}

Message decode_message(const std::string& frame) {
  if (frame.empty() ||
      frame.find_first_not_of(" \t\r\n") == std::string::npos)
    throw FrameError("empty frame");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(frame);
  } catch (const nlohmann::json::exception& e) {
    throw FrameError(std::string("bad JSON frame: ") + e.what());
  }
  if (!j.contains("type")) throw FrameError("frame missing type");
  std::string tag = j["type"].get<std::string>();
  Message m;
  auto read_encoding = [&](const char* field) {
    EncodingVector v;
    v.space = space_kind_from_string(j.value("space", std::string("nasbench")));
    v.digits = j[field].get<std::vector<int>>();
    return v;
  };
  if (tag == "hello") {
    m.type = Message::Type::Hello;
    m.worker_id = j.value("worker_id", std::string());
    m.capabilities = j.value("capabilities", std::string());
  } else if (tag == "heartbeat") {
    m.type = Message::Type::Heartbeat;
    m.worker_id = j.value("worker_id", std::string());
  } else if (tag == "job") {
    m.type = Message::Type::Job;
    m.job_id = j["job_id"].get<std::string>();
    m.encoding = read_encoding("encoding");
    if (j.contains("transfer_parent")) {
      EncodingVector tp;
      tp.space = m.encoding->space;
      tp.digits = j["transfer_parent"].get<std::vector<int>>();
      m.transfer_parent = tp;
    }
    m.epoch_budget = j.value("epoch_budget", 70);
  } else if (tag == "result") {
    m.type = Message::Type::Result;
    m.job_id = j["job_id"].get<std::string>();
    m.encoding = read_encoding("encoding");
    m.accuracy = j["accuracy"].get<double>();
  } else if (tag == "shutdown") {
    m.type = Message::Type::Shutdown;
  } else {
    throw FrameError("unknown message tag: " + tag);
  }
  return m;
}

std::uint64_t JobQueue::push(EncodingVector enc,
                             std::optional<EncodingVector> parent,
                             int epoch_budget) {
  JobRecord job;
  job.job_id = next_id_++;
  job.encoding = std::move(enc);
  job.transfer_parent = std::move(parent);
  job.epoch_budget = epoch_budget;
  pending_.push_back(std::move(job));
  return pending_.back().job_id;
}

std::optional<JobRecord> JobQueue::dispatch(const std::string& worker_id,
                                            Clock::time_point now) {
  if (pending_.empty()) return std::nullopt;
  JobRecord job = std::move(pending_.front());
  pending_.pop_front();
  std::uint64_t id = job.job_id;
  inflight_[id] = {job, worker_id, now};
  return inflight_[id].job;
}

bool JobQueue::complete(std::uint64_t job_id) {
  if (completed_.count(job_id)) return false;
  auto it = inflight_.find(job_id);
  if (it != inflight_.end()) {
    inflight_.erase(it);
  } else {
    // Late result for a job that was requeued; drop the pending copy.
    auto p = std::find_if(pending_.begin(), pending_.end(),
                          [&](const JobRecord& j) { return j.job_id == job_id; });
    if (p == pending_.end()) return false;  // unknown job id
    pending_.erase(p);
  }
  completed_.insert(job_id);
  return true;
}

int JobQueue::requeue_stale(Clock::time_point now, Clock::duration timeout) {
  std::vector<std::uint64_t> stale;
  for (const auto& [id, inf] : inflight_)
    if (now - inf.dispatch_time > timeout) stale.push_back(id);
  for (std::uint64_t id : stale) {
    pending_.push_front(std::move(inflight_[id].job));
    inflight_.erase(id);
  }
  return static_cast<int>(stale.size());
}

bool JobQueue::has_inflight(const std::string& worker_id) const {
  for (const auto& [id, inf] : inflight_)
    if (inf.worker_id == worker_id) return true;
  return false;
}

int JobQueue::release_worker(const std::string& worker_id) {
  std::vector<std::uint64_t> held;
  for (const auto& [id, inf] : inflight_)
    if (inf.worker_id == worker_id) held.push_back(id);
  for (std::uint64_t id : held) {
    pending_.push_front(std::move(inflight_[id].job));
    inflight_.erase(id);
  }
  return static_cast<int>(held.size());
}

// ---------------------------------------------------------------------------
// In-memory transport

struct InMemoryHub::Shared {
  std::mutex mu;
  std::condition_variable master_cv;
  std::deque<std::pair<std::string, std::string>> to_master;  // (worker, frame)
  struct WorkerBox {
    std::deque<std::string> frames;
    std::condition_variable cv;
    bool open = true;
  };
  std::map<std::string, std::shared_ptr<WorkerBox>> workers;
};

namespace {

class InMemoryWorker final : public WorkerTransport {
 public:
  InMemoryWorker(std::shared_ptr<InMemoryHub::Shared> shared, std::string id)
      : shared_(std::move(shared)), id_(std::move(id)) {
    std::lock_guard lock(shared_->mu);
    box_ = shared_->workers.emplace(id_,
                                    std::make_shared<InMemoryHub::Shared::WorkerBox>())
               .first->second;
  }

  void send(const Message& m) override {
    std::lock_guard lock(shared_->mu);
    shared_->to_master.emplace_back(id_, encode_message(m));
    shared_->master_cv.notify_all();
  }

  std::optional<Message> receive(Clock::duration timeout) override {
    std::unique_lock lock(shared_->mu);
    if (!box_->cv.wait_for(lock, timeout, [&] { return !box_->frames.empty(); }))
      return std::nullopt;
    std::string frame = std::move(box_->frames.front());
    box_->frames.pop_front();
    return decode_message(frame);
  }

  bool connected() const override { return box_->open; }

 private:
  std::shared_ptr<InMemoryHub::Shared> shared_;
  std::string id_;
  std::shared_ptr<InMemoryHub::Shared::WorkerBox> box_;
};

class InMemoryMaster final : public MasterTransport {
 public:
  explicit InMemoryMaster(std::shared_ptr<InMemoryHub::Shared> shared)
      : shared_(std::move(shared)) {}

  void send(const std::string& worker_id, const Message& m) override {
    std::lock_guard lock(shared_->mu);
    auto it = shared_->workers.find(worker_id);
    if (it == shared_->workers.end()) return;
    it->second->frames.push_back(encode_message(m));
    it->second->cv.notify_all();
  }

  std::vector<TransportEvent> poll(Clock::duration timeout) override {
    std::unique_lock lock(shared_->mu);
    shared_->master_cv.wait_for(lock, timeout,
                                [&] { return !shared_->to_master.empty(); });
    std::vector<TransportEvent> events;
    while (!shared_->to_master.empty()) {
      auto [id, frame] = std::move(shared_->to_master.front());
      shared_->to_master.pop_front();
      try {
        events.push_back({id, decode_message(frame)});
      } catch (const FrameError&) {
        // malformed frame: log-and-drop contract
      }
    }
    return events;
  }

  void broadcast_shutdown() override {
    std::lock_guard lock(shared_->mu);
    Message m;
    m.type = Message::Type::Shutdown;
    for (auto& [id, box] : shared_->workers) {
      box->frames.push_back(encode_message(m));
      box->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<InMemoryHub::Shared> shared_;
};

}  // namespace

void InMemoryHub::ensure() {
  if (!shared_) shared_ = std::make_shared<Shared>();
}

std::shared_ptr<WorkerTransport> InMemoryHub::connect_worker(
    const std::string& id) {
  ensure();
  return std::make_shared<InMemoryWorker>(shared_, id);
}

std::shared_ptr<MasterTransport> InMemoryHub::master() {
  ensure();
  return std::make_shared<InMemoryMaster>(shared_);
}

// ---------------------------------------------------------------------------
// TCP transport (LF-framed JSON)

namespace {

std::pair<std::string, std::string> split_addr(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos)
    throw TransportFailure("address must be host:port, got " + addr);
  std::string host = addr.substr(0, colon);
  if (host.empty()) host = "0.0.0.0";
  return {host, addr.substr(colon + 1)};
}

class TcpMaster final : public MasterTransport {
 public:
  explicit TcpMaster(const std::string& addr) {
    auto [host, port] = split_addr(addr);
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw TransportFailure("socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(static_cast<std::uint16_t>(std::stoi(port)));
    if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1)
      throw TransportFailure("bad listen host: " + host);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0)
      throw TransportFailure("bind failed on " + addr);
    if (::listen(listen_fd_, 16) != 0) throw TransportFailure("listen failed");
  }

  ~TcpMaster() override {
    for (auto& [id, conn] : conns_) ::close(conn.fd);
    if (listen_fd_ >= 0) ::close(listen_fd_);
  }

  void send(const std::string& worker_id, const Message& m) override {
    auto it = conns_.find(worker_id);
    if (it == conns_.end()) return;
    std::string frame = encode_message(m);
    const char* p = frame.data();
    std::size_t left = frame.size();
    while (left > 0) {
      ssize_t n = ::send(it->second.fd, p, left, MSG_NOSIGNAL);
      if (n <= 0) {
        drop(worker_id);
        return;
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
  }

  std::vector<TransportEvent> poll(Clock::duration timeout) override {
    std::vector<pollfd> fds;
    fds.push_back({listen_fd_, POLLIN, 0});
    std::vector<std::string> ids;
    for (auto& [id, conn] : conns_) {
      fds.push_back({conn.fd, POLLIN, 0});
      ids.push_back(id);
    }
    int ms = static_cast<int>(
        std::chrono::duration_cast<std::chrono::milliseconds>(timeout).count());
    ::poll(fds.data(), fds.size(), ms);

    std::vector<TransportEvent> events;
    if (fds[0].revents & POLLIN) {
      int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd >= 0) {
        std::string id = "conn-" + std::to_string(next_conn_++);
        conns_[id] = {fd, {}};
      }
    }
    for (std::size_t i = 1; i < fds.size(); ++i) {
      if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const std::string& id = ids[i - 1];
      char buf[4096];
      ssize_t n = ::recv(fds[i].fd, buf, sizeof(buf), 0);
      if (n <= 0) {
        drop(id);
        continue;
      }
      auto& acc = conns_[id].buffer;
      acc.append(buf, static_cast<std::size_t>(n));
      std::size_t pos;
      while ((pos = acc.find('\n')) != std::string::npos) {
        std::string line = acc.substr(0, pos);
        acc.erase(0, pos + 1);
        try {
          events.push_back({id, decode_message(line)});
        } catch (const FrameError&) {
        }
      }
    }
    return events;
  }

  void broadcast_shutdown() override {
    Message m;
    m.type = Message::Type::Shutdown;
    std::vector<std::string> ids;
    for (auto& [id, conn] : conns_) ids.push_back(id);
    for (auto& id : ids) send(id, m);
  }

 private:
  struct Conn {
    int fd = -1;
    std::string buffer;
  };

  void drop(const std::string& id) {
    auto it = conns_.find(id);
    if (it == conns_.end()) return;
    ::close(it->second.fd);
    conns_.erase(it);
  }

  int listen_fd_ = -1;
  long next_conn_ = 0;
  std::map<std::string, Conn> conns_;
};

class TcpWorker final : public WorkerTransport {
 public:
  explicit TcpWorker(const std::string& addr) {
    auto [host, port] = split_addr(addr);
    if (host == "0.0.0.0") host = "127.0.0.1";
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw TransportFailure("socket() failed");
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(static_cast<std::uint16_t>(std::stoi(port)));
    if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1)
      throw TransportFailure("bad master host: " + host);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
      ::close(fd_);
      fd_ = -1;
      throw TransportFailure("cannot connect to " + addr);
    }
  }

  ~TcpWorker() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void send(const Message& m) override {
    if (fd_ < 0) throw TransportFailure("not connected");
    std::string frame = encode_message(m);
    const char* p = frame.data();
    std::size_t left = frame.size();
    while (left > 0) {
      ssize_t n = ::send(fd_, p, left, MSG_NOSIGNAL);
      if (n <= 0) {
        ::close(fd_);
        fd_ = -1;
        throw TransportFailure("send failed");
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
  }

  std::optional<Message> receive(Clock::duration timeout) override {
    if (fd_ < 0) return std::nullopt;
    std::size_t pos;
    while ((pos = buffer_.find('\n')) == std::string::npos) {
      pollfd pfd{fd_, POLLIN, 0};
      int ms = static_cast<int>(
          std::chrono::duration_cast<std::chrono::milliseconds>(timeout).count());
      int rc = ::poll(&pfd, 1, ms);
      if (rc <= 0) return std::nullopt;
      char buf[4096];
      ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
      if (n <= 0) {
        ::close(fd_);
        fd_ = -1;
        return std::nullopt;
      }
      buffer_.append(buf, static_cast<std::size_t>(n));
    }
    std::string line = buffer_.substr(0, pos);
    buffer_.erase(0, pos + 1);
    return decode_message(line);
  }

  bool connected() const override { return fd_ >= 0; }

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace

std::shared_ptr<MasterTransport> tcp_listen(const std::string& addr) {
  return std::make_shared<TcpMaster>(addr);
}

std::shared_ptr<WorkerTransport> tcp_connect(const std::string& addr) {
  return std::make_shared<TcpWorker>(addr);
}

// ---------------------------------------------------------------------------
// Master / worker loops

MasterSummary master_loop(Engine& engine, JobQueue& queue,
                          MasterTransport& transport, const MasterConfig& cfg) {
  std::map<std::string, bool> worker_idle;  // transport id -> idle
  bool stop = false;
  long completed_since_snapshot = 0;

  auto budget_reached = [&] {
    return stop ||
           engine.evaluator().distinct_evaluations() >= cfg.sample_budget;
  };
  auto handle_record = [&](const EvalRecord& rec) {
    if (rec.cached) return;
    if (cfg.on_evaluation) cfg.on_evaluation(rec);
    if (cfg.stop_at_accuracy && rec.accuracy >= *cfg.stop_at_accuracy)
      stop = true;
    if (cfg.snapshot_every > 0 && !cfg.snapshot_path.empty() &&
        ++completed_since_snapshot >= cfg.snapshot_every) {
      completed_since_snapshot = 0;
      std::ofstream out(cfg.snapshot_path, std::ios::binary);
      out << snapshot_serialize(engine.snapshot());
    }
  };

  while (!budget_reached()) {
    std::size_t watermark =
        cfg.high_watermark > 0
            ? static_cast<std::size_t>(cfg.high_watermark)
            : worker_idle.size() + 2;

    // Run search steps while the queue is below the watermark.
    while (queue.outstanding() < watermark && !budget_reached() &&
           engine.iteration() < engine.config().max_episodes) {
      RolloutResult r = engine.search_step();
      if (r.needs_dispatch)
        queue.push(r.encoding, r.transfer_parent, r.epoch_budget);
      else if (r.cached && r.actual_accuracy) {
        // already applied inside the engine; surface for accounting
        EvalRecord rec;
        rec.encoding = r.encoding;
        rec.accuracy = *r.actual_accuracy;
        rec.cached = true;
        handle_record(rec);
      }
    }
    if (budget_reached()) break;

    // Dispatch pending jobs to idle workers.
    for (auto& [id, idle] : worker_idle) {
      if (!idle) continue;
      auto job = queue.dispatch(id, Clock::now());
      if (!job) break;
      Message m;
      m.type = Message::Type::Job;
      m.job_id = std::to_string(job->job_id);
      m.encoding = job->encoding;
      m.transfer_parent = job->transfer_parent;
      m.epoch_budget = job->epoch_budget;
      transport.send(id, m);
      idle = false;
    }

    // Drain results.
    for (const TransportEvent& ev :
         transport.poll(std::chrono::milliseconds(50))) {
      switch (ev.message.type) {
        case Message::Type::Hello:
          worker_idle[ev.worker_id] = true;
          break;
        case Message::Type::Heartbeat:
          break;
        case Message::Type::Result: {
          worker_idle[ev.worker_id] = true;
          std::uint64_t job_id = 0;
          try {
            job_id = std::stoull(ev.message.job_id);
          } catch (...) {
            break;
          }
          if (!queue.complete(job_id)) break;  // duplicate or unknown: ignore
          EvalRecord rec =
              engine.apply_result(*ev.message.encoding, ev.message.accuracy);
          handle_record(rec);
          break;
        }
        default:
          break;
      }
    }

    // A worker whose job went stale is presumed crashed or wedged; once its
    // jobs are reclaimed, allow new dispatches to it in case it recovers.
    if (queue.requeue_stale(Clock::now(), cfg.stale_timeout) > 0)
      for (auto& [id, idle] : worker_idle)
        if (!idle && !queue.has_inflight(id)) idle = true;
  }

  transport.broadcast_shutdown();

  MasterSummary summary;
  summary.samples = engine.evaluator().distinct_evaluations();
  summary.epochs_charged = engine.evaluator().total_epochs_charged();
  summary.best_accuracy = engine.best_accuracy();
  summary.best_encoding = engine.best_encoding();
  return summary;
}

void worker_loop(WorkerTransport& transport, const OracleBackend& backend,
                 const WorkerConfig& cfg) {
  Message hello;
  hello.type = Message::Type::Hello;
  hello.worker_id = cfg.worker_id;
  hello.capabilities = "oracle";
  transport.send(hello);

  while (transport.connected()) {
    auto msg = transport.receive(cfg.poll_timeout);
    if (!msg) continue;
    if (msg->type == Message::Type::Shutdown) return;
    if (msg->type != Message::Type::Job || !msg->encoding) continue;
    ArchState arch;
    try {
      arch = decode(backend.space(), *msg->encoding);
    } catch (const std::exception&) {
      return;  // malformed job: reply nothing and drop the connection
    }
    Message result;
    result.type = Message::Type::Result;
    result.job_id = msg->job_id;
    result.encoding = msg->encoding;
    result.accuracy = backend.accuracy(arch);
    transport.send(result);
  }
}

}  // namespace alphax
