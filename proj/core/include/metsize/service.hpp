#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "metsize/config.hpp"
#include "metsize/size_search.hpp"

namespace httplib {
class Server;
}

namespace metsize::service {

enum class JobState { Queued, Running, Done, Failed };

const char* to_string(JobState state);

struct ServiceOptions {
  int workers = 2;
  std::size_t queue_limit = 64;
  std::optional<std::filesystem::path> state_dir;  // job JSON persistence
  std::optional<std::filesystem::path> ui_dir;     // static bundle at "/"
};

class QueueFull : public std::runtime_error {
 public:
  QueueFull() : std::runtime_error("job queue is full") {}
};

/// In-memory job store with a fixed worker pool and a FIFO queue.
///
/// Readers take snapshots under a per-job lock; workers hold that lock only
/// to publish progress or the final state.
class JobService {
 public:
  explicit JobService(ServiceOptions options = {});
  // Running jobs are abandoned at their next grid point and end up Failed.
  ~JobService();

  JobService(const JobService&) = delete;
  JobService& operator=(const JobService&) = delete;

  // Throws QueueFull when the queue already holds queue_limit jobs.
  std::string submit(const EstimationConfig& config);

  std::optional<nlohmann::json> view(const std::string& id) const;
  nlohmann::json list() const;

  // Blocks until the job is Done or Failed, or the timeout passes.
  bool wait(const std::string& id, std::chrono::milliseconds timeout) const;

  const ServiceOptions& options() const { return options_; }

 private:
  struct Job;

  void worker_loop();
  void run(Job& job);
  void persist(const Job& job) const;
  void load_persisted();
  std::shared_ptr<Job> find(const std::string& id) const;

  ServiceOptions options_;
  std::string id_prefix_;
  std::uint64_t next_id_ = 1;

  mutable std::mutex store_mutex_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::vector<std::string> order_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<std::shared_ptr<Job>> queue_;
  bool stopping_ = false;
  std::atomic<bool> cancel_{false};  // running jobs stop at the next grid point
  std::vector<std::jthread> workers_;
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

// Route handlers, usable without a socket.
Response handle_submit(JobService& service, const std::string& body);
Response handle_get(const JobService& service, const std::string& id);
Response handle_list(const JobService& service);
Response handle_defaults();

// Registers /api/v1/*, /healthz and the optional static mount on `server`.
void register_routes(httplib::Server& server, JobService& service);

}  // namespace metsize::service
