#include "metsize/service.hpp"

#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include <httplib.h>

#include "metsize/data_io.hpp"
#include "metsize/error.hpp"
#include "metsize/serialization.hpp"

namespace metsize::service {

using nlohmann::json;
using Clock = std::chrono::system_clock;

namespace {

constexpr const char* kPlaceholderPage =
    "<!doctype html><html><head><title>metsizer</title></head><body>"
    "<h1>metsizer</h1><p>No UI bundle is mounted. Start the server with "
    "<code>--ui-dir</code> or use the JSON API under <code>/api/v1/</code>.</p>"
    "</body></html>\n";

std::string iso8601(Clock::time_point t) {
  const std::time_t tt = Clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Thrown from the progress callback to abandon a run during shutdown.
struct Cancelled : std::runtime_error {
  Cancelled() : std::runtime_error("cancelled: service shutting down") {}
};

std::string random_prefix() {
  std::random_device rd;
  std::ostringstream os;
  os << std::hex << ((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  return os.str();
}

}  // namespace

const char* to_string(JobState state) {
  switch (state) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
  }
  return "?";
}

struct JobService::Job {
  std::string id;
  EstimationConfig config;
  Clock::time_point submitted_at;

  mutable std::mutex mutex;
  mutable std::condition_variable changed;
  JobState state = JobState::Queued;
  double progress = 0.0;
  std::vector<FdrCurvePoint> partial;
  std::optional<SampleSizeResult> result;
  std::string reason;
  std::optional<Clock::time_point> finished_at;
  // Loaded from the state directory; replaces the live fields.
  std::optional<json> restored;

  json snapshot() const {
    std::lock_guard lock(mutex);
    if (restored) return *restored;
    json j;
    j["id"] = id;
    j["state"] = to_string(state);
    j["progress"] = progress;
    json curve = json::array();
    for (const auto& pt : partial) curve.push_back(to_json(pt));
    j["curve"] = std::move(curve);
    j["result"] = result ? to_json(*result) : json(nullptr);
    j["reason"] = state == JobState::Failed ? json(reason) : json(nullptr);
    j["submitted_at"] = iso8601(submitted_at);
    j["finished_at"] = finished_at ? json(iso8601(*finished_at)) : json(nullptr);
    j["config"] = to_json(config);
    return j;
  }

  bool terminal() const {
    return state == JobState::Done || state == JobState::Failed ||
           restored.has_value();
  }
};

JobService::JobService(ServiceOptions options)
    : options_(std::move(options)), id_prefix_(random_prefix()) {
  if (options_.workers < 1) options_.workers = 1;
  if (options_.state_dir) {
    std::filesystem::create_directories(*options_.state_dir);
    load_persisted();
  }
  for (int i = 0; i < options_.workers; ++i)
    workers_.emplace_back([this] { worker_loop(); });
}

JobService::~JobService() {
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  cancel_.store(true);
  queue_cv_.notify_all();
  workers_.clear();  // joins
}

std::string JobService::submit(const EstimationConfig& config) {
  auto job = std::make_shared<Job>();
  job->config = config;
  job->submitted_at = Clock::now();
  {
    std::lock_guard lock(queue_mutex_);
    if (queue_.size() >= options_.queue_limit) throw QueueFull();
    {
      std::lock_guard store(store_mutex_);
      job->id = "job-" + id_prefix_ + "-" + std::to_string(next_id_++);
      jobs_[job->id] = job;
      order_.push_back(job->id);
    }
    queue_.push_back(job);
  }
  queue_cv_.notify_one();
  return job->id;
}

std::shared_ptr<JobService::Job> JobService::find(const std::string& id) const {
  std::lock_guard lock(store_mutex_);
  const auto it = jobs_.find(id);
  return it == jobs_.end() ? nullptr : it->second;
}

std::optional<json> JobService::view(const std::string& id) const {
  const auto job = find(id);
  if (!job) return std::nullopt;
  return job->snapshot();
}

json JobService::list() const {
  std::vector<std::shared_ptr<Job>> snapshot;
  {
    std::lock_guard lock(store_mutex_);
    for (const auto& id : order_) snapshot.push_back(jobs_.at(id));
  }
  json out = json::array();
  for (const auto& job : snapshot) {
    json full = job->snapshot();
    out.push_back({{"id", full["id"]},
                   {"state", full["state"]},
                   {"progress", full["progress"]},
                   {"submitted_at", full["submitted_at"]},
                   {"finished_at", full["finished_at"]}});
  }
  return out;
}

bool JobService::wait(const std::string& id,
                      std::chrono::milliseconds timeout) const {
  const auto job = find(id);
  if (!job) return false;
  std::unique_lock lock(job->mutex);
  return job->changed.wait_for(lock, timeout, [&] { return job->terminal(); });
}

void JobService::worker_loop() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job = queue_.front();
      queue_.pop_front();
    }
    run(*job);
  }
}

void JobService::run(Job& job) {
  {
    std::lock_guard lock(job.mutex);
    job.state = JobState::Running;
  }
  job.changed.notify_all();
  try {
    SampleSizeResult result = estimate_sample_size(
        job.config, [this, &job](const std::vector<FdrCurvePoint>& partial, int total) {
          if (cancel_.load()) throw Cancelled();
          std::lock_guard lock(job.mutex);
          job.partial = partial;
          job.progress = std::max(
              job.progress, static_cast<double>(partial.size()) / std::max(total, 1));
        });
    std::lock_guard lock(job.mutex);
    job.partial = result.curve;
    job.result = std::move(result);
    job.progress = 1.0;
    job.state = JobState::Done;
    job.finished_at = Clock::now();
  } catch (const std::exception& e) {
    std::lock_guard lock(job.mutex);
    job.reason = e.what();
    job.state = JobState::Failed;
    job.finished_at = Clock::now();
  }
  persist(job);
  job.changed.notify_all();
}

void JobService::persist(const Job& job) const {
  if (!options_.state_dir) return;
  try {
    write_text(*options_.state_dir / (job.id + ".json"), dump(job.snapshot()));
  } catch (const Error&) {
    // Persistence is best effort; the in-memory state stays authoritative.
  }
}

void JobService::load_persisted() {
  for (const auto& entry : std::filesystem::directory_iterator(*options_.state_dir)) {
    if (entry.path().extension() != ".json") continue;
    try {
      json j = json::parse(read_text(entry.path()));
      auto job = std::make_shared<Job>();
      job->id = j.at("id").get<std::string>();
      job->restored = std::move(j);
      jobs_[job->id] = job;
      order_.push_back(job->id);
    } catch (const std::exception&) {
      // Skip unreadable files.
    }
  }
  std::sort(order_.begin(), order_.end());
}

// ---------------------------------------------------------------------------
// Handlers

Response handle_submit(JobService& service, const std::string& body) {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::parse_error& e) {
    return {400, {{"errors", json::array({{{"field", "body"},
                                           {"message", std::string("malformed JSON: ") + e.what()}}})}}};
  }
  EstimationConfig config;
  try {
    config = config_from_json(parsed);
  } catch (const Error& e) {
    const std::string what = e.what();
    const auto colon = what.find(':');
    return {400, {{"errors", json::array({{{"field", what.substr(0, colon)},
                                           {"message", colon == std::string::npos
                                                           ? what
                                                           : what.substr(colon + 2)}}})}}};
  }
  const auto errors = check(config);
  if (!errors.empty()) {
    json list = json::array();
    for (const auto& e : errors) list.push_back({{"field", e.field}, {"message", e.message}});
    return {400, {{"errors", std::move(list)}}};
  }
  try {
    return {202, {{"id", service.submit(config)}}};
  } catch (const QueueFull& e) {
    return {429, {{"error", e.what()}}};
  }
}

Response handle_get(const JobService& service, const std::string& id) {
  auto view = service.view(id);
  if (!view) return {404, {{"error", "unknown job id '" + id + "'"}}};
  return {200, std::move(*view)};
}

Response handle_list(const JobService& service) {
  return {200, {{"jobs", service.list()}}};
}

Response handle_defaults() { return {200, to_json(EstimationConfig{})}; }

void register_routes(httplib::Server& server, JobService& service) {
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(dump(r.body), "application/json");
  };
  server.Post("/api/v1/jobs", [&service, reply](const httplib::Request& req,
                                                httplib::Response& res) {
    reply(res, handle_submit(service, req.body));
  });
  server.Get("/api/v1/jobs", [&service, reply](const httplib::Request&,
                                               httplib::Response& res) {
    reply(res, handle_list(service));
  });
  server.Get(R"(/api/v1/jobs/([^/]+))", [&service, reply](const httplib::Request& req,
                                                          httplib::Response& res) {
    reply(res, handle_get(service, req.matches[1]));
  });
  server.Get("/api/v1/defaults", [reply](const httplib::Request&, httplib::Response& res) {
    reply(res, handle_defaults());
  });
  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok\n", "text/plain");
  });
  if (service.options().ui_dir) {
    server.set_mount_point("/", service.options().ui_dir->string());
  } else {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholderPage, "text/html");
    });
  }
}

}  // namespace metsize::service
