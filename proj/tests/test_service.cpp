// Eigen has to come in before httplib (resolv.h defines _res).
#include "metsize/service.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "cli.hpp"
#include "metsize/data_io.hpp"
#include "metsize/serialization.hpp"
#include "support.hpp"

using namespace metsize;
using namespace metsize::service;
using nlohmann::json;
using std::chrono::milliseconds;
using testing_support::TempDir;

namespace {

const json kSmallJob = {{"p", 120}, {"n_min", 6}, {"n_max", 40}, {"seed", 3}};

// Big enough to keep a single worker busy for a while.
const json kSlowJob = {{"p", 4000}, {"n_min", 10}, {"n_max", 400}, {"full_grid", true},
                       {"seed", 1}};

std::string submit_ok(JobService& svc, const json& body) {
  const Response r = handle_submit(svc, body.dump());
  EXPECT_EQ(r.status, 202) << r.body.dump();
  return r.body.at("id").get<std::string>();
}

json wait_done(JobService& svc, const std::string& id) {
  EXPECT_TRUE(svc.wait(id, milliseconds(120000)));
  return *svc.view(id);
}

void wait_for_state(JobService& svc, const std::string& id, const std::string& state) {
  for (int i = 0; i < 2000; ++i) {
    if (svc.view(id)->at("state") == state) return;
    std::this_thread::sleep_for(milliseconds(5));
  }
  FAIL() << "job " << id << " never reached " << state;
}

}  // namespace

TEST(Service, SubmitReturnsAcceptedWithId) {
  JobService svc;
  const Response r = handle_submit(svc, kSmallJob.dump());
  EXPECT_EQ(r.status, 202);
  EXPECT_TRUE(r.body.at("id").is_string());
}

TEST(Service, OutOfRangeFieldIsNamed) {
  JobService svc;
  const Response r = handle_submit(svc, R"({"m": 1.5})");
  ASSERT_EQ(r.status, 400);
  const auto& errors = r.body.at("errors");
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_EQ(errors[0].at("field"), "m");
  EXPECT_NE(errors[0].at("message").get<std::string>().find("(0, 1)"), std::string::npos);
}

TEST(Service, EveryViolationIsListed) {
  JobService svc;
  const Response r = handle_submit(svc, R"({"m": 0, "target_fdr": 2, "p": 1})");
  ASSERT_EQ(r.status, 400);
  std::set<std::string> fields;
  for (const auto& e : r.body.at("errors")) fields.insert(e.at("field").get<std::string>());
  EXPECT_TRUE(fields.count("m"));
  EXPECT_TRUE(fields.count("target_fdr"));
  EXPECT_TRUE(fields.count("p"));
}

TEST(Service, MalformedBodyIsRejected) {
  JobService svc;
  EXPECT_EQ(handle_submit(svc, "{not json").status, 400);
  const Response typed = handle_submit(svc, R"({"p": "many"})");
  ASSERT_EQ(typed.status, 400);
  EXPECT_EQ(typed.body.at("errors")[0].at("field"), "p");
}

TEST(Service, DuplicateSubmissionsGetDistinctIds) {
  JobService svc;
  const std::string a = submit_ok(svc, kSmallJob);
  const std::string b = submit_ok(svc, kSmallJob);
  EXPECT_NE(a, b);
  EXPECT_EQ(handle_list(svc).body.at("jobs").size(), 2u);
}

TEST(Service, UnknownIdIs404) {
  JobService svc;
  const Response r = handle_get(svc, "job-nope");
  EXPECT_EQ(r.status, 404);
  EXPECT_NE(r.body.at("error").get<std::string>().find("job-nope"), std::string::npos);
}

TEST(Service, DefaultsAreAValidConfig) {
  const Response r = handle_defaults();
  EXPECT_EQ(r.status, 200);
  EXPECT_TRUE(check(config_from_json(r.body)).empty());
}

TEST(Service, DoneResultIsByteEqualToCliOutput) {
  TempDir dir;
  std::ostringstream out, err;
  ASSERT_EQ(cli::run_cli({"estimate", "--bins", "120", "--min-n", "6", "--max-n", "40",
                          "--seed", "3", "--out", dir.path().string()},
                         out, err),
            0)
      << err.str();

  JobService svc;
  const std::string id = submit_ok(svc, kSmallJob);
  const json view = wait_done(svc, id);
  ASSERT_EQ(view.at("state"), "done");
  EXPECT_EQ(view.at("progress"), 1.0);
  EXPECT_EQ(dump(view.at("result")), read_text(dir / "result.json"));
  EXPECT_EQ(view.at("curve"), view.at("result").at("curve"));
  EXPECT_TRUE(view.at("finished_at").is_string());
}

TEST(Service, PartialCurvesArePrefixesAndProgressIsMonotone) {
  JobService svc({.workers = 1});
  json slowish = kSmallJob;
  slowish["full_grid"] = true;
  slowish["p"] = 600;
  slowish["n_max"] = 60;
  const std::string id = submit_ok(svc, slowish);
  std::vector<json> seen;
  while (!svc.wait(id, milliseconds(2))) seen.push_back(*svc.view(id));
  const json final_view = *svc.view(id);
  ASSERT_EQ(final_view.at("state"), "done");
  const json& final_curve = final_view.at("curve");
  double last = 0;
  for (const json& v : seen) {
    const double progress = v.at("progress");
    EXPECT_GE(progress, last);
    last = progress;
    const json& c = v.at("curve");
    ASSERT_LE(c.size(), final_curve.size());
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c[i], final_curve[i]);
  }
}

TEST(Service, QueueOverCapacityIs429) {
  JobService svc({.workers = 1, .queue_limit = 1});
  const std::string running = submit_ok(svc, kSlowJob);
  wait_for_state(svc, running, "running");
  const std::string queued = submit_ok(svc, kSmallJob);
  const Response third = handle_submit(svc, kSmallJob.dump());
  EXPECT_EQ(third.status, 429);
  EXPECT_EQ(svc.view(queued)->at("state"), "queued");
  // Destruction abandons the slow run instead of waiting for it.
}

TEST(Service, ShutdownAbandonsRunningJobs) {
  TempDir state;
  std::string id;
  const auto start = std::chrono::steady_clock::now();
  {
    JobService svc({.workers = 1, .state_dir = state.path()});
    id = submit_ok(svc, kSlowJob);
    wait_for_state(svc, id, "running");
  }
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(30));
  const json persisted = json::parse(read_text(state / (id + ".json")));
  EXPECT_EQ(persisted.at("state"), "failed");
  EXPECT_NE(persisted.at("reason").get<std::string>().find("cancelled"), std::string::npos);
}

TEST(Service, StateDirectorySurvivesRestart) {
  TempDir state;
  std::string id;
  json before;
  {
    JobService svc({.state_dir = state.path()});
    id = submit_ok(svc, kSmallJob);
    before = wait_done(svc, id);
  }
  JobService again({.state_dir = state.path()});
  const Response r = handle_get(again, id);
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body, before);
  EXPECT_TRUE(again.wait(id, milliseconds(0)));
  const std::string fresh = submit_ok(again, kSmallJob);
  EXPECT_NE(fresh, id);
}

TEST(Service, ConcurrentJobsMatchSequentialRuns) {
  JobService svc({.workers = 2});
  std::vector<std::string> ids;
  std::vector<json> configs;
  for (int seed : {11, 12, 13, 14}) {
    json body = kSmallJob;
    body["seed"] = seed;
    configs.push_back(body);
    ids.push_back(submit_ok(svc, body));
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const json view = wait_done(svc, ids[i]);
    const SampleSizeResult expected = estimate_sample_size(config_from_json(configs[i]));
    EXPECT_EQ(view.at("result"), to_json(expected)) << configs[i].dump();
  }
}

TEST(Service, HttpRoundTrip) {
  TempDir ui;
  std::ofstream(ui / "index.html") << "<html>design</html>";
  JobService svc({.ui_dir = ui.path()});
  httplib::Server server;
  register_routes(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread listener([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(health->body, "ok\n");

  auto defaults = client.Get("/api/v1/defaults");
  ASSERT_TRUE(defaults);
  EXPECT_EQ(json::parse(defaults->body).at("target_fdr"), 0.05);

  auto bad = client.Post("/api/v1/jobs", R"({"m": 1.5})", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  auto posted = client.Post("/api/v1/jobs", kSmallJob.dump(), "application/json");
  ASSERT_TRUE(posted);
  ASSERT_EQ(posted->status, 202);
  const std::string id = json::parse(posted->body).at("id");
  ASSERT_TRUE(svc.wait(id, milliseconds(120000)));

  auto got = client.Get("/api/v1/jobs/" + id);
  ASSERT_TRUE(got);
  EXPECT_EQ(got->status, 200);
  EXPECT_EQ(json::parse(got->body).at("state"), "done");

  auto missing = client.Get("/api/v1/jobs/job-unknown");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);

  auto list = client.Get("/api/v1/jobs");
  ASSERT_TRUE(list);
  EXPECT_EQ(json::parse(list->body).at("jobs").size(), 1u);

  auto page = client.Get("/");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->status, 200);
  EXPECT_EQ(page->body, "<html>design</html>");

  server.stop();
  listener.join();
}

TEST(Service, PlaceholderPageWithoutUiBundle) {
  JobService svc;
  httplib::Server server;
  register_routes(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread listener([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto page = client.Get("/");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->status, 200);
  EXPECT_NE(page->body.find("/api/v1/"), std::string::npos);
  server.stop();
  listener.join();
}
