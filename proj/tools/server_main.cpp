#include <csignal>
#include <iostream>

// Eigen (via service.hpp) must precede httplib: <resolv.h> defines _res.
#include "metsize/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>

namespace {
httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HTTP job service for sample size runs", "metsizer-server"};
  std::string host = "127.0.0.1";
  int port = 8080;
  metsize::service::ServiceOptions options;
  std::string state_dir, ui_dir;
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Port");
  app.add_option("--workers", options.workers, "Concurrent jobs (default 2)")
      ->check(CLI::PositiveNumber);
  app.add_option("--queue-limit", options.queue_limit, "Queued jobs before 429 (default 64)");
  app.add_option("--state-dir", state_dir, "Persist finished jobs as JSON here");
  app.add_option("--ui-dir", ui_dir, "Static UI bundle served at /");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  if (!state_dir.empty()) options.state_dir = state_dir;
  if (!ui_dir.empty()) options.ui_dir = ui_dir;

  try {
    metsize::service::JobService service(options);
    httplib::Server server;
    metsize::service::register_routes(server, service);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "listening on http://" << host << ":" << port << "\n" << std::flush;
    if (!server.listen(host, port)) {
      std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
