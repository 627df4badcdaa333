#include "fairgen/mock_llm_server.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <iostream>

// Stands in for a remote completion endpoint during offline runs:
//   mock-llm-server --port 8123
// Point a remote-mode config's endpoint.base_url at the printed address.
int main(int argc, char** argv) {
  int port = 0;
  CLI::App app{"Deterministic OpenAI-compatible mock endpoint"};
  app.add_option("--port", port, "Port to bind (0 picks a free one)");
  CLI11_PARSE(app, argc, argv);

  try {
    fairgen::MockLlmServer server(port);
    std::cout << "mock llm server listening on " << server.base_url() << std::endl;
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    int received = 0;
    sigwait(&signals, &received);
    std::cout << "shutting down\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
