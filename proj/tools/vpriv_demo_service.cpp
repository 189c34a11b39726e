// Copyright 2026 The vpriv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <chrono>
#include <iostream>
#include <memory>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "vpriv/demo_service.hpp"
#include "vpriv/net/http.hpp"

#ifndef VPRIV_DATA_DIR
#define VPRIV_DATA_DIR "data"
#endif

int main(int argc, char** argv) {
  CLI::App app{"vpriv demo service: vehicle, privacy manager and LBS behind an HTTP API"};
  std::string scenario = std::string(VPRIV_DATA_DIR) + "/scenarios/demo.json";
  std::string host = "127.0.0.1";
  int port = 8080;
  int tick_ms = 100;
  std::string static_dir;
  app.add_option("--scenario", scenario, "Scenario JSON file");
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Listen port");
  app.add_option("--tick-ms", tick_ms, "Wall-clock tick while playing");
  app.add_option("--static", static_dir, "Directory with a built UI to serve at /");
  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = vpriv::demo::LoadScenarioConfig(scenario);
    std::unique_ptr<vpriv::net::HttpBundleTransport> transport;
    if (cfg.storage_endpoint != "inproc") {
      auto [h, p] = vpriv::net::ParseEndpoint(cfg.storage_endpoint);
      transport = std::make_unique<vpriv::net::HttpBundleTransport>(h, p);
    }
    vpriv::demo::Scenario sc(cfg, transport.get());
    auto stopping = std::make_shared<std::atomic<bool>>(false);
    httplib::Server server;
    vpriv::net::MountDemoRoutes(server, sc, stopping);
    if (!static_dir.empty()) server.set_mount_point("/", static_dir);

    std::thread ticker([&] {
      while (!stopping->load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(tick_ms));
        try {
          sc.Tick(tick_ms);
        } catch (const vpriv::Error& e) {
          std::cerr << "tick: " << e.what() << "\n";
        }
      }
    });
    std::cout << "demo service on " << host << ":" << port << std::endl;
    const bool ok = server.listen(host, port);
    stopping->store(true);
    ticker.join();
    if (!ok) {
      std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
      return 2;
    }
  } catch (const vpriv::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
