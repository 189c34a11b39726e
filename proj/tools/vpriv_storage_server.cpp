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

#include <chrono>
#include <condition_variable>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "vpriv/net/http.hpp"
#include "vpriv/storage_server.hpp"

#ifndef VPRIV_DATA_DIR
#define VPRIV_DATA_DIR "data"
#endif

int main(int argc, char** argv) {
  CLI::App app{"vpriv storage server: ciphertext item store"};
  std::string config = std::string(VPRIV_DATA_DIR) + "/storage.json";
  std::string host = "127.0.0.1";
  int port = 8081;
  std::string log_dir;
  int purge_interval_s = 60;
  app.add_option("--config", config, "Storage config JSON (retention, providers)");
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Listen port");
  app.add_option("--log-dir", log_dir, "Directory for append-only logs (overrides config)");
  app.add_option("--purge-interval-s", purge_interval_s,
                 "Seconds between retention purges; 0 disables them")
      ->check(CLI::NonNegativeNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    vpriv::StorageConfig cfg = vpriv::LoadStorageConfig(config);
    if (!log_dir.empty()) cfg.log_dir = log_dir;
    vpriv::StorageServer storage(cfg);
    httplib::Server server;
    auto now_ms = [] {
      return std::chrono::duration_cast<std::chrono::milliseconds>(
                 std::chrono::system_clock::now().time_since_epoch())
          .count();
    };
    vpriv::net::MountStorageRoutes(server, storage, now_ms);

    // Retention is enforced on a timer as well as on demand.
    std::mutex mu;
    std::condition_variable cv;
    bool stopping = false;
    std::thread purger([&] {
      if (purge_interval_s == 0) return;
      std::unique_lock lock(mu);
      while (!cv.wait_for(lock, std::chrono::seconds(purge_interval_s), [&] { return stopping; })) {
        const std::size_t n = storage.PurgeExpired(now_ms());
        if (n > 0) std::cout << "purged " << n << " expired items" << std::endl;
      }
    });
    std::cout << "storage server on " << host << ":" << port << " with "
              << storage.ItemCount() << " items" << std::endl;
    const bool ok = server.listen(host, port);
    {
      std::lock_guard lock(mu);
      stopping = true;
    }
    cv.notify_all();
    purger.join();
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
