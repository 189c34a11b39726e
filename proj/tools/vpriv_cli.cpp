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

#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vpriv/cli.hpp"
#include "vpriv/net/http.hpp"

#ifndef VPRIV_DATA_DIR
#define VPRIV_DATA_DIR "data"
#endif

int main(int argc, char** argv) {
  CLI::App app{"vpriv: automotive privacy framework tools"};
  app.require_subcommand(1);
  std::string data_dir = VPRIV_DATA_DIR;
  app.add_option("--data-dir", data_dir, "Directory with catalog, registry and rule files");

  auto* run = app.add_subcommand("run", "Run a scenario headless and write reports");
  std::string scenario;
  std::int64_t duration_s = 60;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::string endpoint;
  run->add_option("--scenario", scenario, "Scenario JSON file")->required();
  run->add_option("--duration-s", duration_s, "Simulated duration in seconds");
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out_dir, "Output directory for report.txt and report.json");
  run->add_option("--storage-endpoint", endpoint,
                  "Send bundles to http://host:port instead of an in-process server");

  auto* select = app.add_subcommand("select", "Rank PETs for a trust model and layer");
  std::string trust;
  std::string layer;
  std::string weights;
  bool as_json = false;
  select->add_option("--trust", trust, "Trust model JSON file")->required();
  select->add_option("--layer", layer, "Physical, Communication, Processing or Storage")
      ->required();
  select->add_option("--weights", weights, "Maturity weights u,s,r,p summing to 1");
  select->add_flag("--json", as_json, "Print the report as JSON");

  auto* table = app.add_subcommand("table-check", "Verify the mapping file against the reference PET table");
  std::string mapping;
  table->add_option("--mapping", mapping, "Mapping file (default: <data-dir>/pet_mapping.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::unique_ptr<vpriv::net::HttpBundleTransport> transport;
      vpriv::cli::ItemFetcher fetch;
      if (endpoint.empty()) {
        const auto cfg = vpriv::demo::LoadScenarioConfig(scenario);
        if (cfg.storage_endpoint != "inproc") endpoint = cfg.storage_endpoint;
      }
      if (!endpoint.empty()) {
        auto [host, port] = vpriv::net::ParseEndpoint(endpoint);
        transport = std::make_unique<vpriv::net::HttpBundleTransport>(host, port);
        fetch = [host = host, port = port](const std::string& pseudonym,
                                           const vpriv::crypto::Digest& key) {
          return vpriv::net::FetchItems(host, port, "lbs-provider", pseudonym, key, INT64_MIN,
                                        INT64_MAX);
        };
      }
      return vpriv::cli::CmdRun(scenario, duration_s, seed, out_dir, std::cout, transport.get(),
                                fetch);
    }
    if (*select) {
      return vpriv::cli::CmdSelect(trust, layer, weights, data_dir, as_json, std::cout);
    }
    if (*table) {
      if (mapping.empty()) mapping = data_dir + "/pet_mapping.json";
      return vpriv::cli::CmdTableCheck(mapping, std::cout);
    }
  } catch (const vpriv::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
