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

// HTTP bindings: the storage-server routes and client, the demo-service
// JSON/SSE API, and the standalone POI lookup. Only this header pulls in
// cpp-httplib.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <httplib.h>

#include "vpriv/common/bytes.hpp"
#include "vpriv/common/error.hpp"
#include "vpriv/common/json_io.hpp"
#include "vpriv/demo_service.hpp"
#include "vpriv/lbs.hpp"
#include "vpriv/storage_server.hpp"
#include "vpriv/uplink.hpp"

namespace vpriv::net {

inline int HttpStatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSyntaxError:
    case ErrorCode::kSchemaError:
    case ErrorCode::kCatalogError:
    case ErrorCode::kInvalidParam:
    case ErrorCode::kInvalidItem:
    case ErrorCode::kPolicyParseError:
    case ErrorCode::kParseError:
    case ErrorCode::kUnknownCategory:
    case ErrorCode::kUnknownPet:
      return 400;
    case ErrorCode::kUnknownProvider:
    case ErrorCode::kDeniedByPolicy:
      return 403;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kAlreadyInstalled:
    case ErrorCode::kStaleData:
      return 409;
    case ErrorCode::kNoViablePet:
      return 422;
    case ErrorCode::kRateLimited:
      return 429;
    default:
      return 500;
  }
}

inline void SendError(httplib::Response& res, const Error& e) {
  res.status = HttpStatusFor(e.code());
  OrderedJson j;
  j["error"] = std::string(ErrorCodeName(e.code()));
  j["detail"] = e.detail();
  res.set_content(j.dump(), "application/json");
}

inline void SendJson(httplib::Response& res, const OrderedJson& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

// Runs `fn`, mapping library errors to JSON error responses.
template <typename F>
void Guarded(httplib::Response& res, F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    SendError(res, e);
  } catch (const Json::exception& e) {
    SendError(res, Error(ErrorCode::kSchemaError, e.what()));
  } catch (const std::logic_error& e) {
    // std::stoll and friends on malformed query parameters.
    SendError(res, Error(ErrorCode::kInvalidParam, e.what()));
  }
}

// ---- Storage server -------------------------------------------------------

inline void MountStorageRoutes(httplib::Server& server, StorageServer& storage,
                               std::function<std::int64_t()> now_ms) {
  server.Post("/v1/bundles", [&storage](const httplib::Request& req, httplib::Response& res) {
    Guarded(res, [&] {
      const Ack ack = storage.PutBundleBytes(
          std::span(reinterpret_cast<const std::uint8_t*>(req.body.data()), req.body.size()));
      res.set_content(AckToJson(ack), "application/json");
    });
  });
  server.Get("/v1/items", [&storage](const httplib::Request& req, httplib::Response& res) {
    Guarded(res, [&] {
      const std::string provider = req.get_header_value("X-Provider-Id");
      const Bytes key = FromHex(req.get_param_value("key"));
      if (key.size() != 32) throw Error(ErrorCode::kInvalidParam, "key must be 64 hex digits");
      crypto::Digest d;
      std::copy(key.begin(), key.end(), d.begin());
      auto num = [&](const char* name, std::int64_t dflt) {
        return req.has_param(name) ? std::stoll(req.get_param_value(name)) : dflt;
      };
      const auto items =
          storage.QueryItems(provider, req.get_param_value("pseudonym"), d,
                             num("from_ms", INT64_MIN), num("to_ms", INT64_MAX));
      const Bytes body = SerializeItemList(items);
      res.set_content(std::string(body.begin(), body.end()), "application/octet-stream");
    });
  });
  server.Post("/v1/admin/purge",
              [&storage, now_ms](const httplib::Request& req, httplib::Response& res) {
                Guarded(res, [&] {
                  std::int64_t now = now_ms();
                  if (req.has_param("now_ms")) now = std::stoll(req.get_param_value("now_ms"));
                  OrderedJson j;
                  j["purged"] = storage.PurgeExpired(now);
                  SendJson(res, j);
                });
              });
}

class HttpBundleTransport : public BundleTransport {
 public:
  HttpBundleTransport(std::string host, int port)
      : client_(std::move(host), port) {
    client_.set_connection_timeout(std::chrono::seconds(2));
    client_.set_read_timeout(std::chrono::seconds(5));
  }

  Ack Send(const Bytes& body) override {
    auto res = client_.Post("/v1/bundles", reinterpret_cast<const char*>(body.data()),
                            body.size(), "application/octet-stream");
    if (!res) {
      throw Error(ErrorCode::kTransport, "POST /v1/bundles: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      std::string detail = res->body;
      try {
        Json j = Json::parse(res->body);
        detail = j.value("error", "") + ": " + j.value("detail", "");
      } catch (const Json::exception&) {
      }
      throw Error(ErrorCode::kServerRejected, detail);
    }
    return AckFromJson(res->body);
  }

 private:
  httplib::Client client_;
};

inline std::vector<StoredItem> FetchItems(const std::string& host, int port,
                                          const std::string& provider_id,
                                          const std::string& pseudonym,
                                          const crypto::Digest& key, std::int64_t from_ms,
                                          std::int64_t to_ms) {
  httplib::Client client(host, port);
  httplib::Params params{{"pseudonym", pseudonym},
                         {"key", ToHex(key)},
                         {"from_ms", std::to_string(from_ms)},
                         {"to_ms", std::to_string(to_ms)}};
  auto res = client.Get("/v1/items", params, {{"X-Provider-Id", provider_id}});
  if (!res) throw Error(ErrorCode::kTransport, "GET /v1/items: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(ErrorCode::kServerRejected, res->body);
  return ParseItemList(
      std::span(reinterpret_cast<const std::uint8_t*>(res->body.data()), res->body.size()));
}

// Splits "http://host:port" into its parts.
inline std::pair<std::string, int> ParseEndpoint(const std::string& url) {
  std::string rest = url;
  if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
  while (!rest.empty() && rest.back() == '/') rest.pop_back();
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error(ErrorCode::kInvalidParam, "endpoint needs host:port, got '" + url + "'");
  }
  try {
    return {rest.substr(0, colon), std::stoi(rest.substr(colon + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidParam, "bad port in '" + url + "'");
  }
}

// ---- LBS ------------------------------------------------------------------

inline OrderedJson PoisToJson(const std::vector<lbs::Poi>& pois) {
  OrderedJson a = OrderedJson::array();
  for (const auto& p : pois) {
    a.push_back({{"id", p.id},
                 {"category", p.category},
                 {"lat", p.location.lat},
                 {"lon", p.location.lon},
                 {"name", p.name}});
  }
  return a;
}

inline void MountLbsRoutes(httplib::Server& server, const lbs::PoiStore& store) {
  server.Get("/v1/pois/nearby", [&store](const httplib::Request& req, httplib::Response& res) {
    Guarded(res, [&] {
      auto num = [&](const char* name) {
        if (!req.has_param(name)) throw Error(ErrorCode::kInvalidParam, std::string("missing ") + name);
        try {
          return std::stod(req.get_param_value(name));
        } catch (const std::exception&) {
          throw Error(ErrorCode::kInvalidParam, std::string("bad ") + name);
        }
      };
      const GeoPoint loc{num("lat"), num("lon")};
      const std::size_t k =
          req.has_param("k") ? static_cast<std::size_t>(num("k")) : std::size_t{5};
      SendJson(res, PoisToJson(store.NearestPois(loc, req.get_param_value("cat"), k)));
    });
  });
}

// ---- Demo service ---------------------------------------------------------

inline std::string SseFrame(const std::string& event, const std::string& data) {
  return "event: " + event + "\ndata: " + data + "\n\n";
}

// Mounts the UI/CLI API. `stopping` ends open event streams on shutdown.
inline void MountDemoRoutes(httplib::Server& server, demo::Scenario& sc,
                            std::shared_ptr<std::atomic<bool>> stopping) {
  server.Post("/api/apps", [&sc](const httplib::Request& req, httplib::Response& res) {
    Guarded(res, [&] { SendJson(res, demo::ToJson(sc.InstallApp(req.body)), 201); });
  });
  server.Get("/api/apps", [&sc](const httplib::Request&, httplib::Response& res) {
    Guarded(res, [&] { SendJson(res, sc.State()["apps"]); });
  });
  server.Delete(R"(/api/apps/([A-Za-z0-9_.\-]+))",
                [&sc](const httplib::Request& req, httplib::Response& res) {
                  Guarded(res, [&] {
                    sc.UninstallApp(req.matches[1]);
                    OrderedJson j;
                    j["removed"] = std::string(req.matches[1]);
                    SendJson(res, j);
                  });
                });
  server.Post("/api/playback", [&sc](const httplib::Request& req, httplib::Response& res) {
    Guarded(res, [&] {
      const Json body = ParseJson(req.body, ErrorCode::kSchemaError);
      const std::string action = body.at("action").get<std::string>();
      if (action == "start") {
        sc.Start();
      } else if (action == "pause") {
        sc.Pause();
      } else if (action == "step") {
        sc.Step(body.value("n", std::int64_t{1}));
      } else {
        throw Error(ErrorCode::kInvalidParam, "unknown playback action '" + action + "'");
      }
      SendJson(res, sc.State());
    });
  });
  server.Post("/api/query", [&sc](const httplib::Request& req, httplib::Response& res) {
    Guarded(res, [&] {
      const Json body = ParseJson(req.body, ErrorCode::kSchemaError);
      const auto r = sc.QueryPois(body.at("app_id").get<std::string>(),
                                  body.at("category").get<std::string>(),
                                  body.value("k", std::size_t{5}));
      SendJson(res, demo::ToJson(r));
    });
  });
  server.Get("/api/state", [&sc](const httplib::Request&, httplib::Response& res) {
    Guarded(res, [&] { SendJson(res, sc.State()); });
  });
  server.Get("/api/events", [&sc, stopping](const httplib::Request&, httplib::Response& res) {
    auto seen = std::make_shared<std::optional<std::uint64_t>>();
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [&sc, stopping, seen](std::size_t, httplib::DataSink& sink) {
          while (!stopping->load()) {
            const std::uint64_t v =
                *seen ? sc.WaitForChange(**seen, std::chrono::milliseconds(250)) : sc.version();
            if (*seen && v == **seen) {
              if (!sink.is_writable()) return false;
              continue;
            }
            *seen = v;
            const std::string frame = SseFrame("state", sc.State().dump());
            return sink.write(frame.data(), frame.size());
          }
          sink.done();
          return true;
        });
  });
  server.Get("/api/selection", [&sc](const httplib::Request& req, httplib::Response& res) {
    Guarded(res, [&] {
      const Layer layer = ParseEnum(kLayerNames, req.get_param_value("layer"),
                                    ErrorCode::kInvalidParam, "layer");
      std::optional<std::set<GdprPrinciple>> principles;
      if (req.has_param("principles") && !req.get_param_value("principles").empty()) {
        principles.emplace();
        for (const auto& f : detail::SplitCsvLine(req.get_param_value("principles"))) {
          principles->insert(ParseEnum(kPrincipleNames, f, ErrorCode::kInvalidParam,
                                       "principle"));
        }
      }
      SendJson(res, selection::ToJson(sc.Selection(layer, principles)));
    });
  });
  server.Get("/api/pets", [&sc](const httplib::Request&, httplib::Response& res) {
    Guarded(res, [&] { SendJson(res, sc.registry().ToJson()); });
  });
  MountLbsRoutes(server, sc.pois());
}

}  // namespace vpriv::net
