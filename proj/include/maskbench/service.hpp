// Copyright 2026 The maskbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Local annotation service (HTTP/JSON under /api/v1). Every mutation is
// delegated to AnnotationStore; the only state kept here is a cache of decoded
// images and candidate banks.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "maskbench/annotation_store.hpp"
#include "maskbench/codec.hpp"
#include "maskbench/mask_ops.hpp"
#include "maskbench/pipeline.hpp"
#include "maskbench/segmentation.hpp"

namespace maskbench {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  /// Dataset root; the manifest is `<root>/<manifest_name>`.
  fs::path dataset_root;
  std::string manifest_name = "manifest.tsv";
  bool read_only = false;
  /// Required to listen on anything but loopback.
  bool allow_remote = false;
  std::uint64_t seed = 0;
};

inline bool is_loopback_host(std::string_view host) {
  return host == "127.0.0.1" || host == "localhost" || host == "::1";
}

class AnnotationService {
 public:
  static constexpr const char* kApi = "/api/v1";

  explicit AnnotationService(ServiceConfig config)
      : config_(std::move(config)),
        store_(check_config(config_) / config_.manifest_name, StoreOptions{config_.read_only, std::nullopt}) {
    // httplib's default enables SO_REUSEPORT, which would let a second
    // service silently share the port instead of failing with AddressInUse.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    routes();
  }

  AnnotationStore& store() noexcept { return store_; }
  httplib::Server& server() noexcept { return server_; }

  /// Binds the configured address and returns the bound port.
  int bind() {
    int port = config_.port;
    if (port == 0) {
      port = server_.bind_to_any_port(config_.host);
      if (port < 0) throw Error(ErrorCode::kAddressInUse, "cannot bind " + config_.host);
    } else if (!server_.bind_to_port(config_.host, port)) {
      throw Error(ErrorCode::kAddressInUse, config_.host + ":" + std::to_string(port) + " is not available");
    }
    return port;
  }

  /// Blocks until stop().
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  using Request = httplib::Request;
  using Response = httplib::Response;

  static fs::path check_config(const ServiceConfig& c) {
    if (!is_loopback_host(c.host) && !c.allow_remote) {
      throw Error(ErrorCode::kInvalidArgument, "listening on " + c.host + " requires --allow-remote");
    }
    std::error_code ec;
    if (!fs::is_directory(c.dataset_root, ec)) {
      throw Error(ErrorCode::kInvalidArgument, "dataset root " + c.dataset_root.string() + " does not exist");
    }
    if (!fs::is_regular_file(c.dataset_root / c.manifest_name, ec)) {
      throw Error(ErrorCode::kInvalidArgument, "no " + c.manifest_name + " in " + c.dataset_root.string());
    }
    return c.dataset_root;
  }

  static int http_status(ErrorCode code) {
    switch (code) {
      case ErrorCode::kUnknownImage: return 404;
      case ErrorCode::kInvalidArgument:
      case ErrorCode::kDegeneratePolygon: return 400;
      case ErrorCode::kInvariantViolation: return 409;
      default: return 500;
    }
  }

  static void send_json(Response& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
  }

  static void send_png(Response& res, const Bytes& png) {
    res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
  }

  static void send_error(Response& res, int status, const std::string& message) {
    send_json(res, {{"error", message}}, status);
  }

  // Wraps a handler with uniform error mapping.
  template <typename Fn>
  auto guarded(Fn fn) {
    return [fn = std::move(fn)](const Request& req, Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, std::string("bad request body: ") + e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  template <typename Fn>
  auto mutating(Fn fn) {
    return guarded([this, fn = std::move(fn)](const Request& req, Response& res) {
      if (store_.read_only()) {
        send_error(res, 403, "service is read-only");
        return;
      }
      fn(req, res);
    });
  }

  std::string image_url(const std::string& id) const { return std::string(kApi) + "/images/" + id; }

  std::shared_ptr<const WordImage> image(const std::string& id) {
    const ManifestEntry& e = store_.manifest().entry(id);
    {
      std::lock_guard lock(cache_mutex_);
      if (auto it = images_.find(id); it != images_.end()) return it->second;
    }
    auto img = std::make_shared<const WordImage>(load_image(e.image_path, e.image_id));
    std::lock_guard lock(cache_mutex_);
    return images_.emplace(id, std::move(img)).first->second;
  }

  std::shared_ptr<const CandidateBank> bank(const std::string& id, Polarity polarity) {
    const auto key = std::make_pair(id, polarity);
    {
      std::lock_guard lock(cache_mutex_);
      if (auto it = banks_.find(key); it != banks_.end()) return it->second;
    }
    auto built = std::make_shared<const CandidateBank>(build_bank(*image(id), polarity, config_.seed));
    std::lock_guard lock(cache_mutex_);
    return banks_.emplace(key, std::move(built)).first->second;
  }

  static Polarity polarity_param(const Request& req) {
    return req.has_param("polarity") ? parse_polarity(req.get_param_value("polarity")) : Polarity::kNormal;
  }

  // Working mask: the draft if one exists, else the committed mask.
  std::optional<SegMask> current_mask(const std::string& id) const {
    if (auto d = store_.draft(id)) return label_components(d->working);
    auto [record, mask] = store_.reload_annotation(id);
    return mask;
  }

  nlohmann::json draft_json(const std::string& id, const Draft& d) const {
    return {{"image_id", id},
            {"selected_candidate", d.selected_candidate},
            {"selected_method", d.selected_method},
            {"polarity", to_string(d.polarity)},
            {"edits", d.edits.size()},
            {"mask", image_url(id) + "/mask"},
            {"overlay", image_url(id) + "/overlay"}};
  }

  void routes() {
    const std::string images = std::string(kApi) + "/images";
    const std::string one = images + R"(/([^/]+))";

    server_.Get(images, guarded([this](const Request&, Response& res) {
      nlohmann::json list = nlohmann::json::array();
      for (const ManifestEntry& e : store_.manifest().entries) {
        list.push_back({{"image_id", e.image_id}, {"status", to_string(store_.record(e.image_id).status)}});
      }
      const StatusCounts c = store_.counts();
      send_json(res, {{"dataset", store_.manifest().name},
                      {"images", std::move(list)},
                      {"counts", {{"untagged", c.untagged}, {"skipped", c.skipped}, {"tagged", c.tagged}}}});
    }));

    server_.Get(one, guarded([this](const Request& req, Response& res) {
      send_png(res, encode_png_rgb(image(req.matches[1])->pixels));
    }));

    server_.Get(one + "/bank", guarded([this](const Request& req, Response& res) {
      const std::string id = req.matches[1];
      const Polarity polarity = polarity_param(req);
      const auto b = bank(id, polarity);
      nlohmann::json candidates = nlohmann::json::array();
      for (const Candidate& c : b->candidates) {
        candidates.push_back({{"index", c.index},
                              {"method", c.method},
                              {"degenerate", c.degenerate},
                              {"url", image_url(id) + "/bank/" + std::to_string(c.index) +
                                          "?polarity=" + to_string(polarity)}});
      }
      send_json(res, {{"image_id", id}, {"polarity", to_string(polarity)}, {"candidates", std::move(candidates)}});
    }));

    server_.Get(one + R"(/bank/(\d+))", guarded([this](const Request& req, Response& res) {
      const int k = std::stoi(req.matches[2]);
      if (k < 1 || k > kBankSize) throw Error(ErrorCode::kInvalidArgument, "candidate index must be in 1..16");
      send_png(res, encode_mask_png(bank(req.matches[1], polarity_param(req))->at(k).mask));
    }));

    server_.Post(one + "/selection", mutating([this](const Request& req, Response& res) {
      const std::string id = req.matches[1];
      const auto body = nlohmann::json::parse(req.body);
      const auto& cand = body.at("candidate");
      if (!cand.is_number_integer()) throw Error(ErrorCode::kInvalidArgument, "candidate must be an integer");
      const int k = cand.get<int>();
      if (k < 0 || k > kBankSize) {
        throw Error(ErrorCode::kInvalidArgument, "candidate " + std::to_string(k) + " out of range 0..16");
      }
      const Polarity polarity = parse_polarity(body.value("polarity", std::string("normal")));
      const Draft d = store_.select(id, k, *bank(id, polarity));
      send_json(res, draft_json(id, d));
    }));

    server_.Post(one + "/patch", mutating([this](const Request& req, Response& res) {
      const std::string id = req.matches[1];
      const auto body = nlohmann::json::parse(req.body);
      Polygon poly;
      for (const auto& v : body.at("vertices")) {
        if (!v.is_array() || v.size() != 2) throw Error(ErrorCode::kInvalidArgument, "vertex must be [x, y]");
        poly.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
      }
      poly.validate();
      const Draft d = store_.patch(id, parse_edit_kind(body.at("kind").get<std::string>()), std::move(poly));
      send_json(res, draft_json(id, d));
    }));

    server_.Get(one + "/mask", guarded([this](const Request& req, Response& res) {
      const std::string id = req.matches[1];
      store_.manifest().entry(id);
      const auto mask = current_mask(id);
      if (!mask) {
        send_error(res, 404, "no mask for '" + id + "'");
        return;
      }
      send_png(res, encode_mask_png(to_binary(*mask)));
    }));

    server_.Get(one + "/overlay", guarded([this](const Request& req, Response& res) {
      const std::string id = req.matches[1];
      const auto img = image(id);
      const auto mask = current_mask(id);
      send_png(res, encode_png_rgb(mask ? overlay(*img, *mask).pixels : img->pixels));
    }));

    server_.Post(one + "/commit", mutating([this](const Request& req, Response& res) {
      send_json(res, to_json(store_.commit_draft(req.matches[1].str())));
    }));

    server_.Post(one + "/skip", mutating([this](const Request& req, Response& res) {
      send_json(res, to_json(store_.skip(req.matches[1].str())));
    }));

    server_.Get(one + "/annotation", guarded([this](const Request& req, Response& res) {
      const auto [record, mask] = store_.reload_annotation(req.matches[1].str());
      nlohmann::json body = to_json(record);
      body["has_mask"] = mask.has_value();
      if (mask) body["component_count"] = mask->component_count;
      send_json(res, body);
    }));
  }

  ServiceConfig config_;
  AnnotationStore store_;
  httplib::Server server_;
  std::mutex cache_mutex_;
  std::map<std::string, std::shared_ptr<const WordImage>> images_;
  std::map<std::pair<std::string, Polarity>, std::shared_ptr<const CandidateBank>> banks_;
};

}  // namespace maskbench
