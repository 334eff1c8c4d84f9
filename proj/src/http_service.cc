/*
 * Copyright 2026 The Brushwork Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "brushwork/http_service.h"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "brushwork/errors.h"
#include "brushwork/hash.h"

namespace brushwork {
namespace {

using nlohmann::json;

void reply(httplib::Response& res, int code, const json& body) {
  res.status = code;
  res.set_content(body.dump() + "\n", "application/json");
}

void reply_error(httplib::Response& res, int code, const std::string& message) {
  reply(res, code, json{{"error", message}});
}

// Maps library errors onto status codes.
template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const StateError& e) {
      reply_error(res, 409, e.what());
    } catch (const StartupError& e) {
      reply_error(res, 422, e.what());
    } catch (const UnsupportedFormatError& e) {
      reply_error(res, 415, e.what());
    } catch (const ValidationError& e) {
      reply_error(res, 400, e.what());
    } catch (const DecodeError& e) {
      reply_error(res, 400, e.what());
    } catch (const PreconditionError& e) {
      reply_error(res, 400, e.what());
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      reply_error(res, 500, e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("request body is not JSON: ") + e.what());
  }
}

std::span<const std::byte> body_bytes(const httplib::Request& req) {
  return std::as_bytes(std::span(req.body.data(), req.body.size()));
}

}  // namespace

ControlService::ControlService(ServiceOptions options, ResourceLoader loader)
    : options_(std::move(options)),
      loader_(std::move(loader)),
      server_(std::make_unique<httplib::Server>()) {
  register_routes();
}

ControlService::~ControlService() { stop(); }

void ControlService::register_routes() {
  server_->Post("/session", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const SessionConfig config = parse_session_config(parse_body(req), options_.base_dir);
    EngineResources resources = loader_(config);
    close_streams();
    {
      std::lock_guard lock(mu_);
      host_.start(config, std::move(resources));
      session_start_ = std::chrono::steady_clock::now();
    }
    reply(res, 200, host_.session()->status().to_json());
  }));

  server_->Post("/session/params",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const SessionParams params = parse_session_params(parse_body(req));
                  reply(res, 200, to_json(host_.session()->set_params(params)));
                }));

  server_->Post("/session/image",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto engine = host_.session();
                  const ImageAck ack = engine->push_image(body_bytes(req));
                  reply(res, 200, json{{"hash", hex64(ack.hash)}, {"changed", ack.changed}});
                }));

  server_->Post("/session/audio",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto engine = host_.session();
                  const AudioClip block = decode_wav(body_bytes(req));
                  engine->push_audio(block);
                  reply(res, 200, json{{"samples", block.samples.size()},
                                       {"buffer_samples", engine->status().buffer_samples}});
                }));

  server_->Get("/session/status",
               guarded([this](const httplib::Request&, httplib::Response& res) {
                 reply(res, 200, host_.session()->status().to_json());
               }));

  server_->Get("/session/events",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto engine = host_.session();
                 std::uint64_t after = 0;
                 if (req.has_param("after")) {
                   try {
                     after = std::stoull(req.get_param_value("after"));
                   } catch (const std::exception&) {
                     throw ValidationError("after must be a sequence number");
                   }
                 }
                 auto sub = engine->subscribe();
                 {
                   std::lock_guard lock(mu_);
                   streams_.push_back(sub);
                 }
                 auto backlog = std::make_shared<std::vector<EngineEvent>>();
                 if (req.has_param("after")) {
                   for (EngineEvent& e : engine->log()) {
                     if (e.sequence > after) backlog->push_back(std::move(e));
                   }
                 }
                 auto last = std::make_shared<std::uint64_t>(after);
                 res.set_chunked_content_provider(
                     "application/x-ndjson",
                     [this, sub, backlog, last](std::size_t, httplib::DataSink& sink) {
                       if (stopping_ || sub->closed()) {
                         sink.done();
                         return true;
                       }
                       std::string chunk;
                       for (const EngineEvent& e : *backlog) {
                         chunk += e.to_json() + "\n";
                         *last = e.sequence;
                       }
                       backlog->clear();
                       if (auto e = sub->pop(100)) {
                         if (e->sequence > *last) {
                           chunk += e->to_json() + "\n";
                           *last = e->sequence;
                         }
                       }
                       return chunk.empty() || sink.write(chunk.data(), chunk.size());
                     },
                     [sub](bool) { sub->close(); });
               }));
}

void ControlService::close_streams() {
  std::lock_guard lock(mu_);
  for (auto& w : streams_) {
    if (auto s = w.lock()) s->close();
  }
  streams_.clear();
}

void ControlService::ticker_loop() {
  while (!stopping_) {
    std::this_thread::sleep_for(options_.ticker_period);
    std::shared_ptr<LiveEngine> engine;
    double elapsed = 0.0;
    {
      std::lock_guard lock(mu_);
      if (!host_.running()) continue;
      engine = host_.session();
      elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - session_start_)
                    .count();
    }
    try {
      engine->advance(elapsed);
    } catch (const std::exception& e) {
      spdlog::error("tick failed: {}", e.what());
    }
  }
}

int ControlService::bind() {
  if (port_ >= 0) return port_;
  port_ = options_.port == 0 ? server_->bind_to_any_port(options_.host)
                             : (server_->bind_to_port(options_.host, options_.port)
                                    ? options_.port
                                    : -1);
  if (port_ < 0) {
    throw StartupError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  return port_;
}

void ControlService::run() {
  bind();
  if (!ticker_.joinable()) ticker_ = std::thread([this] { ticker_loop(); });
  spdlog::info("listening on {}:{}", options_.host, port_);
  server_->listen_after_bind();
}

int ControlService::start_background() {
  const int port = bind();
  server_thread_ = std::thread([this] { run(); });
  server_->wait_until_ready();
  return port;
}

void ControlService::stop() {
  stopping_ = true;
  close_streams();
  server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
  if (ticker_.joinable()) ticker_.join();
}

}  // namespace brushwork
