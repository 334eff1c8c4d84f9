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

#ifndef BRUSHWORK_HTTP_SERVICE_H_
#define BRUSHWORK_HTTP_SERVICE_H_

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "brushwork/live_engine.h"

namespace httplib {
class Server;
}

namespace brushwork {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  // Relative paths in POST /session bodies resolve against this.
  std::filesystem::path base_dir;
  // How often the ticker wakes to run due ticks.
  std::chrono::milliseconds ticker_period{20};
};

using ResourceLoader = std::function<EngineResources(const SessionConfig&)>;

// HTTP control surface for a single live session:
//   POST /session          start (JSON SessionConfig)
//   POST /session/params   partial update (JSON)
//   POST /session/image    encoded image bytes
//   POST /session/audio    WAV block, 16 kHz
//   GET  /session/status
//   GET  /session/events   line-delimited JSON EngineEvents; ?after=N
//                          first replays logged events with sequence > N
// Ticks run on the wall clock measured from session start.
class ControlService {
 public:
  explicit ControlService(ServiceOptions options, ResourceLoader loader = load_resources);
  ~ControlService();
  ControlService(const ControlService&) = delete;
  ControlService& operator=(const ControlService&) = delete;

  // Binds the socket and returns the port. Throws StartupError.
  int bind();
  // Serves until stop(). Binds first if needed.
  void run();
  // run() on a background thread; returns the bound port.
  int start_background();
  void stop();

  SessionHost& host() { return host_; }

 private:
  void register_routes();
  void ticker_loop();
  void close_streams();

  ServiceOptions options_;
  ResourceLoader loader_;
  SessionHost host_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = -1;
  std::atomic<bool> stopping_{false};
  std::thread ticker_;
  std::thread server_thread_;

  std::mutex mu_;
  std::chrono::steady_clock::time_point session_start_;
  std::vector<std::weak_ptr<Subscription>> streams_;
};

}  // namespace brushwork

#endif  // BRUSHWORK_HTTP_SERVICE_H_
