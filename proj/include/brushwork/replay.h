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

#ifndef BRUSHWORK_REPLAY_H_
#define BRUSHWORK_REPLAY_H_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brushwork/live_engine.h"

namespace brushwork {

enum class ReplayActionKind { kPushAudio, kPushImage, kSetParams };

struct ReplayAction {
  double t = 0.0;
  ReplayActionKind kind = ReplayActionKind::kPushAudio;
  std::filesystem::path path;
  SessionParams params;
  // Audio is streamed in blocks of this length starting at `t`; zero pushes
  // the whole file at once.
  double block_seconds = 1.0;
};

// Either a bare list of actions or {"duration": s, "actions": [...]}.
// Without a duration the replay ends with the last input; inputs after the
// duration are ignored.
struct ReplayScript {
  std::optional<double> duration;
  std::vector<ReplayAction> actions;
};

// Relative paths resolve against `base_dir`. Throws ValidationError.
ReplayScript parse_replay_script(const nlohmann::json& j,
                                 const std::filesystem::path& base_dir = {});
ReplayScript load_replay_script(const std::filesystem::path& path);

// Feeds the script into `engine` on the script's clock. Inputs stamped at a
// tick time are applied before that tick. Returns the engine's full log.
std::vector<EngineEvent> run_replay(LiveEngine& engine, const ReplayScript& script);

std::string events_ndjson(std::span<const EngineEvent> events);

}  // namespace brushwork

#endif  // BRUSHWORK_REPLAY_H_
