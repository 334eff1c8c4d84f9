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

#include "brushwork/replay.h"

#include <algorithm>
#include <cmath>
#include <functional>

#include "brushwork/errors.h"
#include "brushwork/manifest.h"
#include "brushwork/network.h"

namespace brushwork {
namespace {

using nlohmann::json;

ReplayAction parse_action(const json& j, const std::filesystem::path& base_dir, std::size_t i) {
  const std::string where = "action " + std::to_string(i);
  if (!j.is_object()) throw ValidationError(where + " is not an object");
  ReplayAction a;
  try {
    a.t = j.at("t").get<double>();
    const std::string kind = j.at("action").get<std::string>();
    if (kind == "push_audio") {
      a.kind = ReplayActionKind::kPushAudio;
      a.block_seconds = j.value("block_seconds", 1.0);
    } else if (kind == "push_image") {
      a.kind = ReplayActionKind::kPushImage;
    } else if (kind == "set_params") {
      a.kind = ReplayActionKind::kSetParams;
      a.params = parse_session_params(j.at("values"));
    } else {
      throw ValidationError(where + ": unknown action '" + kind + "'");
    }
    if (a.kind != ReplayActionKind::kSetParams) {
      const std::filesystem::path p = j.at("path").get<std::string>();
      a.path = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    }
  } catch (const json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
  if (!std::isfinite(a.t) || a.t < 0.0) throw ValidationError(where + ": t must be >= 0");
  if (!(a.block_seconds >= 0.0)) throw ValidationError(where + ": block_seconds must be >= 0");
  return a;
}

// One input applied at a point on the script clock.
struct TimedInput {
  double t;
  std::function<void(LiveEngine&)> apply;
};

}  // namespace

ReplayScript parse_replay_script(const json& j, const std::filesystem::path& base_dir) {
  ReplayScript script;
  const json* actions = &j;
  if (j.is_object()) {
    if (j.contains("duration")) {
      const double d = j["duration"].is_number() ? j["duration"].get<double>() : -1.0;
      if (!(d >= 0.0)) throw ValidationError("duration must be a non-negative number");
      script.duration = d;
    }
    if (!j.contains("actions")) throw ValidationError("replay script has no actions");
    actions = &j["actions"];
  }
  if (!actions->is_array()) throw ValidationError("replay actions must be a list");
  for (std::size_t i = 0; i < actions->size(); ++i) {
    script.actions.push_back(parse_action((*actions)[i], base_dir, i));
  }
  return script;
}

ReplayScript load_replay_script(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ValidationError("replay script '" + path.string() + "': " + e.what());
  }
  return parse_replay_script(j, path.parent_path());
}

std::vector<EngineEvent> run_replay(LiveEngine& engine, const ReplayScript& script) {
  std::vector<TimedInput> inputs;
  double end = 0.0;
  for (const ReplayAction& a : script.actions) {
    end = std::max(end, a.t);
    switch (a.kind) {
      case ReplayActionKind::kPushAudio: {
        const AudioClip clip = load_audio(a.path, kSampleRate);
        const std::size_t block = a.block_seconds > 0.0
                                      ? std::max<std::size_t>(1, std::llround(a.block_seconds * kSampleRate))
                                      : std::max<std::size_t>(1, clip.samples.size());
        for (std::size_t start = 0; start < clip.samples.size(); start += block) {
          const std::size_t n = std::min(block, clip.samples.size() - start);
          const double t = a.t + static_cast<double>(start) / kSampleRate;
          AudioClip piece = slice(clip, start, n);
          inputs.push_back({t, [piece](LiveEngine& e) { e.push_audio(piece); }});
        }
        end = std::max(end, a.t + clip.duration());
        break;
      }
      case ReplayActionKind::kPushImage: {
        auto bytes = std::make_shared<const std::vector<std::byte>>(read_file(a.path));
        inputs.push_back({a.t, [bytes](LiveEngine& e) { e.push_image(*bytes); }});
        break;
      }
      case ReplayActionKind::kSetParams: {
        const SessionParams params = a.params;
        inputs.push_back({a.t, [params](LiveEngine& e) { e.set_params(params); }});
        break;
      }
    }
  }
  std::stable_sort(inputs.begin(), inputs.end(),
                   [](const TimedInput& a, const TimedInput& b) { return a.t < b.t; });
  const double stop = script.duration.value_or(end);
  for (const TimedInput& in : inputs) {
    if (in.t > stop) break;
    engine.advance(in.t, false);
    in.apply(engine);
  }
  engine.advance(stop);
  return engine.log();
}

std::string events_ndjson(std::span<const EngineEvent> events) {
  std::string out;
  for (const EngineEvent& e : events) {
    out += e.to_json();
    out += '\n';
  }
  return out;
}

}  // namespace brushwork
