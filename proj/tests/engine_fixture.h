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

// Small in-memory session resources for engine, replay and service tests.

#ifndef BRUSHWORK_TESTS_ENGINE_FIXTURE_H_
#define BRUSHWORK_TESTS_ENGINE_FIXTURE_H_

#include <map>
#include <memory>
#include <string>

#include "brushwork/live_engine.h"
#include "toy_fixture.h"

namespace brushwork::testing {

inline EmbedderConfig small_embedder_config() {
  return EmbedderConfig{{{4, 8, 8, 16}, 1, 3, 2}, 3};
}

struct EngineFixture {
  std::shared_ptr<std::map<std::string, AudioClip>> audio;
  EngineResources resources;

  MelPatch mel(const ChunkRecord& r) const {
    return mel_patch(slice(audio->at(r.key.track_id), r.key.chunk_index * kClipSamples,
                           kClipSamples));
  }
};

// `tracks` toy tracks of `seconds` each, cycling through 4 classes.
inline EngineFixture engine_fixture(std::size_t tracks, double seconds, std::uint64_t seed,
                                    std::size_t paintings = 0) {
  EngineFixture f;
  f.audio = std::make_shared<std::map<std::string, AudioClip>>();
  auto model = std::make_shared<CorrespondenceModel>(small_correspondence_config());
  auto embedder = std::make_shared<AudioEmbedder>(small_embedder_config());
  Rng init(seed);
  model->initialize(init);
  embedder->initialize(init);
  std::vector<IndexSource> sources;
  for (std::size_t i = 0; i < tracks; ++i) {
    Rng rng = Rng(seed).fork(100 + i);
    const std::string id = "track_" + std::to_string(100 + i);
    (*f.audio)[id] = toy_track_audio(i % 4, 4, seconds, rng);
    sources.push_back({id, f.audio->at(id), ""});
  }
  f.resources.index = std::make_shared<const EmbeddingIndex>(build_index(sources, *embedder).index);
  f.resources.model = model;
  f.resources.embedder = embedder;
  auto audio = f.audio;
  f.resources.mels = [audio](const ChunkRecord& r) {
    return mel_patch(slice(audio->at(r.key.track_id), r.key.chunk_index * kClipSamples,
                           kClipSamples));
  };
  for (std::size_t j = 0; j < paintings; ++j) {
    Rng rng = Rng(seed).fork(500 + j);
    f.resources.painting_ids.push_back("painting_" + std::to_string(j));
    f.resources.paintings.push_back(to_image_tensor(toy_artwork(j % 4, 4, rng, 64)));
  }
  return f;
}

inline AudioClip toy_block(std::size_t cls, double seconds, std::uint64_t seed) {
  Rng rng(seed);
  return toy_track_audio(cls, 4, seconds, rng);
}

inline ImageTensor toy_canvas(std::size_t cls, std::uint64_t seed) {
  Rng rng(seed);
  return to_image_tensor(toy_artwork(cls, 4, rng, 64));
}

}  // namespace brushwork::testing

#endif  // BRUSHWORK_TESTS_ENGINE_FIXTURE_H_
