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

#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "brushwork/correspondence.h"
#include "brushwork/embedder.h"
#include "brushwork/embedding_index.h"
#include "brushwork/live_engine.h"
#include "brushwork/manifest.h"
#include "brushwork/network.h"
#include "brushwork/selection.h"
#include "engine_fixture.h"

namespace brushwork {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult run(const std::string& args) {
  const fs::path err_file = fs::temp_directory_path() / "brushwork_cli_stderr.txt";
  const std::string cmd = std::string(BRUSHWORK_CLI) + " " + args + " 2>" + err_file.string();
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_text(err_file);
  return r;
}

std::vector<json> json_lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("usage errors exit with 2 and operational failures with 1") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("gen-toy").code == 2);
  CHECK(run("gen-toy --out /tmp/x --bogus 1").code == 2);
  CHECK(run("retrieve --model a --embedder b --index c --painting d --brush e --fraction 1.5")
            .code == 2);
  const RunResult missing = run("eval --model /nonexistent/m.bwnn --manifest /nonexistent/t.json");
  CHECK(missing.code == 1);
  CHECK(missing.out.empty());
  CHECK(missing.err.find("/nonexistent/m.bwnn") != std::string::npos);
  CHECK(run("--help").code == 0);
}

TEST_CASE("gen-toy is byte-identical across runs") {
  const fs::path a = fresh_dir("brushwork_cli_gen_a");
  const fs::path b = fresh_dir("brushwork_cli_gen_b");
  const std::string flags = " --tracks 6 --classes 3 --paintings 2 --seconds 8 "
                            "--clips-per-class 10 --seed 11";
  const RunResult ra = run("gen-toy --out " + q(a) + flags);
  const RunResult rb = run("gen-toy --out " + q(b) + flags);
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  CHECK(json_lines(ra.out).at(0)["tracks"] == 6);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a);
    INFO(rel.string());
    CHECK(read_file(e.path()) == read_file(b / rel));
    ++files;
  }
  CHECK(files == 6 * 2 + 2 + 3 + 2);
  const RunResult other = run("gen-toy --out " + q(fresh_dir("brushwork_cli_gen_c")) +
                              " --tracks 6 --classes 3 --paintings 2 --seconds 8 "
                              "--clips-per-class 10 --seed 12");
  REQUIRE(other.code == 0);
  CHECK(read_file(a / "audio" / "track_000.wav") !=
        read_file(fs::temp_directory_path() / "brushwork_cli_gen_c" / "audio" / "track_000.wav"));
}

TEST_CASE("ingest scans a library folder") {
  const fs::path d = fresh_dir("brushwork_cli_ingest");
  fs::create_directories(d / "audio" / "blue_album");
  fs::create_directories(d / "artwork");
  fs::create_directories(d / "paintings");
  const auto wav = encode_wav_pcm16(testing::toy_block(0, 5.0, 1));
  Rng rng(2);
  const auto png = encode_png(toy_artwork(0, 4, rng, 32));
  write_file(d / "audio" / "blue_album" / "one.wav", wav);
  write_file(d / "audio" / "blue_album" / "two.wav", wav);
  write_file(d / "audio" / "solo.wav", wav);
  write_file(d / "artwork" / "blue_album.png", png);
  write_file(d / "artwork" / "solo.png", png);
  write_file(d / "paintings" / "sunrise.png", png);

  const RunResult r = run("ingest --dir " + q(d) + " --out " + q(d / "library.json"));
  REQUIRE(r.code == 0);
  CHECK(json_lines(r.out).at(0)["tracks"] == 3);
  const LibraryManifest m = load_manifest(d / "library.json");
  REQUIRE(m.tracks.size() == 3);
  CHECK(m.tracks[0].track_id == "blue_album/one");
  CHECK(m.tracks[0].album_id == "blue_album");
  CHECK(m.tracks[1].album_id == "blue_album");
  CHECK(m.tracks[2].track_id == "solo");
  CHECK(m.tracks[2].album_id == "solo");
  CHECK(m.tracks[0].artwork_path.filename() == "blue_album.png");
  REQUIRE(m.paintings.size() == 1);
  CHECK(m.paintings[0].painting_id == "sunrise");

  fs::remove(d / "artwork" / "solo.png");
  CHECK(run("ingest --dir " + q(d) + " --out " + q(d / "broken.json")).code == 1);
}

TEST_CASE("pipeline commands agree with the library") {
  const fs::path d = fresh_dir("brushwork_cli_pipeline");
  // 25 tracks of 160 s give a 1000-chunk index.
  REQUIRE(run("gen-toy --out " + q(d / "toy") +
              " --tracks 25 --seconds 160 --paintings 2 --clips-per-class 0 --seed 3")
              .code == 0);
  CorrespondenceModel model(testing::small_correspondence_config());
  AudioEmbedder embedder(testing::small_embedder_config());
  Rng rng(5);
  model.initialize(rng);
  embedder.initialize(rng);
  model.save(d / "model.bwnn");
  embedder.save(d / "embedder.bwnn");

  const RunResult built = run("build-index --manifest " + q(d / "toy" / "toy.json") +
                              " --embedder " + q(d / "embedder.bwnn") + " --out " +
                              q(d / "library.cmei"));
  REQUIRE(built.code == 0);
  CHECK(json_lines(built.out).at(0)["chunks"] == 1000);

  const fs::path painting = d / "toy" / "paintings" / "painting_001.png";
  const fs::path brush = d / "toy" / "audio" / "track_002.wav";
  const RunResult retrieved =
      run("retrieve --model " + q(d / "model.bwnn") + " --embedder " + q(d / "embedder.bwnn") +
          " --index " + q(d / "library.cmei") + " --painting " + q(painting) + " --brush " +
          q(brush) + " --fraction 0.01 --offset 8");
  REQUIRE(retrieved.code == 0);
  const auto lines = json_lines(retrieved.out);
  REQUIRE(lines.size() == 1);

  // Offline two-stage oracle: full sort of per-chunk scores, then a long
  // double scan of the ten survivors.
  const EmbeddingIndex index = load_index(d / "library.cmei");
  LibraryAudio audio(load_index_manifest(d / "library.cmei"));
  const ImageTensor canvas = load_image(painting);
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < index.size(); ++i) {
    scored.emplace_back(score_pair(model, canvas, audio.mel(index.record(i))), i);
  }
  std::sort(scored.begin(), scored.end());
  const MelPatch brush_mel = mel_patch(slice(load_audio(brush), 8 * kSampleRate, kClipSamples));
  const Embedding query = embed_audio(embedder, brush_mel);
  long double best = INFINITY;
  std::size_t best_pos = 0;
  for (std::size_t s = 0; s < 10; ++s) {
    const auto& e = index.record(scored[s].second).embedding;
    long double dist = 0;
    for (std::size_t k = 0; k < e.size(); ++k) {
      const long double diff = static_cast<long double>(e[k]) - query.vector[k];
      dist += diff * diff;
    }
    if (dist < best) {
      best = dist;
      best_pos = scored[s].second;
    }
  }
  const json& m = lines[0];
  CHECK(m["track_id"] == index.record(best_pos).key.track_id);
  CHECK(m["chunk_index"] == index.record(best_pos).key.chunk_index);
  CHECK(m["stage2_distance"].get<double>() ==
        doctest::Approx(std::sqrt(static_cast<double>(best))).epsilon(1e-9));

  const RunResult scored_cli = run("score --model " + q(d / "model.bwnn") + " --painting " +
                                   q(painting) + " --audio " + q(brush) + " --offset 8");
  REQUIRE(scored_cli.code == 0);
  CHECK(json_lines(scored_cli.out).at(0)["score"].get<double>() ==
        doctest::Approx(score_pair(model, canvas, brush_mel)).epsilon(1e-12));

  const RunResult ev = run("eval --model " + q(d / "model.bwnn") + " --manifest " +
                           q(d / "toy" / "toy.json") + " --pairs 40 --seed 9");
  REQUIRE(ev.code == 0);
  const Catalog catalog = load_catalog(load_manifest(d / "toy" / "toy.json"));
  const PairEvaluation want = evaluate_heldout(model, catalog, 40, 9);
  const json got = json_lines(ev.out).at(0);
  CHECK(got["pairs"] == 40);
  CHECK(got["accuracy"].get<double>() == doctest::Approx(want.accuracy));
  CHECK(got["cross_class_accuracy"].get<double>() == doctest::Approx(want.cross_class_accuracy));

  write_text(d / "script.json",
             json{{"duration", 7.0},
                  {"actions",
                   {{{"t", 0.0}, {"action", "push_audio"}, {"path", brush.string()}},
                    {{"t", 1.0}, {"action", "push_image"}, {"path", painting.string()}}}}}
                 .dump());
  const std::string serve = "serve --replay " + q(d / "script.json") + " --model " +
                            q(d / "model.bwnn") + " --embedder " + q(d / "embedder.bwnn") +
                            " --index " + q(d / "library.cmei") + " --fraction 0.01";
  const RunResult first = run(serve);
  const RunResult second = run(serve);
  REQUIRE(first.code == 0);
  CHECK(first.out == second.out);
  const auto events = json_lines(first.out);
  CHECK(events.size() == 9);
  CHECK(std::count_if(events.begin(), events.end(),
                      [](const json& e) { return e["kind"] == "match"; }) == 5);
}

}  // namespace brushwork
