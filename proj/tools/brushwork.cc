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

// Command-line entry point. Machine-readable output is line-delimited JSON
// on stdout; diagnostics go to stderr.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "brushwork/correspondence.h"
#include "brushwork/embedder.h"
#include "brushwork/embedding_index.h"
#include "brushwork/errors.h"
#include "brushwork/hash.h"
#include "brushwork/http_service.h"
#include "brushwork/live_engine.h"
#include "brushwork/logging.h"
#include "brushwork/manifest.h"
#include "brushwork/replay.h"
#include "brushwork/selection.h"
#include "brushwork/toy_corpus.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace brushwork;

void emit(const json& j) {
  std::cout << j.dump() << '\n' << std::flush;
}

json evaluation_json(const PairEvaluation& e) {
  return {{"pairs", e.pairs},
          {"positives", e.positives},
          {"cross_class_negatives", e.cross_class_negatives},
          {"same_class_negatives", e.same_class_negatives},
          {"accuracy", e.accuracy},
          {"positive_accuracy", e.positive_accuracy},
          {"cross_class_accuracy", e.cross_class_accuracy},
          {"cross_class_negative_accuracy", e.cross_class_negative_accuracy},
          {"balanced_cross_class_accuracy", e.balanced_cross_class_accuracy},
          {"same_class_negative_accuracy", e.same_class_negative_accuracy},
          {"mean_positive_score", e.mean_positive_score},
          {"mean_negative_score", e.mean_negative_score}};
}

MelPatch clip_at(const fs::path& path, double offset) {
  const AudioClip audio = load_audio(path);
  const auto start = static_cast<std::size_t>(std::llround(offset * kSampleRate));
  if (start + kClipSamples > audio.samples.size()) {
    spdlog::warn("'{}' is shorter than {} s from offset {}; zero-padding", path.string(),
                 kClipSeconds, offset);
  }
  return mel_patch(slice(audio, start, kClipSamples));
}

struct Options {
  fs::path out, dir, manifest, clips, model, embedder, index, painting, audio, brush, metrics,
      replay, config;
  std::optional<std::uint64_t> seed_flag;
  std::size_t tracks = 20, classes = 4, paintings = 8, clips_per_class = 100;
  double seconds = 12.0;
  std::size_t steps = 0, batch = 16, eval_every = 100, eval_pairs = 200, pairs = 1000;
  float lr = 0.01f;
  bool no_augment = false;
  double fraction = 0.01, offset = 0.0, tick = 1.0;
  std::string mode = "scenario1_crossfeed", host = "127.0.0.1";
  int port = 8080;
};

void gen_toy(const Options& o) {
  ToyConfig cfg;
  cfg.tracks = o.tracks;
  cfg.classes = o.classes;
  cfg.paintings = o.paintings;
  cfg.track_seconds = o.seconds;
  cfg.clips_per_class = o.clips_per_class;
  cfg.seed = o.seed_flag.value_or(7);
  const ToyCorpus corpus = generate_toy_corpus(o.out, cfg);
  json j = {{"manifest", corpus.manifest_path.string()},
            {"tracks", corpus.library.tracks.size()},
            {"paintings", corpus.library.paintings.size()}};
  if (!corpus.clip_manifest_path.empty()) j["clips"] = corpus.clip_manifest_path.string();
  emit(j);
}

void ingest(const Options& o) {
  const LibraryManifest m = scan_library(o.dir);
  save_manifest(m, o.out);
  // Reload so missing files surface here rather than at training time.
  load_manifest(o.out);
  emit({{"manifest", o.out.string()},
        {"tracks", m.tracks.size()},
        {"paintings", m.paintings.size()}});
}

void train_correspondence_cmd(const Options& o) {
  const Catalog catalog = load_catalog(load_manifest(o.manifest));
  CorrespondenceTrainConfig cfg;
  cfg.steps = o.steps ? o.steps : 500;
  cfg.lr = o.lr;
  cfg.batch_size = o.batch;
  cfg.seed = o.seed_flag.value_or(1);
  cfg.augment = !o.no_augment;
  cfg.eval_every = o.eval_every;
  cfg.eval_pairs = o.eval_pairs;
  cfg.checkpoint_path = o.out;
  cfg.metrics_path = o.metrics;
  const CorrespondenceTrainResult r = train_correspondence(catalog, cfg);
  for (const StepMetrics& m : r.log) {
    json j = {{"step", m.step}, {"loss", m.loss}};
    if (m.heldout_accuracy) j["heldout_accuracy"] = *m.heldout_accuracy;
    emit(j);
  }
  emit({{"model", o.out.string()},
        {"hash", hex64(r.model.hash())},
        {"seconds", r.seconds},
        {"heldout", evaluation_json(r.heldout)}});
}

void train_embedder_cmd(const Options& o) {
  const auto manifest = load_clip_manifest(o.clips);
  const auto clips = load_labeled_clips(manifest);
  EmbedderTrainConfig cfg;
  cfg.model.classes = manifest.classes.size();
  cfg.steps = o.steps ? o.steps : 300;
  cfg.lr = o.lr;
  cfg.batch_size = o.batch;
  cfg.seed = o.seed_flag.value_or(1);
  cfg.checkpoint_path = o.out;
  cfg.metrics_path = o.metrics;
  const EmbedderTrainResult r = train_embedder(clips, cfg);
  emit({{"embedder", o.out.string()},
        {"hash", hex64(r.model.hash())},
        {"steps", r.losses.size()},
        {"final_loss", r.losses.empty() ? 0.0 : r.losses.back()},
        {"heldout_accuracy", r.heldout_accuracy},
        {"heldout_count", r.heldout_count},
        {"seconds", r.seconds}});
}

void build_index_cmd(const Options& o) {
  const LibraryManifest m = load_manifest(o.manifest);
  const AudioEmbedder embedder = AudioEmbedder::load(o.embedder);
  std::vector<IndexSource> sources;
  for (const TrackEntry& t : m.tracks) {
    sources.push_back({t.track_id, load_audio(t.audio_path), t.audio_path});
  }
  const BuiltIndex built = build_index(sources, embedder);
  for (const std::string& w : built.report.warnings) spdlog::warn("{}", w);
  save_index(built.index, o.out);
  save_index_manifest(built.report.tracks, o.out);
  emit({{"index", o.out.string()},
        {"chunks", built.index.size()},
        {"dimension", built.index.dimension()},
        {"tracks", built.report.tracks.size()},
        {"warnings", built.report.warnings.size()}});
}

void score_cmd(const Options& o) {
  const CorrespondenceModel model = CorrespondenceModel::load(o.model);
  const double s = score_pair(model, load_image(o.painting), clip_at(o.audio, o.offset));
  emit({{"score", s}});
}

void retrieve_cmd(const Options& o) {
  const CorrespondenceModel model = CorrespondenceModel::load(o.model);
  const AudioEmbedder embedder = AudioEmbedder::load(o.embedder);
  const EmbeddingIndex index = load_index(o.index);
  LibraryAudio audio(load_index_manifest(o.index));
  const ChunkMelSource mels = [&](const ChunkRecord& r) { return audio.mel(r); };
  const StageOneResult s1 = stage1_filter(model, load_image(o.painting), index, mels,
                                          o.fraction, o.painting.stem().string());
  spdlog::info("{} of {} chunks survive stage 1", s1.survivors.size(), s1.total);
  const MatchEvent m = stage2_retrieve(embedder, index, s1, clip_at(o.brush, o.offset), 0.0);
  std::cout << to_json(m) << '\n' << std::flush;
}

void eval_cmd(const Options& o) {
  const CorrespondenceModel model = CorrespondenceModel::load(o.model);
  const Catalog catalog = load_catalog(load_manifest(o.manifest));
  const PairEvaluation e = evaluate_heldout(model, catalog, o.pairs, o.seed_flag.value_or(1));
  emit(evaluation_json(e));
}

SessionConfig session_config(const Options& o) {
  SessionConfig c;
  if (!o.config.empty()) {
    json j;
    try {
      j = json::parse(read_text(o.config));
    } catch (const json::exception& e) {
      throw ValidationError("session config '" + o.config.string() + "': " + e.what());
    }
    c = parse_session_config(j, o.config.parent_path());
  }
  c.mode = parse_mode(o.mode);
  c.fraction = o.fraction;
  c.tick_interval = o.tick;
  if (!o.model.empty()) c.model_path = o.model;
  if (!o.embedder.empty()) c.embedder_path = o.embedder;
  if (!o.index.empty()) c.index_path = o.index;
  if (!o.manifest.empty()) c.manifest_path = o.manifest;
  c.validate();
  return c;
}

void serve_cmd(const Options& o) {
  if (!o.replay.empty()) {
    const SessionConfig config = session_config(o);
    LiveEngine engine(config, load_resources(config));
    const auto log = run_replay(engine, load_replay_script(o.replay));
    std::cout << events_ndjson(log) << std::flush;
    return;
  }
  ServiceOptions options;
  options.host = o.host;
  options.port = o.port;
  options.base_dir = fs::current_path();
  ControlService service(options);
  const int port = service.bind();
  emit({{"listening", o.host}, {"port", port}});
  service.run();
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"brushwork: painting and music cross-feeding tools"};
  app.require_subcommand(1);
  Options o;

  auto seed = [&](CLI::App* c) {
    c->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { o.seed_flag = v; }, "Random seed");
  };

  auto* gen = app.add_subcommand("gen-toy", "Generate the synthetic toy corpus");
  gen->add_option("--out", o.out, "Output folder")->required();
  gen->add_option("--tracks", o.tracks, "Number of tracks")->check(CLI::PositiveNumber);
  gen->add_option("--classes", o.classes, "Number of classes")->check(CLI::Range(2, 64));
  gen->add_option("--paintings", o.paintings, "Number of paintings");
  gen->add_option("--seconds", o.seconds, "Track length")->check(CLI::Range(4.0, 3600.0));
  gen->add_option("--clips-per-class", o.clips_per_class, "Labeled clips per class (0 skips)");
  seed(gen);

  auto* ing = app.add_subcommand("ingest", "Scan a library folder into a manifest");
  ing->add_option("--dir", o.dir, "Library folder")->required();
  ing->add_option("--out", o.out, "Manifest to write")->required();
  seed(ing);

  auto* trc = app.add_subcommand("train-correspondence", "Train the painting/music scorer");
  trc->add_option("--manifest", o.manifest, "Library manifest")->required();
  trc->add_option("--out", o.out, "Checkpoint to write")->required();
  trc->add_option("--steps", o.steps, "Training steps (default 500)")->check(CLI::PositiveNumber);
  trc->add_option("--lr", o.lr, "Learning rate")->check(CLI::PositiveNumber);
  trc->add_option("--batch", o.batch, "Batch size (even)")->check(CLI::PositiveNumber);
  trc->add_option("--metrics", o.metrics, "NDJSON metrics file");
  trc->add_option("--eval-every", o.eval_every, "Steps between held-out checks (0 disables)");
  trc->add_option("--eval-pairs", o.eval_pairs, "Pairs per held-out check");
  trc->add_flag("--no-augment", o.no_augment, "Disable augmentation");
  seed(trc);

  auto* tre = app.add_subcommand("train-embedder", "Train the audio embedder");
  tre->add_option("--clips,--manifest", o.clips, "Labeled clip manifest")->required();
  tre->add_option("--out", o.out, "Checkpoint to write")->required();
  tre->add_option("--steps", o.steps, "Training steps (default 300)")->check(CLI::PositiveNumber);
  tre->add_option("--lr", o.lr, "Learning rate")->check(CLI::PositiveNumber);
  tre->add_option("--batch", o.batch, "Batch size")->check(CLI::PositiveNumber);
  tre->add_option("--metrics", o.metrics, "NDJSON metrics file");
  seed(tre);

  auto* bix = app.add_subcommand("build-index", "Embed every 4 s chunk of the library");
  bix->add_option("--manifest", o.manifest, "Library manifest")->required();
  bix->add_option("--embedder", o.embedder, "Embedder checkpoint")->required();
  bix->add_option("--out,--index", o.out, "Index file to write")->required();
  seed(bix);

  auto* sco = app.add_subcommand("score", "Dissimilarity of one painting and one clip");
  sco->add_option("--model", o.model, "Correspondence checkpoint")->required();
  sco->add_option("--painting", o.painting, "Image file")->required();
  sco->add_option("--audio", o.audio, "WAV file")->required();
  sco->add_option("--offset", o.offset, "Clip start in seconds")->check(CLI::NonNegativeNumber);
  seed(sco);

  auto* ret = app.add_subcommand("retrieve", "Two-step retrieval for a painting and brush clip");
  ret->add_option("--model", o.model, "Correspondence checkpoint")->required();
  ret->add_option("--embedder", o.embedder, "Embedder checkpoint")->required();
  ret->add_option("--index", o.index, "Index file")->required();
  ret->add_option("--painting", o.painting, "Image file")->required();
  ret->add_option("--brush", o.brush, "Brush WAV")->required();
  ret->add_option("--fraction", o.fraction, "Stage-1 fraction")->check(CLI::Range(1e-9, 1.0));
  ret->add_option("--offset", o.offset, "Brush clip start in seconds")
      ->check(CLI::NonNegativeNumber);
  seed(ret);

  auto* evl = app.add_subcommand("eval", "Held-out pair accuracy");
  evl->add_option("--model", o.model, "Correspondence checkpoint")->required();
  evl->add_option("--manifest", o.manifest, "Library manifest")->required();
  evl->add_option("--pairs", o.pairs, "Number of pairs")->check(CLI::PositiveNumber);
  seed(evl);

  auto* srv = app.add_subcommand("serve", "Run the control service or replay a script");
  srv->add_option("--host", o.host, "Bind address");
  srv->add_option("--port", o.port, "Port (0 picks one)")->check(CLI::Range(0, 65535));
  srv->add_option("--replay", o.replay, "Replay script; prints the event log");
  srv->add_option("--config", o.config, "Session config JSON for --replay");
  srv->add_option("--model", o.model, "Correspondence checkpoint");
  srv->add_option("--embedder", o.embedder, "Embedder checkpoint");
  srv->add_option("--index", o.index, "Index file");
  srv->add_option("--manifest", o.manifest, "Painting library manifest");
  srv->add_option("--mode", o.mode, "scenario1_crossfeed or scenario2_congruity")
      ->check(CLI::IsMember({"scenario1_crossfeed", "scenario2_congruity"}));
  srv->add_option("--fraction", o.fraction, "Stage-1 fraction")->check(CLI::Range(1e-9, 1.0));
  srv->add_option("--tick", o.tick, "Tick interval in seconds")->check(CLI::PositiveNumber);
  seed(srv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) gen_toy(o);
    if (*ing) ingest(o);
    if (*trc) train_correspondence_cmd(o);
    if (*tre) train_embedder_cmd(o);
    if (*bix) build_index_cmd(o);
    if (*sco) score_cmd(o);
    if (*ret) retrieve_cmd(o);
    if (*evl) eval_cmd(o);
    if (*srv) serve_cmd(o);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
