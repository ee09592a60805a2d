// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmot/cli/cli.hpp"
#include "lmot/common.hpp"
#include "lmot/io/files.hpp"

using namespace lmot;
namespace fs = std::filesystem;
using nlohmann::json;

TEST_SUITE_BEGIN("cli");

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("lmot_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(std::vector<std::string> args) { return cli::run(args); }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

json load_json(const std::string& path) { return json::parse(slurp(path)); }

// Small detection set with clouds; shared by the pipeline cases.
void make_data(const TempDir& tmp, const std::string& dir, int scenes = 1, int frames = 6) {
  REQUIRE(run({"synth", "--out-dir", tmp.file(dir), "--scenes", std::to_string(scenes),
               "--frames", std::to_string(frames), "--max-objects", "4", "--seed", "11"}) == 0);
}

// Tracks that mirror the ground truth exactly: track id = instance id.
void tracks_from_gt(const std::string& gt_path, const std::string& out_path) {
  const ClassTable classes;
  const auto seqs = io::read_ground_truth(gt_path, classes);
  std::vector<io::TrackSequence> out;
  for (const FrameSequence& s : seqs) {
    io::TrackSequence ts;
    ts.id = s.id;
    for (const Frame& f : s.frames) {
      io::TrackFrame tf;
      tf.frame_index = f.frame_idx;
      tf.timestamp_us = f.timestamp_us;
      tf.ego_pose = f.ego_pose;
      for (const GroundTruthObject& g : f.ground_truth)
        tf.boxes.push_back(metrics::EvalBox{g.box, g.instance_id, g.class_id, 1.0});
      ts.frames.push_back(std::move(tf));
    }
    out.push_back(std::move(ts));
  }
  io::write_tracks(out_path, out, classes);
}

}  // namespace

TEST_CASE("synth writes data, clouds and a readable manifest") {
  TempDir tmp("synth");
  make_data(tmp, "data", 2, 5);
  CHECK(fs::exists(tmp.file("data/gt.jsonl")));
  CHECK(fs::exists(tmp.file("data/detections.jsonl")));
  CHECK(fs::exists(tmp.file("data/clouds")));

  const io::RunManifest m = io::read_manifest(tmp.file("data/manifest.json"));
  CHECK(m.command == "synth");
  CHECK(m.seed == 11);
  CHECK(m.stage_configs.at("scenes") == 2);
  CHECK(m.stage_configs.at("noise").contains("sigma_pos"));

  const ClassTable classes;
  const auto gt = io::read_ground_truth(tmp.file("data/gt.jsonl"), classes);
  const auto det = io::read_detections(tmp.file("data/detections.jsonl"), classes);
  REQUIRE(gt.size() == 2);
  REQUIRE(det.size() == 2);
  CHECK(gt[0].frames.size() == 5);
  CHECK(!det[0].frames[0].cloud_path.empty());
}

TEST_CASE("synth is deterministic in its seed") {
  TempDir tmp("synth_det");
  make_data(tmp, "a");
  make_data(tmp, "b");
  CHECK(slurp(tmp.file("a/gt.jsonl")) == slurp(tmp.file("b/gt.jsonl")));
  CHECK(slurp(tmp.file("a/detections.jsonl")) == slurp(tmp.file("b/detections.jsonl")));
  REQUIRE(run({"synth", "--out-dir", tmp.file("c"), "--scenes", "1", "--frames", "6",
               "--max-objects", "4", "--seed", "12"}) == 0);
  CHECK(slurp(tmp.file("a/gt.jsonl")) != slurp(tmp.file("c/gt.jsonl")));
}

TEST_CASE("smooth accepts wide windows and stays deterministic across jobs") {
  TempDir tmp("smooth");
  make_data(tmp, "data");
  // --k 7 consumes 15-slot windows; the 6-frame sequence pads the borders
  REQUIRE(run({"smooth", "--detections", tmp.file("data/detections.jsonl"), "--out",
               tmp.file("s1.jsonl"), "--k", "7", "--d", "16", "--heads", "2",
               "--encoder-layers", "1", "--decoder-layers", "1", "--seed", "3"}) == 0);
  REQUIRE(run({"smooth", "--detections", tmp.file("data/detections.jsonl"), "--out",
               tmp.file("s2.jsonl"), "--k", "7", "--d", "16", "--heads", "2",
               "--encoder-layers", "1", "--decoder-layers", "1", "--seed", "3", "--jobs",
               "4"}) == 0);
  CHECK(slurp(tmp.file("s1.jsonl")) == slurp(tmp.file("s2.jsonl")));

  const ClassTable classes;
  const auto back = io::read_detections(tmp.file("s1.jsonl"), classes);
  REQUIRE(back.size() == 1);
  CHECK(back[0].frames.size() == 6);

  const io::RunManifest m = io::read_manifest(tmp.file("s1.jsonl.manifest.json"));
  CHECK(m.command == "smooth");
  CHECK(m.stage_configs.at("smoother").at("k") == 7);
}

TEST_CASE("track applies runtime life-cycle flags and records them") {
  TempDir tmp("track");
  make_data(tmp, "data");
  REQUIRE(run({"track", "--detections", tmp.file("data/detections.jsonl"), "--out",
               tmp.file("t.jsonl"), "--d", "16", "--heads", "2", "--decoder-layers", "1",
               "--term-conf", "0.35", "--max-inactive", "3", "--seed", "4"}) == 0);
  const io::RunManifest m = io::read_manifest(tmp.file("t.jsonl.manifest.json"));
  CHECK(m.stage_configs.at("tracker").at("termination_confidence") == 0.35);
  CHECK(m.stage_configs.at("tracker").at("max_inactive_frames") == 3);
  const ClassTable classes;
  const auto tracks = io::read_tracks(tmp.file("t.jsonl"), classes);
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].frames.size() == 6);
}

TEST_CASE("eval scores perfect tracks at MOTA 1.0") {
  TempDir tmp("eval");
  make_data(tmp, "data");
  tracks_from_gt(tmp.file("data/gt.jsonl"), tmp.file("perfect.jsonl"));
  REQUIRE(run({"eval", "--tracks", tmp.file("perfect.jsonl"), "--gt", tmp.file("data/gt.jsonl"),
               "--out", tmp.file("report.json")}) == 0);
  const json r = load_json(tmp.file("report.json"));
  CHECK(r.at("clearmot").at("mota") == 1.0);
  CHECK(r.at("clearmot").at("ids") == 0);
  CHECK(r.at("clearmot").at("fp") == 0);
  CHECK(r.at("clearmot").at("fn") == 0);
  CHECK(r.at("amota").at("amota") == 1.0);
  CHECK(r.at("mode") == "tracks");
  CHECK(r.at("config").contains("match_distance"));
}

TEST_CASE("eval scores detections with mAP") {
  TempDir tmp("evald");
  make_data(tmp, "data");
  REQUIRE(run({"eval", "--detections", tmp.file("data/detections.jsonl"), "--gt",
               tmp.file("data/gt.jsonl"), "--out", tmp.file("map.json")}) == 0);
  const json r = load_json(tmp.file("map.json"));
  CHECK(r.at("mode") == "detections");
  CHECK(r.at("map").contains("map"));
  CHECK(!r.at("map").at("entries").empty());
}

TEST_CASE("eval reports are byte-identical across reruns") {
  TempDir tmp("eval_det");
  make_data(tmp, "data");
  tracks_from_gt(tmp.file("data/gt.jsonl"), tmp.file("t.jsonl"));
  REQUIRE(run({"eval", "--tracks", tmp.file("t.jsonl"), "--gt", tmp.file("data/gt.jsonl"),
               "--out", tmp.file("r1.json")}) == 0);
  REQUIRE(run({"eval", "--tracks", tmp.file("t.jsonl"), "--gt", tmp.file("data/gt.jsonl"),
               "--out", tmp.file("r2.json")}) == 0);
  CHECK(slurp(tmp.file("r1.json")) == slurp(tmp.file("r2.json")));
}

TEST_CASE("train fits a checkpoint the downstream commands accept") {
  TempDir tmp("train");
  make_data(tmp, "data");
  REQUIRE(run({"train", "--stage", "smoother", "--detections", tmp.file("data/detections.jsonl"),
               "--gt", tmp.file("data/gt.jsonl"), "--out", tmp.file("sm.ckpt"), "--epochs", "1",
               "--k", "1", "--d", "16", "--heads", "2", "--encoder-layers", "1",
               "--decoder-layers", "1", "--seed", "5", "--curve", tmp.file("curve.jsonl")}) == 0);
  CHECK(fs::exists(tmp.file("sm.ckpt")));
  CHECK(!slurp(tmp.file("curve.jsonl")).empty());

  // the checkpoint's architecture is honored without repeating the flags
  REQUIRE(run({"smooth", "--detections", tmp.file("data/detections.jsonl"), "--out",
               tmp.file("s.jsonl"), "--checkpoint", tmp.file("sm.ckpt")}) == 0);
  const io::RunManifest m = io::read_manifest(tmp.file("s.jsonl.manifest.json"));
  CHECK(m.stage_configs.at("smoother").at("d") == 16);

  // conflicting architecture flags are rejected
  CHECK(run({"smooth", "--detections", tmp.file("data/detections.jsonl"), "--out",
             tmp.file("bad.jsonl"), "--checkpoint", tmp.file("sm.ckpt"), "--d", "32"}) == 1);
}

TEST_CASE("config files fill in flags, command line wins") {
  TempDir tmp("config");
  make_data(tmp, "data");
  {
    std::ofstream cfg(tmp.file("lmot.ini"));
    cfg << "[smooth]\nk = 1\nd = 16\nheads = 2\nencoder-layers = 1\ndecoder-layers = 1\n"
        << "seed = 3\n";
  }
  REQUIRE(run({"--config", tmp.file("lmot.ini"), "smooth", "--detections",
               tmp.file("data/detections.jsonl"), "--out", tmp.file("c1.jsonl")}) == 0);
  const io::RunManifest m1 = io::read_manifest(tmp.file("c1.jsonl.manifest.json"));
  CHECK(m1.stage_configs.at("smoother").at("k") == 1);
  CHECK(m1.stage_configs.at("smoother").at("d") == 16);

  REQUIRE(run({"--config", tmp.file("lmot.ini"), "smooth", "--detections",
               tmp.file("data/detections.jsonl"), "--out", tmp.file("c2.jsonl"), "--k",
               "2"}) == 0);
  const io::RunManifest m2 = io::read_manifest(tmp.file("c2.jsonl.manifest.json"));
  CHECK(m2.stage_configs.at("smoother").at("k") == 2);
}

TEST_CASE("usage errors exit 1") {
  TempDir tmp("usage");
  CHECK(run({}) == 1);                                    // no subcommand
  CHECK(run({"frobnicate"}) == 1);                        // unknown subcommand
  CHECK(run({"smooth", "--no-such-flag"}) == 1);          // unknown flag
  CHECK(run({"smooth", "--out", "x"}) == 1);              // missing required
  CHECK(run({"eval", "--gt", tmp.file("nope.jsonl")}) == 1);  // neither tracks nor detections
  CHECK(run({"synth", "--out-dir", tmp.file("d"), "--noise", "weird"}) == 1);
  CHECK(run({"smooth", "--detections", tmp.file("missing.jsonl"), "--out",
             tmp.file("o.jsonl")}) == 1);
  CHECK(run({"--help"}) == 0);
  CHECK(run({"track", "--help"}) == 0);
}

TEST_CASE("full pipeline runs byte-identically under one seed protocol") {
  TempDir tmp("pipeline");
  std::string first;
  for (int pass = 0; pass < 2; ++pass) {
    make_data(tmp, "data");
    REQUIRE(run({"smooth", "--detections", tmp.file("data/detections.jsonl"), "--out",
                 tmp.file("sm.jsonl"), "--k", "1", "--d", "16", "--heads", "2",
                 "--encoder-layers", "1", "--decoder-layers", "1", "--seed", "3"}) == 0);
    REQUIRE(run({"track", "--detections", tmp.file("sm.jsonl"), "--out", tmp.file("tr.jsonl"),
                 "--d", "16", "--heads", "2", "--decoder-layers", "1", "--seed", "4"}) == 0);
    REQUIRE(run({"eval", "--tracks", tmp.file("tr.jsonl"), "--gt", tmp.file("data/gt.jsonl"),
                 "--out", tmp.file("report.json")}) == 0);
    if (pass == 0)
      first = slurp(tmp.file("report.json"));
    else
      CHECK(first == slurp(tmp.file("report.json")));
  }
}

TEST_SUITE_END();
