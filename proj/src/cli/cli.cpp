// SPDX-License-Identifier: Apache-2.0
#include "lmot/cli/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lmot/io/files.hpp"
#include "lmot/io/parallel.hpp"
#include "lmot/model/smoother.hpp"
#include "lmot/model/tracker.hpp"
#include "lmot/nn/checkpoint.hpp"
#include "lmot/pc/pointcloud.hpp"
#include "lmot/pc/voxels.hpp"
#include "lmot/synth/synth.hpp"
#include "lmot/train/diagnostics.hpp"
#include "lmot/train/trainer.hpp"

namespace lmot::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Offset decorrelating derived RNG streams (scene vs. detector vs. clouds).
constexpr std::uint64_t kSeedStride = 0x9E3779B97F4A7C15ULL;

// ---- config serialization ----

json to_json(const model::SmootherParams& p) {
  json j;
  j["k"] = p.k;
  j["mode"] = to_string(p.mode);
  j["d"] = p.d;
  j["L"] = p.L;
  j["encoder_layers"] = p.encoder_layers;
  j["decoder_layers"] = p.decoder_layers;
  j["heads"] = p.heads;
  j["ffn_hidden"] = p.ffn_hidden;
  j["score_threshold"] = p.score_threshold;
  return j;
}

model::SmootherParams smoother_params_from(const json& j) {
  model::SmootherParams p;
  p.k = j.at("k").get<int>();
  p.mode = parse_window_mode(j.at("mode").get<std::string>());
  p.d = j.at("d").get<int>();
  p.L = j.at("L").get<int>();
  p.encoder_layers = j.at("encoder_layers").get<int>();
  p.decoder_layers = j.at("decoder_layers").get<int>();
  p.heads = j.at("heads").get<int>();
  p.ffn_hidden = j.at("ffn_hidden").get<int>();
  p.score_threshold = j.at("score_threshold").get<double>();
  return p;
}

json to_json(const model::TrackerParams& p) {
  json j;
  j["termination_confidence"] = p.termination_confidence;
  j["max_inactive_frames"] = p.max_inactive_frames;
  j["birth_gate"] = p.birth_gate;
  j["d"] = p.d;
  j["heads"] = p.heads;
  j["decoder_layers"] = p.decoder_layers;
  j["ffn_hidden"] = p.ffn_hidden;
  j["history_capacity"] = p.history_capacity;
  return j;
}

model::TrackerParams tracker_params_from(const json& j) {
  model::TrackerParams p;
  p.termination_confidence = j.at("termination_confidence").get<double>();
  p.max_inactive_frames = j.at("max_inactive_frames").get<int>();
  p.birth_gate = j.at("birth_gate").get<double>();
  p.d = j.at("d").get<int>();
  p.heads = j.at("heads").get<int>();
  p.decoder_layers = j.at("decoder_layers").get<int>();
  p.ffn_hidden = j.at("ffn_hidden").get<int>();
  p.history_capacity = j.at("history_capacity").get<int>();
  return p;
}

json to_json(const synth::SceneConfig& c) {
  json j;
  j["frame_count"] = c.frame_count;
  j["frame_period"] = c.frame_period;
  j["min_objects"] = c.min_objects;
  j["max_objects"] = c.max_objects;
  j["spawn_prob"] = c.spawn_prob;
  j["despawn_prob"] = c.despawn_prob;
  j["min_speed"] = c.min_speed;
  j["max_speed"] = c.max_speed;
  j["extent"] = c.extent;
  j["ego_speed"] = c.ego_speed;
  j["seed"] = c.seed;
  return j;
}

json to_json(const synth::DetectorNoise& n) {
  json j;
  j["drop_prob"] = n.drop_prob;
  j["fp_rate"] = n.fp_rate;
  j["sigma_pos"] = n.sigma_pos;
  j["sigma_size"] = n.sigma_size;
  j["sigma_yaw"] = n.sigma_yaw;
  j["orientation_flip_prob"] = n.orientation_flip_prob;
  j["tp_score_alpha"] = n.tp_score_alpha;
  j["tp_score_beta"] = n.tp_score_beta;
  j["fp_score_alpha"] = n.fp_score_alpha;
  j["fp_score_beta"] = n.fp_score_beta;
  j["fp_extent"] = n.fp_extent;
  return j;
}

json to_json(const synth::PointSampling& s) {
  json j;
  j["points_per_object"] = s.points_per_object;
  j["ground_points"] = s.ground_points;
  j["inverse_square"] = s.inverse_square;
  j["reference_distance"] = s.reference_distance;
  j["ground_extent"] = s.ground_extent;
  j["ground_band"] = s.ground_band;
  return j;
}

json to_json(const train::TrainConfig& c) {
  json j;
  j["stage"] = c.stage == train::Stage::kSmoother ? "smoother" : "tracker";
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["sequence_clip_length"] = c.sequence_clip_length;
  j["finetune_smoother"] = c.finetune_smoother;
  j["weight_decay"] = c.weight_decay;
  j["seed"] = c.seed;
  j["noise"] = {{"sigma_pos", c.noise.sigma_pos},
                {"sigma_size", c.noise.sigma_size},
                {"sigma_yaw", c.noise.sigma_yaw}};
  return j;
}

// ---- path and manifest helpers ----

std::string rel_to(const fs::path& base_dir, const std::string& p) {
  std::error_code ec;
  const fs::path rel = fs::relative(fs::absolute(p), fs::absolute(base_dir), ec);
  if (ec || rel.empty()) return fs::absolute(p).string();
  return rel.string();
}

void emit_manifest(const std::string& manifest_path, const std::string& command,
                   std::uint64_t seed, const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs,
                   const std::vector<std::string>& checkpoints, json stage_configs) {
  const fs::path dir = fs::absolute(manifest_path).parent_path();
  io::RunManifest m;
  m.command = command;
  m.seed = seed;
  m.output_dir = ".";
  for (const std::string& p : inputs) m.input_paths.push_back(rel_to(dir, p));
  for (const std::string& p : outputs) m.output_paths.push_back(rel_to(dir, p));
  for (const std::string& p : checkpoints) m.checkpoint_paths.push_back(rel_to(dir, p));
  m.stage_configs = std::move(stage_configs);
  io::write_manifest(manifest_path, m);
}

ClassTable classes_from_meta(const json& meta) {
  if (!meta.contains("classes")) return ClassTable{};
  return ClassTable(meta.at("classes").get<std::vector<std::string>>());
}

json require_checkpoint_stage(const std::string& path, const std::string& stage) {
  const json meta = nn::read_checkpoint_meta(path);
  if (!meta.is_object() || !meta.contains("stage") ||
      meta.at("stage").get<std::string>() != stage)
    throw ValidationError(path + ": not a " + stage + " checkpoint");
  return meta;
}

// Architecture flags must agree with a loaded checkpoint.
void reject_conflict(const CLI::Option* opt, double flag_value, double meta_value,
                     const std::string& ckpt) {
  if (opt->count() > 0 && flag_value != meta_value)
    throw ValidationError(opt->get_name() + " conflicts with checkpoint " + ckpt +
                          " (checkpoint value " + std::to_string(meta_value) + ")");
}

// ---- dataset plumbing ----

// Ground-truth sequences paired with per-frame detections from a second
// file. Frames must align one-to-one; cloud references in the detections
// file are carried onto the returned sequence.
struct PairedSequence {
  FrameSequence seq;
  std::vector<std::vector<Detection>> dets;
};

std::vector<PairedSequence> pair_inputs(std::vector<FrameSequence> gt_seqs,
                                        const std::vector<FrameSequence>& det_seqs,
                                        const std::string& gt_path, const std::string& det_path) {
  std::map<std::string, const FrameSequence*> by_id;
  for (const FrameSequence& s : det_seqs) by_id[s.id] = &s;
  if (det_seqs.size() != gt_seqs.size())
    throw ValidationError(det_path + " and " + gt_path + " hold different sequence sets");

  // Cloud references are relative to their own file; absolutize so the
  // merged sequence resolves from anywhere. The detections file wins.
  const fs::path gt_dir = fs::absolute(gt_path).parent_path();
  const fs::path det_dir = fs::absolute(det_path).parent_path();
  std::vector<PairedSequence> out;
  for (FrameSequence& gt : gt_seqs) {
    const auto it = by_id.find(gt.id);
    if (it == by_id.end())
      throw ValidationError(det_path + ": missing sequence '" + gt.id + "' present in " + gt_path);
    const FrameSequence& det = *it->second;
    if (det.frames.size() != gt.frames.size())
      throw ValidationError("sequence '" + gt.id + "': " + det_path + " has " +
                            std::to_string(det.frames.size()) + " frames but " + gt_path +
                            " has " + std::to_string(gt.frames.size()));
    PairedSequence p;
    p.dets.reserve(det.frames.size());
    for (std::size_t f = 0; f < det.frames.size(); ++f) {
      p.dets.push_back(det.frames[f].detections);
      if (!det.frames[f].cloud_path.empty())
        gt.frames[f].cloud_path = (det_dir / det.frames[f].cloud_path).string();
      else if (!gt.frames[f].cloud_path.empty())
        gt.frames[f].cloud_path = (gt_dir / gt.frames[f].cloud_path).string();
    }
    p.seq = std::move(gt);
    out.push_back(std::move(p));
  }
  return out;
}

// Trailing multi-sweep stack per frame; frames without a cloud reference get
// an empty stack. Paths resolve relative to the referencing file's directory.
std::vector<pc::StackedCloud> load_stacked_clouds(const FrameSequence& seq,
                                                  const fs::path& base_dir, int sweeps) {
  const std::size_t n = seq.frames.size();
  std::vector<pc::PointCloud> raw(n);
  std::vector<char> has(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& rel = seq.frames[i].cloud_path;
    if (rel.empty()) continue;
    raw[i] = pc::read_cloud_bin((base_dir / rel).string(), seq.frames[i].timestamp_us);
    has[i] = 1;
  }
  std::vector<pc::StackedCloud> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<pc::PointCloud> clouds;
    std::vector<RigidTransform> poses;
    const std::size_t first =
        t + 1 >= static_cast<std::size_t>(sweeps) ? t + 1 - static_cast<std::size_t>(sweeps) : 0;
    for (std::size_t f = first; f <= t; ++f) {
      if (!has[f]) continue;
      clouds.push_back(raw[f]);
      poses.push_back(seq.frames[f].ego_pose);
    }
    if (!clouds.empty())
      out[t] = pc::stack_sweeps(clouds, poses, seq.frames[t].ego_pose,
                                seq.frames[t].timestamp_us, static_cast<std::size_t>(sweeps));
  }
  return out;
}

// Cloud references are relative to the file that holds them; when results
// land in a different directory the references must be re-expressed.
std::string rebase_cloud(const std::string& cloud_path, const fs::path& in_dir,
                         const fs::path& out_dir) {
  if (cloud_path.empty()) return cloud_path;
  return rel_to(out_dir, (in_dir / cloud_path).string());
}

bool any_cloud(const std::vector<FrameSequence>& seqs) {
  for (const FrameSequence& s : seqs)
    for (const Frame& f : s.frames)
      if (!f.cloud_path.empty()) return true;
  return false;
}

void write_curve(const std::string& path, const std::string& stage,
                 const std::vector<train::EpochRecord>& curve) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  for (const train::EpochRecord& r : curve) {
    json j;
    j["stage"] = stage;
    j["epoch"] = r.epoch;
    j["loss"] = r.loss;
    j["bbox"] = r.bbox;
    j["cls"] = r.cls;
    j["giou"] = r.giou;
    out << j.dump() << "\n";
  }
  if (!out) throw ValidationError("write failed for " + path);
}

// Frames whose whole window is empty smooth to an empty frame.
std::vector<Detection> smooth_one_frame(const model::Smoother& model, const FrameSequence& seq,
                                        int frame) {
  const DetectionWindow w =
      compensate_window(assemble_window(seq, frame, model.params().k, model.params().mode), seq);
  if (w.total_detections() == 0) return {};
  return model.smooth_frame(w);
}

FrameSequence with_detections(const FrameSequence& seq,
                              const std::vector<std::vector<Detection>>& dets) {
  FrameSequence out = seq;
  for (std::size_t f = 0; f < out.frames.size(); ++f) out.frames[f].detections = dets[f];
  return out;
}

// ---- synth ----

struct SynthCmd {
  std::string out_dir;
  int scenes = 1;
  synth::SceneConfig scene;
  std::string noise_preset = "typical";
  double drop = 0, fp_rate = 0, sigma_pos = 0, sigma_size = 0, sigma_yaw = 0, flip = 0,
         fp_extent = 0;
  CLI::Option *o_drop = nullptr, *o_fp_rate = nullptr, *o_sigma_pos = nullptr,
              *o_sigma_size = nullptr, *o_sigma_yaw = nullptr, *o_flip = nullptr,
              *o_fp_extent = nullptr;
  synth::PointSampling sampling;
  bool no_clouds = false;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    CLI::App* c = app.add_subcommand("synth", "generate synthetic scenes, detections and clouds");
    c->add_option("--out-dir", out_dir, "output directory")->required();
    c->add_option("--scenes", scenes, "number of scenes (sequence ids derive from --seed)");
    c->add_option("--frames", scene.frame_count, "frames per scene");
    c->add_option("--frame-period", scene.frame_period, "seconds between frames");
    c->add_option("--min-objects", scene.min_objects, "initial population lower bound");
    c->add_option("--max-objects", scene.max_objects, "initial population upper bound");
    c->add_option("--spawn", scene.spawn_prob, "per-frame spawn probability");
    c->add_option("--despawn", scene.despawn_prob, "per-object per-frame despawn probability");
    c->add_option("--min-speed", scene.min_speed, "m/s");
    c->add_option("--max-speed", scene.max_speed, "m/s");
    c->add_option("--extent", scene.extent, "world half-extent objects bounce off");
    c->add_option("--ego-speed", scene.ego_speed, "upper bound of ego drift speed");
    c->add_option("--noise", noise_preset, "detector noise preset: typical | none");
    o_drop = c->add_option("--drop", drop, "detection drop probability");
    o_fp_rate = c->add_option("--fp-rate", fp_rate, "Poisson mean false boxes per frame");
    o_sigma_pos = c->add_option("--sigma-pos", sigma_pos, "center noise sigma (m)");
    o_sigma_size = c->add_option("--sigma-size", sigma_size, "size noise sigma (m)");
    o_sigma_yaw = c->add_option("--sigma-yaw", sigma_yaw, "yaw noise sigma (rad)");
    o_flip = c->add_option("--flip-prob", flip, "orientation flip probability");
    o_fp_extent = c->add_option("--fp-extent", fp_extent, "false-positive placement range");
    c->add_option("--points-per-object", sampling.points_per_object, "cloud points per box");
    c->add_option("--ground-points", sampling.ground_points, "cloud clutter points per frame");
    c->add_flag("--inverse-square", sampling.inverse_square, "fewer points on far objects");
    c->add_option("--reference-distance", sampling.reference_distance,
                  "full point budget inside this range");
    c->add_flag("--no-clouds", no_clouds, "skip point-cloud generation");
    c->add_option("--seed", seed, "master seed");
    c->callback([this] { execute(); });
  }

  void execute() const {
    if (scenes < 1) throw ValidationError("synth: --scenes must be >= 1");
    synth::DetectorNoise noise;
    if (noise_preset == "typical")
      noise = synth::DetectorNoise::typical();
    else if (noise_preset != "none")
      throw ValidationError("synth: --noise must be 'typical' or 'none'");
    noise.fp_extent = scene.extent;
    if (o_drop->count() > 0) noise.drop_prob = drop;
    if (o_fp_rate->count() > 0) noise.fp_rate = fp_rate;
    if (o_sigma_pos->count() > 0) noise.sigma_pos = sigma_pos;
    if (o_sigma_size->count() > 0) noise.sigma_size = sigma_size;
    if (o_sigma_yaw->count() > 0) noise.sigma_yaw = sigma_yaw;
    if (o_flip->count() > 0) noise.orientation_flip_prob = flip;
    if (o_fp_extent->count() > 0) noise.fp_extent = fp_extent;
    noise.validate();
    synth::PointSampling samp = sampling;
    samp.ground_extent = scene.extent;
    samp.validate();

    const fs::path dir = out_dir;
    fs::create_directories(dir);
    if (!no_clouds) fs::create_directories(dir / "clouds");

    const ClassTable classes;
    std::vector<FrameSequence> gt_seqs, det_seqs;
    int frames_total = 0;
    for (int s = 0; s < scenes; ++s) {
      synth::SceneConfig cfg = scene;
      cfg.seed = seed + static_cast<std::uint64_t>(s);
      cfg.validate();
      FrameSequence seq = synth::generate_scene(cfg);
      const auto dets = synth::simulate_detector(seq, noise, cfg.seed + kSeedStride);

      if (!no_clouds) {
        for (std::size_t f = 0; f < seq.frames.size(); ++f) {
          const pc::PointCloud cloud =
              synth::sample_box_points(seq.frames[f], samp, cfg.seed + 2 * kSeedStride + f);
          const std::string rel = "clouds/" + seq.id + "_f" + std::to_string(f) + ".bin";
          pc::write_cloud_bin((dir / rel).string(), cloud);
          seq.frames[f].cloud_path = rel;
        }
      }

      FrameSequence det_seq = seq;
      for (std::size_t f = 0; f < det_seq.frames.size(); ++f) {
        det_seq.frames[f].detections = dets[f];
        det_seq.frames[f].ground_truth.clear();
      }
      frames_total += static_cast<int>(seq.frames.size());
      gt_seqs.push_back(std::move(seq));
      det_seqs.push_back(std::move(det_seq));
    }

    const std::string gt_path = (dir / "gt.jsonl").string();
    const std::string det_path = (dir / "detections.jsonl").string();
    io::write_ground_truth(gt_path, gt_seqs, classes);
    io::write_detections(det_path, det_seqs, classes);

    json stage;
    stage["scenes"] = scenes;
    stage["scene"] = to_json(scene);
    stage["scene"]["seed"] = seed;
    stage["noise"] = to_json(noise);
    stage["sampling"] = to_json(samp);
    std::vector<std::string> outputs{gt_path, det_path};
    if (!no_clouds) outputs.push_back((dir / "clouds").string());
    emit_manifest((dir / "manifest.json").string(), "synth", seed, {}, outputs, {}, stage);

    std::cout << "synth: " << scenes << " scene(s), " << frames_total << " frames -> "
              << dir.string() << "\n";
  }
};

// ---- smooth ----

struct SmoothCmd {
  std::string detections, out, checkpoint;
  model::SmootherParams params;
  std::string mode = "offline";
  int jobs = 1;
  std::uint64_t seed = 0;
  CLI::Option *o_k = nullptr, *o_mode = nullptr, *o_d = nullptr, *o_L = nullptr,
              *o_enc = nullptr, *o_dec = nullptr, *o_heads = nullptr, *o_ffn = nullptr,
              *o_thr = nullptr;

  void add(CLI::App& app) {
    CLI::App* c = app.add_subcommand("smooth", "refine detections with the trained smoother");
    c->add_option("--detections", detections, "input detections (JSON lines)")->required();
    c->add_option("--out", out, "output smoothed detections (JSON lines)")->required();
    c->add_option("--checkpoint", checkpoint, "smoother weights (omit for seed-initialized)");
    o_mode = c->add_option("--mode", mode, "window mode: offline | online");
    o_k = c->add_option("--k", params.k, "half window; a window spans 2k+1 frames");
    o_d = c->add_option("--d", params.d, "model width");
    o_L = c->add_option("--L", params.L, "query count (0 = auto)");
    o_enc = c->add_option("--encoder-layers", params.encoder_layers, "encoder depth");
    o_dec = c->add_option("--decoder-layers", params.decoder_layers, "decoder depth");
    o_heads = c->add_option("--heads", params.heads, "attention heads");
    o_ffn = c->add_option("--ffn-hidden", params.ffn_hidden, "FFN width (0 = 2d)");
    o_thr = c->add_option("--score-threshold", params.score_threshold, "emission threshold");
    c->add_option("--jobs", jobs, "worker threads across sequences");
    c->add_option("--seed", seed, "weight init seed when no checkpoint is given");
    c->callback([this] { execute(); });
  }

  void execute() const {
    ClassTable classes;
    const auto seqs = io::read_detections(detections, classes);

    model::SmootherParams p = params;
    p.mode = parse_window_mode(mode);
    if (!checkpoint.empty()) {
      const json meta = require_checkpoint_stage(checkpoint, "smoother");
      classes = classes_from_meta(meta);
      model::SmootherParams mp = smoother_params_from(meta.at("params"));
      reject_conflict(o_k, p.k, mp.k, checkpoint);
      reject_conflict(o_d, p.d, mp.d, checkpoint);
      reject_conflict(o_L, p.L, mp.L, checkpoint);
      reject_conflict(o_enc, p.encoder_layers, mp.encoder_layers, checkpoint);
      reject_conflict(o_dec, p.decoder_layers, mp.decoder_layers, checkpoint);
      reject_conflict(o_heads, p.heads, mp.heads, checkpoint);
      reject_conflict(o_ffn, p.ffn_hidden, mp.ffn_hidden, checkpoint);
      if (o_mode->count() > 0) mp.mode = p.mode;  // window shape is a runtime choice
      if (o_thr->count() > 0) mp.score_threshold = p.score_threshold;
      p = mp;
    }
    p.validate();

    nn::ParameterStore ps(seed);
    model::Smoother model(ps, p, classes);
    if (!checkpoint.empty()) nn::load_checkpoint(checkpoint, ps);

    const fs::path in_dir = fs::absolute(detections).parent_path();
    const fs::path out_dir = fs::absolute(out).parent_path();
    std::vector<FrameSequence> results(seqs.size());
    io::parallel_for(seqs.size(), jobs, [&](std::size_t i) {
      FrameSequence res = seqs[i];
      for (std::size_t f = 0; f < res.frames.size(); ++f) {
        res.frames[f].detections = smooth_one_frame(model, seqs[i], static_cast<int>(f));
        res.frames[f].cloud_path = rebase_cloud(res.frames[f].cloud_path, in_dir, out_dir);
      }
      results[i] = std::move(res);
    });
    io::write_detections(out, results, classes);

    json stage;
    stage["smoother"] = to_json(p);
    std::vector<std::string> ckpts;
    if (!checkpoint.empty()) ckpts.push_back(checkpoint);
    emit_manifest(out + ".manifest.json", "smooth", seed, {detections}, {out}, ckpts, stage);
    std::cout << "smooth: " << seqs.size() << " sequence(s) -> " << out << "\n";
  }
};

// ---- track ----

struct TrackCmd {
  std::string detections, out, checkpoint;
  model::TrackerParams params;
  bool no_clouds = false;
  int sweeps = static_cast<int>(pc::kDefaultMaxSweeps);
  int jobs = 1;
  std::uint64_t seed = 0;
  CLI::Option *o_d = nullptr, *o_heads = nullptr, *o_dec = nullptr, *o_ffn = nullptr,
              *o_term = nullptr, *o_inactive = nullptr, *o_gate = nullptr, *o_hist = nullptr;

  void add(CLI::App& app) {
    CLI::App* c = app.add_subcommand("track", "run the track-query tracker over detections");
    c->add_option("--detections", detections, "smoothed detections (JSON lines)")->required();
    c->add_option("--out", out, "output tracks (JSON lines)")->required();
    c->add_option("--checkpoint", checkpoint, "tracker weights (omit for seed-initialized)");
    o_term = c->add_option("--term-conf", params.termination_confidence,
                           "confidence below which a track hides");
    o_inactive = c->add_option("--max-inactive", params.max_inactive_frames,
                               "frames a track may stay inactive before termination");
    o_gate = c->add_option("--birth-gate", params.birth_gate, "birth suppression radius (m)");
    o_hist = c->add_option("--history", params.history_capacity, "history buffer length");
    o_d = c->add_option("--d", params.d, "model width");
    o_heads = c->add_option("--heads", params.heads, "attention heads");
    o_dec = c->add_option("--decoder-layers", params.decoder_layers, "decoder depth");
    o_ffn = c->add_option("--ffn-hidden", params.ffn_hidden, "FFN width (0 = 2d)");
    c->add_flag("--no-clouds", no_clouds, "ignore cloud references in the input");
    c->add_option("--sweeps", sweeps, "trailing sweeps stacked per frame");
    c->add_option("--jobs", jobs, "worker threads across sequences");
    c->add_option("--seed", seed, "weight init seed when no checkpoint is given");
    c->callback([this] { execute(); });
  }

  void execute() const {
    if (sweeps < 1) throw ValidationError("track: --sweeps must be >= 1");
    ClassTable classes;
    const auto seqs = io::read_detections(detections, classes);

    model::TrackerParams p = params;
    bool use_voxels = !no_clouds && any_cloud(seqs);
    if (!checkpoint.empty()) {
      const json meta = require_checkpoint_stage(checkpoint, "tracker");
      classes = classes_from_meta(meta);
      model::TrackerParams mp = tracker_params_from(meta.at("params"));
      reject_conflict(o_d, p.d, mp.d, checkpoint);
      reject_conflict(o_heads, p.heads, mp.heads, checkpoint);
      reject_conflict(o_dec, p.decoder_layers, mp.decoder_layers, checkpoint);
      reject_conflict(o_ffn, p.ffn_hidden, mp.ffn_hidden, checkpoint);
      // life-cycle settings are runtime choices
      if (o_term->count() > 0) mp.termination_confidence = p.termination_confidence;
      if (o_inactive->count() > 0) mp.max_inactive_frames = p.max_inactive_frames;
      if (o_gate->count() > 0) mp.birth_gate = p.birth_gate;
      if (o_hist->count() > 0) mp.history_capacity = p.history_capacity;
      p = mp;
      const bool ckpt_voxels = meta.value("voxels", false);
      if (use_voxels && !ckpt_voxels) {
        std::cerr << "warning: " << checkpoint
                  << " was trained without point-cloud context; ignoring clouds\n";
        use_voxels = false;
      }
      if (!use_voxels && ckpt_voxels) use_voxels = true;  // weights exist; tokens may be empty
    }
    p.validate();

    nn::ParameterStore ps(seed);
    model::Tracker tracker(ps, p, classes);
    std::optional<pc::VoxelEncoder> voxels;
    if (use_voxels) voxels.emplace(ps, "voxels", p.d, SceneRange{});
    if (!checkpoint.empty()) nn::load_checkpoint(checkpoint, ps);

    const pc::VoxelGridSpec grid;
    const fs::path base_dir = fs::absolute(detections).parent_path();
    const fs::path out_dir = fs::absolute(out).parent_path();
    const bool read_clouds = use_voxels && !no_clouds;
    std::vector<io::TrackSequence> results(seqs.size());
    io::parallel_for(seqs.size(), jobs, [&](std::size_t i) {
      const FrameSequence& seq = seqs[i];
      std::vector<pc::StackedCloud> stacked;
      if (read_clouds) stacked = load_stacked_clouds(seq, base_dir, sweeps);
      io::TrackSequence ts;
      ts.id = seq.id;
      model::TrackerFrameState state;
      for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        pc::FeatureTokens tokens;
        if (read_clouds && !stacked[f].points.empty())
          tokens = voxels->encode(pc::voxelize(stacked[f], grid));
        auto sr = tracker.step(seq.frames[f].detections, state, tokens);
        state = std::move(sr.state);
        io::TrackFrame tf;
        tf.frame_index = seq.frames[f].frame_idx;
        tf.timestamp_us = seq.frames[f].timestamp_us;
        tf.ego_pose = seq.frames[f].ego_pose;
        tf.cloud_path = rebase_cloud(seq.frames[f].cloud_path, base_dir, out_dir);
        for (const TrackState& t : sr.emitted)
          tf.boxes.push_back(metrics::EvalBox{t.box, t.track_id, t.class_id, t.score});
        ts.frames.push_back(std::move(tf));
      }
      results[i] = std::move(ts);
    });
    io::write_tracks(out, results, classes);

    json stage;
    stage["tracker"] = to_json(p);
    stage["voxels"] = use_voxels;
    stage["sweeps"] = sweeps;
    std::vector<std::string> ckpts;
    if (!checkpoint.empty()) ckpts.push_back(checkpoint);
    emit_manifest(out + ".manifest.json", "track", seed, {detections}, {out}, ckpts, stage);
    std::cout << "track: " << seqs.size() << " sequence(s) -> " << out << "\n";
  }
};

// ---- train ----

struct TrainCmd {
  std::string stage = "smoother";
  std::string detections, gt, out, curve;
  std::string raw_detections, smoother_checkpoint, out_smoother;
  bool finetune = false;
  bool use_clouds = false;
  int sweeps = static_cast<int>(pc::kDefaultMaxSweeps);
  // shared architecture flags (defaults match both models)
  int d = 64, heads = 4, decoder_layers = 2, ffn_hidden = 0;
  // smoother-only
  int k = 2, L = 0, encoder_layers = 2;
  std::string mode = "offline";
  double score_threshold = 0.1;
  // tracker-only
  double term_conf = 0.2, birth_gate = 2.0;
  int max_inactive = 5, history = 10;
  // optimization
  int epochs = 200, batch_size = 1, clip_length = 8;
  double lr = 5e-4, weight_decay = 0.01, smoother_lr = 1e-4;
  double noise_pos = 0.3, noise_size = 0.1, noise_yaw = 0.1;
  std::uint64_t seed = 0;
  CLI::Option* o_lr = nullptr;

  void add(CLI::App& app) {
    CLI::App* c = app.add_subcommand("train", "fit the smoother or the tracker");
    c->add_option("--stage", stage, "smoother | tracker")->required();
    c->add_option("--detections", detections,
                  "input detections (raw for the smoother stage, smoothed for the tracker)")
        ->required();
    c->add_option("--gt", gt, "ground-truth tracks (JSON lines)")->required();
    c->add_option("--out", out, "output checkpoint")->required();
    c->add_option("--curve", curve, "optional per-epoch loss curve (JSON lines)");
    c->add_option("--epochs", epochs, "training epochs");
    o_lr = c->add_option("--lr", lr, "learning rate (default 5e-4 smoother, 4e-4 tracker)");
    c->add_option("--batch-size", batch_size, "samples per optimizer step");
    c->add_option("--clip-length", clip_length, "tracker unroll length");
    c->add_option("--weight-decay", weight_decay, "AdamW weight decay");
    c->add_option("--noise-pos", noise_pos, "augmentation sigma on centers (m)");
    c->add_option("--noise-size", noise_size, "augmentation sigma on sizes (m)");
    c->add_option("--noise-yaw", noise_yaw, "augmentation sigma on yaw (rad)");
    c->add_option("--d", d, "model width");
    c->add_option("--heads", heads, "attention heads");
    c->add_option("--decoder-layers", decoder_layers, "decoder depth");
    c->add_option("--ffn-hidden", ffn_hidden, "FFN width (0 = 2d)");
    c->add_option("--k", k, "smoother half window");
    c->add_option("--mode", mode, "smoother window mode: offline | online");
    c->add_option("--L", L, "smoother query count (0 = auto)");
    c->add_option("--encoder-layers", encoder_layers, "smoother encoder depth");
    c->add_option("--score-threshold", score_threshold, "smoother emission threshold");
    c->add_option("--term-conf", term_conf, "tracker termination confidence");
    c->add_option("--max-inactive", max_inactive, "tracker inactive budget");
    c->add_option("--birth-gate", birth_gate, "tracker birth gate (m)");
    c->add_option("--history", history, "tracker history capacity");
    c->add_flag("--use-clouds", use_clouds, "train the tracker with point-cloud context");
    c->add_option("--sweeps", sweeps, "trailing sweeps stacked per frame");
    c->add_flag("--finetune-smoother", finetune,
                "tracker stage: alternate one smoother epoch per tracker epoch");
    c->add_option("--smoother-checkpoint", smoother_checkpoint,
                  "trained smoother (required with --finetune-smoother)");
    c->add_option("--raw-detections", raw_detections,
                  "raw detector output (required with --finetune-smoother)");
    c->add_option("--out-smoother", out_smoother,
                  "updated smoother checkpoint (required with --finetune-smoother)");
    c->add_option("--smoother-lr", smoother_lr, "fine-tuning learning rate for the smoother");
    c->add_option("--seed", seed, "training seed");
    c->callback([this] { execute(); });
  }

  model::SmootherParams smoother_params() const {
    model::SmootherParams p;
    p.k = k;
    p.mode = parse_window_mode(mode);
    p.d = d;
    p.L = L;
    p.encoder_layers = encoder_layers;
    p.decoder_layers = decoder_layers;
    p.heads = heads;
    p.ffn_hidden = ffn_hidden;
    p.score_threshold = score_threshold;
    return p;
  }

  model::TrackerParams tracker_params() const {
    model::TrackerParams p;
    p.termination_confidence = term_conf;
    p.max_inactive_frames = max_inactive;
    p.birth_gate = birth_gate;
    p.d = d;
    p.heads = heads;
    p.decoder_layers = decoder_layers;
    p.ffn_hidden = ffn_hidden;
    p.history_capacity = history;
    return p;
  }

  train::TrainConfig train_config(train::Stage st) const {
    train::TrainConfig cfg;
    cfg.stage = st;
    cfg.epochs = epochs;
    cfg.learning_rate = o_lr->count() > 0 ? lr : (st == train::Stage::kSmoother ? 5e-4 : 4e-4);
    cfg.batch_size = batch_size;
    cfg.weights = st == train::Stage::kSmoother ? match::MatchWeights::smoother_defaults()
                                                : match::MatchWeights::tracker_defaults();
    cfg.noise = train::NoiseSigmas{noise_pos, noise_size, noise_yaw};
    cfg.seed = seed;
    cfg.sequence_clip_length = clip_length;
    cfg.finetune_smoother = finetune;
    cfg.weight_decay = weight_decay;
    cfg.validate();
    return cfg;
  }

  void execute() const {
    if (stage == "smoother")
      train_smoother_stage();
    else if (stage == "tracker")
      train_tracker_stage();
    else
      throw ValidationError("train: --stage must be 'smoother' or 'tracker'");
  }

  void train_smoother_stage() const {
    if (finetune)
      throw ValidationError("train: --finetune-smoother applies to the tracker stage");
    const ClassTable classes;
    const auto pairs =
        pair_inputs(io::read_ground_truth(gt, classes), io::read_detections(detections, classes),
                    gt, detections);
    const model::SmootherParams sp = smoother_params();
    sp.validate();

    train::SmootherDataset data;
    for (const PairedSequence& p : pairs) {
      const auto part = train::build_smoother_dataset(p.seq, p.dets, sp.k, sp.mode);
      data.insert(data.end(), part.begin(), part.end());
    }
    if (data.empty()) throw ValidationError("train: no non-empty windows to fit");

    const train::TrainConfig cfg = train_config(train::Stage::kSmoother);
    nn::ParameterStore ps(seed);
    model::Smoother model(ps, sp, classes);
    const train::TrainResult result = train::train_smoother(model, ps, data, cfg);

    json meta;
    meta["stage"] = "smoother";
    meta["params"] = to_json(sp);
    meta["classes"] = classes.names();
    meta["seed"] = seed;
    meta["train"] = to_json(cfg);
    meta["initial_loss"] = result.initial_loss;
    meta["final_loss"] = result.final_loss;
    nn::save_checkpoint(out, ps, meta);
    if (!curve.empty()) write_curve(curve, "smoother", result.curve);

    json stage_cfg;
    stage_cfg["smoother"] = to_json(sp);
    stage_cfg["train"] = to_json(cfg);
    stage_cfg["result"] = {{"initial_loss", result.initial_loss},
                           {"final_loss", result.final_loss}};
    std::vector<std::string> outputs{out};
    if (!curve.empty()) outputs.push_back(curve);
    emit_manifest(out + ".manifest.json", "train", seed, {detections, gt}, outputs, {out},
                  stage_cfg);
    std::cout << "train smoother: loss " << result.initial_loss << " -> " << result.final_loss
              << " over " << cfg.epochs << " epoch(s)\n";
  }

  std::vector<train::TrackerClip> make_clips(const std::vector<PairedSequence>& pairs,
                                             const fs::path& base_dir, bool with_clouds,
                                             int clip_len) const {
    std::vector<train::TrackerClip> clips;
    for (const PairedSequence& p : pairs) {
      std::vector<pc::StackedCloud> stacked;
      const std::vector<pc::StackedCloud>* cloud_ptr = nullptr;
      if (with_clouds) {
        stacked = load_stacked_clouds(p.seq, base_dir, sweeps);
        cloud_ptr = &stacked;
      }
      const auto part = train::build_tracker_clips(p.seq, p.dets, clip_len, cloud_ptr);
      clips.insert(clips.end(), part.begin(), part.end());
    }
    if (clips.empty()) throw ValidationError("train: no clips to fit");
    return clips;
  }

  void train_tracker_stage() const {
    if (finetune) {
      train_tracker_alternating();
      return;
    }
    const ClassTable classes;
    const auto pairs =
        pair_inputs(io::read_ground_truth(gt, classes), io::read_detections(detections, classes),
                    gt, detections);
    const model::TrackerParams tp = tracker_params();
    tp.validate();
    const train::TrainConfig cfg = train_config(train::Stage::kTracker);

    bool with_clouds = use_clouds;
    if (with_clouds) {
      bool found = false;
      for (const PairedSequence& p : pairs)
        for (const Frame& f : p.seq.frames)
          if (!f.cloud_path.empty()) found = true;
      if (!found) throw ValidationError("train: --use-clouds but no cloud references in inputs");
    }
    const auto clips =
        make_clips(pairs, fs::path(detections).parent_path(), with_clouds, clip_length);

    nn::ParameterStore ps(seed);
    model::Tracker tracker(ps, tp, classes);
    std::optional<pc::VoxelEncoder> voxels;
    const pc::VoxelGridSpec grid;
    if (with_clouds) voxels.emplace(ps, "voxels", tp.d, SceneRange{});
    const train::TrainResult result = train::train_tracker(
        tracker, ps, clips, cfg, voxels ? &*voxels : nullptr, grid);

    json meta;
    meta["stage"] = "tracker";
    meta["params"] = to_json(tp);
    meta["classes"] = classes.names();
    meta["seed"] = seed;
    meta["voxels"] = with_clouds;
    meta["train"] = to_json(cfg);
    meta["initial_loss"] = result.initial_loss;
    meta["final_loss"] = result.final_loss;
    nn::save_checkpoint(out, ps, meta);
    if (!curve.empty()) write_curve(curve, "tracker", result.curve);

    json stage_cfg;
    stage_cfg["tracker"] = to_json(tp);
    stage_cfg["train"] = to_json(cfg);
    stage_cfg["voxels"] = with_clouds;
    stage_cfg["result"] = {{"initial_loss", result.initial_loss},
                           {"final_loss", result.final_loss}};
    std::vector<std::string> outputs{out};
    if (!curve.empty()) outputs.push_back(curve);
    emit_manifest(out + ".manifest.json", "train", seed, {detections, gt}, outputs, {out},
                  stage_cfg);
    std::cout << "train tracker: loss " << result.initial_loss << " -> " << result.final_loss
              << " over " << cfg.epochs << " epoch(s)\n";
  }

  // One smoother epoch per tracker epoch; detections are re-smoothed with the
  // updated smoother before every tracker round.
  void train_tracker_alternating() const {
    if (smoother_checkpoint.empty() || raw_detections.empty() || out_smoother.empty())
      throw ValidationError(
          "train: --finetune-smoother requires --smoother-checkpoint, --raw-detections and "
          "--out-smoother");
    const json smeta = require_checkpoint_stage(smoother_checkpoint, "smoother");
    const ClassTable classes = classes_from_meta(smeta);
    const model::SmootherParams sp = smoother_params_from(smeta.at("params"));
    nn::ParameterStore sm_ps(seed + 1);
    model::Smoother smoother(sm_ps, sp, classes);
    nn::load_checkpoint(smoother_checkpoint, sm_ps);

    const auto raw_pairs =
        pair_inputs(io::read_ground_truth(gt, classes),
                    io::read_detections(raw_detections, classes), gt, raw_detections);

    const model::TrackerParams tp = tracker_params();
    tp.validate();
    train::TrainConfig tcfg = train_config(train::Stage::kTracker);
    nn::ParameterStore ps(seed);
    model::Tracker tracker(ps, tp, classes);
    std::optional<pc::VoxelEncoder> voxels;
    const pc::VoxelGridSpec grid;
    if (use_clouds) voxels.emplace(ps, "voxels", tp.d, SceneRange{});

    train::TrainConfig scfg = tcfg;
    scfg.stage = train::Stage::kSmoother;
    scfg.learning_rate = smoother_lr;
    scfg.weights = match::MatchWeights::smoother_defaults();
    scfg.epochs = 1;

    const fs::path base_dir = fs::path(raw_detections).parent_path();
    std::vector<train::EpochRecord> curve_records;
    double initial = 0.0, final_loss = 0.0;
    for (int round = 0; round < epochs; ++round) {
      // (a) smooth the raw detections with the current smoother weights
      std::vector<PairedSequence> smoothed_pairs;
      for (const PairedSequence& p : raw_pairs) {
        const FrameSequence injected = with_detections(p.seq, p.dets);
        PairedSequence sp2;
        sp2.seq = p.seq;
        sp2.dets.resize(p.seq.frames.size());
        for (std::size_t f = 0; f < p.seq.frames.size(); ++f)
          sp2.dets[f] = smooth_one_frame(smoother, injected, static_cast<int>(f));
        smoothed_pairs.push_back(std::move(sp2));
      }
      // (b) one tracker epoch on the freshly smoothed detections
      const auto clips = make_clips(smoothed_pairs, base_dir, use_clouds, clip_length);
      train::TrainConfig round_cfg = tcfg;
      round_cfg.epochs = 1;
      round_cfg.seed = seed + static_cast<std::uint64_t>(round);
      const auto tr = train::train_tracker(tracker, ps, clips, round_cfg,
                                           voxels ? &*voxels : nullptr, grid);
      if (round == 0) initial = tr.initial_loss;
      final_loss = tr.final_loss;
      train::EpochRecord rec = tr.curve.front();
      rec.epoch = round;
      curve_records.push_back(rec);
      // (c) one smoother epoch on the raw detections
      train::SmootherDataset data;
      for (const PairedSequence& p : raw_pairs) {
        const auto part = train::build_smoother_dataset(p.seq, p.dets, sp.k, sp.mode);
        data.insert(data.end(), part.begin(), part.end());
      }
      train::TrainConfig s_round = scfg;
      s_round.seed = seed + kSeedStride + static_cast<std::uint64_t>(round);
      train::train_smoother(smoother, sm_ps, data, s_round);
    }

    json meta;
    meta["stage"] = "tracker";
    meta["params"] = to_json(tp);
    meta["classes"] = classes.names();
    meta["seed"] = seed;
    meta["voxels"] = use_clouds;
    meta["train"] = to_json(tcfg);
    meta["initial_loss"] = initial;
    meta["final_loss"] = final_loss;
    nn::save_checkpoint(out, ps, meta);
    json smeta_out = smeta;
    smeta_out["finetuned_rounds"] = epochs;
    nn::save_checkpoint(out_smoother, sm_ps, smeta_out);
    if (!curve.empty()) write_curve(curve, "tracker", curve_records);

    json stage_cfg;
    stage_cfg["tracker"] = to_json(tp);
    stage_cfg["train"] = to_json(tcfg);
    stage_cfg["smoother"] = to_json(sp);
    stage_cfg["smoother_lr"] = smoother_lr;
    std::vector<std::string> outputs{out, out_smoother};
    if (!curve.empty()) outputs.push_back(curve);
    emit_manifest(out + ".manifest.json", "train", seed, {raw_detections, gt}, outputs,
                  {out, out_smoother, smoother_checkpoint}, stage_cfg);
    std::cout << "train tracker (alternating): loss " << initial << " -> " << final_loss
              << " over " << epochs << " round(s)\n";
  }
};

// ---- eval ----

struct EvalCmd {
  std::string tracks, detections, gt;
  std::string out = "-";
  metrics::EvalConfig cfg;
  int jobs = 1;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    CLI::App* c = app.add_subcommand("eval", "score tracks (CLEAR-MOT, aMOTA) or detections (mAP)");
    c->add_option("--tracks", tracks, "tracks to score (JSON lines)");
    c->add_option("--detections", detections, "detections to score with mAP (JSON lines)");
    c->add_option("--gt", gt, "ground-truth tracks (JSON lines)")->required();
    c->add_option("--out", out, "report path ('-' = stdout)");
    c->add_option("--match-distance", cfg.match_distance, "BEV center-distance gate (m)");
    c->add_option("--recall-steps", cfg.recall_steps, "recall sweep resolution");
    c->add_flag("--per-class", cfg.per_class, "emit per-class aMOTA/aMOTP");
    c->add_option("--jobs", jobs, "worker threads across sequences");
    c->add_option("--seed", seed, "recorded in the report (evaluation is deterministic)");
    c->callback([this] { execute(); });
  }

  json base_report(const char* mode) const {
    json r;
    r["v"] = io::kFormatVersion;
    r["command"] = "eval";
    r["mode"] = mode;
    r["seed"] = seed;
    json c;
    c["match_distance"] = cfg.match_distance;
    c["recall_steps"] = cfg.recall_steps;
    c["per_class"] = cfg.per_class;
    c["gt"] = gt;
    c["jobs"] = jobs;
    if (!tracks.empty()) c["tracks"] = tracks;
    if (!detections.empty()) c["detections"] = detections;
    r["config"] = std::move(c);
    return r;
  }

  void execute() const {
    if (tracks.empty() == detections.empty())
      throw ValidationError("eval: provide exactly one of --tracks or --detections");
    cfg.validate();
    const ClassTable classes;
    const auto gt_seqs = io::read_ground_truth(gt, classes);
    json report;
    if (!tracks.empty())
      report = eval_tracks(gt_seqs, classes);
    else
      report = eval_detections(gt_seqs, classes);
    io::write_report(out, report);
    if (out != "-") {
      json stage = report.at("config");
      std::vector<std::string> inputs{gt};
      if (!tracks.empty()) inputs.push_back(tracks);
      if (!detections.empty()) inputs.push_back(detections);
      emit_manifest(out + ".manifest.json", "eval", seed, inputs, {out}, {}, stage);
      std::cout << "eval: wrote " << out << "\n";
    }
  }

  json eval_tracks(const std::vector<FrameSequence>& gt_seqs, const ClassTable& classes) const {
    const auto track_seqs = io::read_tracks(tracks, classes);
    std::map<std::string, const io::TrackSequence*> by_id;
    for (const io::TrackSequence& s : track_seqs) by_id[s.id] = &s;
    if (track_seqs.size() != gt_seqs.size())
      throw ValidationError(tracks + " and " + gt + " hold different sequence sets");

    std::vector<metrics::EvalSequence> eval_seqs(gt_seqs.size());
    for (std::size_t i = 0; i < gt_seqs.size(); ++i) {
      const auto it = by_id.find(gt_seqs[i].id);
      if (it == by_id.end())
        throw ValidationError(tracks + ": missing sequence '" + gt_seqs[i].id + "'");
      const io::TrackSequence& ts = *it->second;
      if (ts.frames.size() != gt_seqs[i].frames.size())
        throw ValidationError("sequence '" + gt_seqs[i].id + "': " + tracks + " has " +
                              std::to_string(ts.frames.size()) + " frames but " + gt + " has " +
                              std::to_string(gt_seqs[i].frames.size()));
      metrics::EvalSequence es;
      for (std::size_t f = 0; f < ts.frames.size(); ++f)
        es.push_back(metrics::EvalFrame{ts.frames[f].boxes, gt_seqs[i].frames[f].ground_truth});
      eval_seqs[i] = std::move(es);
    }

    std::vector<metrics::EvalAccumulator> accs(eval_seqs.size());
    io::parallel_for(eval_seqs.size(), jobs, [&](std::size_t i) {
      for (const metrics::EvalFrame& f : eval_seqs[i]) accs[i].add_frame(f.preds, f.gts, cfg);
    });
    const metrics::ClearMotResult clear = metrics::compute_clearmot(accs);
    const metrics::AmotaResult amota = metrics::compute_amota_amotp(eval_seqs, cfg);

    json report = base_report("tracks");
    report["clearmot"] = io::to_json(clear);
    report["amota"] = io::to_json(amota, classes);
    return report;
  }

  json eval_detections(const std::vector<FrameSequence>& gt_seqs,
                       const ClassTable& classes) const {
    const auto det_seqs = io::read_detections(detections, classes);
    const auto pairs = pair_inputs(gt_seqs, det_seqs, gt, detections);
    std::vector<metrics::EvalFrame> frames;
    for (const PairedSequence& p : pairs)
      for (std::size_t f = 0; f < p.seq.frames.size(); ++f) {
        metrics::EvalFrame ef;
        for (const Detection& d : p.dets[f])
          ef.preds.push_back(metrics::EvalBox{d.box, -1, d.class_id, d.score});
        ef.gts = p.seq.frames[f].ground_truth;
        frames.push_back(std::move(ef));
      }
    const metrics::MapResult result = metrics::compute_map_center_distance(frames);

    json report = base_report("detections");
    report["map"] = io::to_json(result, classes);
    return report;
  }
};

// ---- gradcheck ----

struct GradcheckCmd {
  std::uint64_t seed = 0;
  double tol = train::kGradCheckTolerance;

  void add(CLI::App& app) {
    CLI::App* c = app.add_subcommand("gradcheck", "finite-difference check of every block");
    c->add_option("--seed", seed, "fixture seed");
    c->add_option("--tol", tol, "max relative error accepted");
    c->callback([this] { execute(); });
  }

  void execute() const {
    const auto checks = train::gradcheck_suite(seed);
    bool ok = true;
    for (const train::BlockCheck& c : checks) {
      const bool pass = c.report.passed(tol);
      ok = ok && pass;
      std::cout << (pass ? "pass" : "FAIL") << "  " << c.name << "  max_rel_err "
                << c.report.max_rel_err << "\n";
      if (!pass) std::cout << "      " << c.report.describe() << "\n";
    }
    if (!ok) throw NumericError("gradient check failed");
  }
};

}  // namespace

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("lmot");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, const char* const* argv) {
  CLI::App app{"lmot: trainable two-stage LiDAR multi-object tracking"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "",
                 "key = value configuration; one [section] per subcommand; flags win");

  SynthCmd synth_cmd;
  SmoothCmd smooth_cmd;
  TrackCmd track_cmd;
  TrainCmd train_cmd;
  EvalCmd eval_cmd;
  GradcheckCmd gradcheck_cmd;
  synth_cmd.add(app);
  smooth_cmd.add(app);
  track_cmd.add(app);
  train_cmd.add(app);
  eval_cmd.add(app);
  gradcheck_cmd.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace lmot::cli
