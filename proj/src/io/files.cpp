// SPDX-License-Identifier: Apache-2.0
#include "lmot/io/files.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <utility>

namespace lmot::io {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& msg) {
  throw ValidationError(path + ":" + std::to_string(line) + ": " + msg);
}

void warn(std::vector<std::string>* sink, const std::string& msg) {
  if (sink)
    sink->push_back(msg);
  else
    std::cerr << "warning: " << msg << "\n";
}

// Strict schema: every required key present, nothing outside required+optional.
void check_keys(const json& obj, const std::vector<const char*>& required,
                const std::vector<const char*>& optional, const std::string& what,
                const std::string& path, std::size_t line) {
  for (const char* key : required)
    if (!obj.contains(key)) fail(path, line, what + ": missing field '" + key + "'");
  for (const auto& item : obj.items()) {
    const std::string& key = item.key();
    auto known = [&](const std::vector<const char*>& set) {
      for (const char* k : set)
        if (key == k) return true;
      return false;
    };
    if (!known(required) && !known(optional))
      fail(path, line, what + ": unknown field '" + key + "'");
  }
}

double get_double(const json& obj, const char* key, const std::string& path, std::size_t line) {
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path, line, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::int64_t get_int(const json& obj, const char* key, const std::string& path,
                     std::size_t line) {
  const json& v = obj.at(key);
  if (!v.is_number_integer())
    fail(path, line, std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& path,
                       std::size_t line) {
  const json& v = obj.at(key);
  if (!v.is_string()) fail(path, line, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::array<double, 3> get_vec3(const json& obj, const char* key, const std::string& path,
                               std::size_t line) {
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 3)
    fail(path, line, std::string("field '") + key + "' must be an array of 3 numbers");
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number())
      fail(path, line, std::string("field '") + key + "' must be an array of 3 numbers");
    out[static_cast<std::size_t>(i)] = v[i].get<double>();
  }
  return out;
}

// Re-raises a ValidationError from `fn` with file:line context.
template <typename Fn>
void at_line(const std::string& path, std::size_t line, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    fail(path, line, e.what());
  }
}

struct RecordHeader {
  std::string sequence_id;
  int frame_index = 0;
  std::int64_t timestamp_us = 0;
  RigidTransform ego_pose;
  std::string cloud;
};

RecordHeader parse_header(const json& rec, const std::string& path, std::size_t line) {
  if (!rec.is_object()) fail(path, line, "record must be a JSON object");
  check_keys(rec, {"v", "sequence_id", "frame_index", "timestamp_us", "ego_pose", "boxes"},
             {"cloud"}, "record", path, line);
  const std::int64_t version = get_int(rec, "v", path, line);
  if (version != kFormatVersion)
    fail(path, line, "unsupported format version " + std::to_string(version));

  RecordHeader h;
  h.sequence_id = get_string(rec, "sequence_id", path, line);
  if (h.sequence_id.empty()) fail(path, line, "sequence_id must be non-empty");
  h.frame_index = static_cast<int>(get_int(rec, "frame_index", path, line));
  h.timestamp_us = get_int(rec, "timestamp_us", path, line);

  const json& pose = rec.at("ego_pose");
  if (!pose.is_array() || pose.size() != 16)
    fail(path, line, "ego_pose must be an array of 16 numbers");
  std::array<double, 16> m{};
  for (std::size_t i = 0; i < 16; ++i) {
    if (!pose[i].is_number()) fail(path, line, "ego_pose must be an array of 16 numbers");
    m[i] = pose[i].get<double>();
  }
  h.ego_pose = RigidTransform(m);
  at_line(path, line, [&] { h.ego_pose.validate_rigid(); });

  if (!rec.at("boxes").is_array()) fail(path, line, "boxes must be an array");
  if (rec.contains("cloud")) h.cloud = get_string(rec, "cloud", path, line);
  return h;
}

BBox3D parse_bbox(const json& b, const std::string& path, std::size_t line,
                  std::vector<std::string>* warnings) {
  BBox3D box;
  box.center = get_vec3(b, "center", path, line);
  box.size = get_vec3(b, "size", path, line);
  box.yaw = get_double(b, "yaw", path, line);
  at_line(path, line, [&] { box.validate(); });
  const double wrapped = normalize_yaw(box.yaw);
  if (wrapped != box.yaw) {
    warn(warnings, path + ":" + std::to_string(line) + ": yaw " + std::to_string(box.yaw) +
                       " outside (-pi, pi], normalized to " + std::to_string(wrapped));
    box.yaw = wrapped;
  }
  return box;
}

int parse_class(const json& b, const ClassTable& classes, const std::string& path,
                std::size_t line) {
  const std::string name = get_string(b, "class", path, line);
  int id = -1;
  at_line(path, line, [&] { id = classes.id_of(name); });
  return id;
}

enum class FileKind { kDetections, kGroundTruth };

// Shared reader for the two FrameSequence-backed kinds.
std::vector<FrameSequence> read_frames_file(const std::string& path, const ClassTable& classes,
                                            std::vector<std::string>* warnings, FileKind kind) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);

  std::vector<FrameSequence> seqs;
  std::map<std::string, std::size_t> by_id;
  std::string buf;
  std::size_t line = 0;
  while (std::getline(in, buf)) {
    ++line;
    if (buf.empty()) continue;
    const json rec = json::parse(buf, nullptr, false);
    if (rec.is_discarded()) fail(path, line, "invalid JSON");
    const RecordHeader h = parse_header(rec, path, line);

    Frame f;
    f.frame_idx = h.frame_index;
    f.timestamp_us = h.timestamp_us;
    f.ego_pose = h.ego_pose;
    f.cloud_path = h.cloud;
    std::set<std::int64_t> seen_instances;
    for (const json& b : rec.at("boxes")) {
      if (!b.is_object()) fail(path, line, "box must be a JSON object");
      if (kind == FileKind::kDetections) {
        check_keys(b, {"center", "size", "yaw", "class", "score"}, {}, "detection box", path,
                   line);
        Detection d;
        d.box = parse_bbox(b, path, line, warnings);
        d.class_id = parse_class(b, classes, path, line);
        d.score = get_double(b, "score", path, line);
        at_line(path, line, [&] { d.validate(classes); });
        f.detections.push_back(std::move(d));
      } else {
        check_keys(b, {"center", "size", "yaw", "class", "instance_id"}, {}, "ground-truth box",
                   path, line);
        GroundTruthObject g;
        g.box = parse_bbox(b, path, line, warnings);
        g.class_id = parse_class(b, classes, path, line);
        g.instance_id = get_int(b, "instance_id", path, line);
        if (!seen_instances.insert(g.instance_id).second)
          fail(path, line,
               "duplicate instance_id " + std::to_string(g.instance_id) + " in one frame");
        f.ground_truth.push_back(std::move(g));
      }
    }

    const auto [it, inserted] = by_id.try_emplace(h.sequence_id, seqs.size());
    if (inserted) seqs.push_back(FrameSequence{h.sequence_id, {}});
    seqs[it->second].frames.push_back(std::move(f));
  }

  for (const FrameSequence& s : seqs) {
    try {
      s.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(path + ": sequence '" + s.id + "': " + e.what());
    }
  }
  return seqs;
}

json box_json(const BBox3D& box, const std::string& class_name) {
  json b;
  b["center"] = {box.center[0], box.center[1], box.center[2]};
  b["size"] = {box.size[0], box.size[1], box.size[2]};
  b["yaw"] = box.yaw;
  b["class"] = class_name;
  return b;
}

json record_json(const std::string& sequence_id, int frame_index, std::int64_t timestamp_us,
                 const RigidTransform& pose, const std::string& cloud) {
  json r;
  r["v"] = kFormatVersion;
  r["sequence_id"] = sequence_id;
  r["frame_index"] = frame_index;
  r["timestamp_us"] = timestamp_us;
  r["ego_pose"] = pose.matrix();
  if (!cloud.empty()) r["cloud"] = cloud;
  return r;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  return out;
}

void write_frames_file(const std::string& path, const std::vector<FrameSequence>& seqs,
                       const ClassTable& classes, FileKind kind) {
  std::ofstream out = open_out(path);
  for (const FrameSequence& seq : seqs) {
    seq.validate();
    for (const Frame& f : seq.frames) {
      json rec = record_json(seq.id, f.frame_idx, f.timestamp_us, f.ego_pose, f.cloud_path);
      json boxes = json::array();
      if (kind == FileKind::kDetections) {
        for (const Detection& d : f.detections) {
          d.validate(classes);
          json b = box_json(d.box, classes.name_of(d.class_id));
          b["score"] = d.score;
          boxes.push_back(std::move(b));
        }
      } else {
        std::set<std::int64_t> seen;
        for (const GroundTruthObject& g : f.ground_truth) {
          if (g.is_null)
            throw ValidationError("write_ground_truth: null padding objects are not serializable");
          g.box.validate();
          if (!seen.insert(g.instance_id).second)
            throw ValidationError("write_ground_truth: duplicate instance_id " +
                                  std::to_string(g.instance_id) + " in frame " +
                                  std::to_string(f.frame_idx));
          json b = box_json(g.box, classes.name_of(g.class_id));
          b["instance_id"] = g.instance_id;
          boxes.push_back(std::move(b));
        }
      }
      rec["boxes"] = std::move(boxes);
      out << rec.dump() << "\n";
    }
  }
  if (!out) throw ValidationError("write failed for " + path);
}

}  // namespace

std::vector<FrameSequence> read_detections(const std::string& path, const ClassTable& classes,
                                           std::vector<std::string>* warnings) {
  return read_frames_file(path, classes, warnings, FileKind::kDetections);
}

void write_detections(const std::string& path, const std::vector<FrameSequence>& seqs,
                      const ClassTable& classes) {
  write_frames_file(path, seqs, classes, FileKind::kDetections);
}

std::vector<FrameSequence> read_ground_truth(const std::string& path, const ClassTable& classes,
                                             std::vector<std::string>* warnings) {
  return read_frames_file(path, classes, warnings, FileKind::kGroundTruth);
}

void write_ground_truth(const std::string& path, const std::vector<FrameSequence>& seqs,
                        const ClassTable& classes) {
  write_frames_file(path, seqs, classes, FileKind::kGroundTruth);
}

std::vector<TrackSequence> read_tracks(const std::string& path, const ClassTable& classes,
                                       std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);

  std::vector<TrackSequence> seqs;
  std::map<std::string, std::size_t> by_id;
  std::string buf;
  std::size_t line = 0;
  while (std::getline(in, buf)) {
    ++line;
    if (buf.empty()) continue;
    const json rec = json::parse(buf, nullptr, false);
    if (rec.is_discarded()) fail(path, line, "invalid JSON");
    const RecordHeader h = parse_header(rec, path, line);

    TrackFrame f;
    f.frame_index = h.frame_index;
    f.timestamp_us = h.timestamp_us;
    f.ego_pose = h.ego_pose;
    f.cloud_path = h.cloud;
    std::set<std::int64_t> seen_ids;
    for (const json& b : rec.at("boxes")) {
      if (!b.is_object()) fail(path, line, "box must be a JSON object");
      check_keys(b, {"center", "size", "yaw", "class", "score", "track_id"}, {}, "track box",
                 path, line);
      metrics::EvalBox e;
      e.box = parse_bbox(b, path, line, warnings);
      e.class_id = parse_class(b, classes, path, line);
      e.score = get_double(b, "score", path, line);
      e.id = get_int(b, "track_id", path, line);
      if (!std::isfinite(e.score) || e.score < 0.0 || e.score > 1.0)
        fail(path, line, "score must be in [0, 1]");
      if (!seen_ids.insert(e.id).second)
        fail(path, line, "duplicate track_id " + std::to_string(e.id) + " in one frame");
      f.boxes.push_back(std::move(e));
    }

    const auto [it, inserted] = by_id.try_emplace(h.sequence_id, seqs.size());
    if (inserted) seqs.push_back(TrackSequence{h.sequence_id, {}});
    seqs[it->second].frames.push_back(std::move(f));
  }

  for (const TrackSequence& s : seqs) {
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      if (s.frames[i].frame_index != static_cast<int>(i))
        throw ValidationError(path + ": sequence '" + s.id +
                              "': frame indices must be 0-based and contiguous");
      if (i > 0 && s.frames[i].timestamp_us <= s.frames[i - 1].timestamp_us)
        throw ValidationError(path + ": sequence '" + s.id +
                              "': timestamps must be strictly increasing");
    }
  }
  return seqs;
}

void write_tracks(const std::string& path, const std::vector<TrackSequence>& seqs,
                  const ClassTable& classes) {
  std::ofstream out = open_out(path);
  for (const TrackSequence& seq : seqs) {
    if (seq.id.empty()) throw ValidationError("write_tracks: sequence id must be non-empty");
    for (const TrackFrame& f : seq.frames) {
      json rec = record_json(seq.id, f.frame_index, f.timestamp_us, f.ego_pose, f.cloud_path);
      json boxes = json::array();
      std::set<std::int64_t> seen;
      for (const metrics::EvalBox& e : f.boxes) {
        e.box.validate();
        if (!std::isfinite(e.score) || e.score < 0.0 || e.score > 1.0)
          throw ValidationError("write_tracks: score must be in [0, 1]");
        if (!seen.insert(e.id).second)
          throw ValidationError("write_tracks: duplicate track_id " + std::to_string(e.id) +
                                " in frame " + std::to_string(f.frame_index));
        json b = box_json(e.box, classes.name_of(e.class_id));
        b["score"] = e.score;
        b["track_id"] = e.id;
        boxes.push_back(std::move(b));
      }
      rec["boxes"] = std::move(boxes);
      out << rec.dump() << "\n";
    }
  }
  if (!out) throw ValidationError("write failed for " + path);
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  json j;
  j["v"] = kFormatVersion;
  j["command"] = manifest.command;
  j["seed"] = manifest.seed;
  j["output_dir"] = manifest.output_dir;
  j["input_paths"] = manifest.input_paths;
  j["output_paths"] = manifest.output_paths;
  j["checkpoint_paths"] = manifest.checkpoint_paths;
  j["stage_configs"] = manifest.stage_configs.is_null() ? json::object() : manifest.stage_configs;
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) throw ValidationError("write failed for " + path);
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError(path + ": invalid JSON");
  if (!j.is_object()) throw ValidationError(path + ": manifest must be a JSON object");
  check_keys(j,
             {"v", "command", "seed", "output_dir", "input_paths", "output_paths",
              "checkpoint_paths", "stage_configs"},
             {}, "manifest", path, 1);
  if (get_int(j, "v", path, 1) != kFormatVersion)
    throw ValidationError(path + ": unsupported format version");

  RunManifest m;
  m.command = get_string(j, "command", path, 1);
  if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
    throw ValidationError(path + ": seed must be an integer");
  m.seed = j.at("seed").get<std::uint64_t>();
  m.output_dir = get_string(j, "output_dir", path, 1);
  auto read_list = [&](const char* key) {
    const json& v = j.at(key);
    if (!v.is_array()) fail(path, 1, std::string("field '") + key + "' must be an array");
    std::vector<std::string> out;
    for (const json& p : v) {
      if (!p.is_string()) fail(path, 1, std::string("field '") + key + "' must hold strings");
      out.push_back(p.get<std::string>());
    }
    return out;
  };
  m.input_paths = read_list("input_paths");
  m.output_paths = read_list("output_paths");
  m.checkpoint_paths = read_list("checkpoint_paths");
  m.stage_configs = j.at("stage_configs");

  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto must_exist = [&](const std::vector<std::string>& paths) {
    for (const std::string& p : paths)
      if (!std::filesystem::exists(base / p))
        throw ValidationError(path + ": referenced path does not exist: " + p);
  };
  must_exist(m.input_paths);
  must_exist(m.output_paths);
  must_exist(m.checkpoint_paths);
  return m;
}

nlohmann::json to_json(const metrics::ClearMotResult& r) {
  json j;
  j["mota"] = r.mota ? json(*r.mota) : json();
  j["motp"] = r.motp ? json(*r.motp) : json();
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["ids"] = r.ids;
  j["frag"] = r.frag;
  j["gt_total"] = r.gt_total;
  j["mt"] = r.mt;
  j["ml"] = r.ml;
  j["pt"] = r.pt;
  j["gt_tracks"] = r.gt_tracks;
  return j;
}

nlohmann::json to_json(const metrics::AmotaResult& r, const ClassTable& classes) {
  json j;
  j["amota"] = r.amota ? json(*r.amota) : json();
  j["amotp"] = r.amotp ? json(*r.amotp) : json();
  j["diagnostic"] = r.diagnostic;
  json points = json::array();
  for (const metrics::RecallPoint& p : r.points) {
    json q;
    q["target"] = p.target;
    q["achieved"] = p.achieved;
    q["threshold"] = p.threshold;
    q["motar"] = p.motar;
    q["motp"] = p.motp;
    q["tp"] = p.tp;
    q["fp"] = p.fp;
    q["fn"] = p.fn;
    q["ids"] = p.ids;
    points.push_back(std::move(q));
  }
  j["points"] = std::move(points);
  json ca = json::object(), cp = json::object();
  for (const auto& [cls, v] : r.class_amota) ca[classes.name_of(cls)] = v;
  for (const auto& [cls, v] : r.class_amotp) cp[classes.name_of(cls)] = v;
  j["class_amota"] = std::move(ca);
  j["class_amotp"] = std::move(cp);
  return j;
}

nlohmann::json to_json(const metrics::MapResult& r, const ClassTable& classes) {
  json j;
  j["map"] = r.map ? json(*r.map) : json();
  json entries = json::array();
  for (const metrics::ApEntry& e : r.entries) {
    json q;
    q["class"] = classes.name_of(e.class_id);
    q["threshold"] = e.threshold;
    q["ap"] = e.ap;
    q["gt_count"] = e.gt_count;
    entries.push_back(std::move(q));
  }
  j["entries"] = std::move(entries);
  return j;
}

void write_report(const std::string& path, const nlohmann::json& report) {
  const std::string text = report.dump(2) + "\n";
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out = open_out(path);
  out << text;
  if (!out) throw ValidationError("write failed for " + path);
}

}  // namespace lmot::io
