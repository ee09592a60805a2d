// SPDX-License-Identifier: Apache-2.0
#include "lmot/core/window.hpp"

#include <algorithm>
#include <numeric>

#include "lmot/common.hpp"
#include "lmot/geom/geometry.hpp"

namespace lmot {

WindowMode parse_window_mode(const std::string& s) {
  if (s == "offline") return WindowMode::kOffline;
  if (s == "online") return WindowMode::kOnline;
  throw ValidationError("unknown window mode '" + s + "' (expected offline|online)");
}

std::string to_string(WindowMode m) {
  return m == WindowMode::kOffline ? "offline" : "online";
}

std::size_t DetectionWindow::total_detections() const {
  std::size_t n = 0;
  for (const auto& [idx, dets] : frames) n += dets.size();
  return n;
}

std::size_t DetectionWindow::key_slot() const {
  return mode == WindowMode::kOffline ? static_cast<std::size_t>(k)
                                      : static_cast<std::size_t>(2 * k);
}

DetectionWindow assemble_window(const FrameSequence& seq, int key_frame, int k,
                                WindowMode mode, std::size_t per_frame_cap) {
  if (k < 0) throw ValidationError("assemble_window: k must be non-negative");
  if (per_frame_cap == 0) throw ValidationError("assemble_window: per_frame_cap must be positive");
  if (key_frame < 0 || static_cast<std::size_t>(key_frame) >= seq.length())
    throw ValidationError("assemble_window: key frame outside sequence");

  DetectionWindow w;
  w.key_frame = key_frame;
  w.mode = mode;
  w.k = k;
  const int first = mode == WindowMode::kOffline ? key_frame - k : key_frame - 2 * k;
  w.frames.reserve(static_cast<std::size_t>(2 * k + 1));
  for (int f = first; f < first + 2 * k + 1; ++f) {
    std::vector<Detection> dets;
    if (f >= 0 && static_cast<std::size_t>(f) < seq.length()) {
      dets = seq.frames[static_cast<std::size_t>(f)].detections;
      if (dets.size() > per_frame_cap) {
        std::vector<std::size_t> order(dets.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return dets[a].score > dets[b].score;
        });
        order.resize(per_frame_cap);
        std::sort(order.begin(), order.end());  // keep original relative order
        std::vector<Detection> kept;
        kept.reserve(per_frame_cap);
        for (std::size_t i : order) kept.push_back(dets[i]);
        dets = std::move(kept);
      }
    }
    w.frames.emplace_back(f, std::move(dets));
  }
  return w;
}

DetectionWindow compensate_window(const DetectionWindow& window, const FrameSequence& seq) {
  if (window.key_frame < 0 || static_cast<std::size_t>(window.key_frame) >= seq.length())
    throw ValidationError("compensate_window: key frame outside sequence");
  const RigidTransform key_inv =
      seq.frames[static_cast<std::size_t>(window.key_frame)].ego_pose.inverse();
  DetectionWindow out = window;
  for (auto& [f, dets] : out.frames) {
    if (dets.empty()) continue;
    if (f < 0 || static_cast<std::size_t>(f) >= seq.length())
      throw ValidationError("compensate_window: detections on out-of-range frame");
    const RigidTransform rel = key_inv * seq.frames[static_cast<std::size_t>(f)].ego_pose;
    for (auto& d : dets) d.box = geom::transform_box(d.box, rel);
  }
  return out;
}

}  // namespace lmot
