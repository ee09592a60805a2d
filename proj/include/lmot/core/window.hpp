// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lmot/core/types.hpp"

namespace lmot {

enum class WindowMode { kOffline, kOnline };

WindowMode parse_window_mode(const std::string& s);
std::string to_string(WindowMode m);

// Temporal slice of detections feeding the smoother. Offline windows cover
// key_frame-k .. key_frame+k; online windows cover key_frame-2k .. key_frame.
// Slots outside the sequence are empty. Frame indices may be out of range;
// slot order is ascending frame index.
struct DetectionWindow {
  int key_frame = 0;
  WindowMode mode = WindowMode::kOffline;
  int k = 0;
  std::vector<std::pair<int, std::vector<Detection>>> frames;

  std::size_t slot_count() const { return frames.size(); }
  std::size_t total_detections() const;
  // Position of the key frame among the slots (k for offline, 2k for online).
  std::size_t key_slot() const;
};

inline constexpr std::size_t kDefaultPerFrameCap = 512;

// Builds the 2k+1-slot window around key_frame. Frames holding more than
// per_frame_cap detections are truncated by descending score (stable on
// ties). Throws ValidationError if key_frame is outside the sequence.
DetectionWindow assemble_window(const FrameSequence& seq, int key_frame, int k,
                                WindowMode mode,
                                std::size_t per_frame_cap = kDefaultPerFrameCap);

// Re-expresses every slot's detections in the key frame's ego coordinates
// using the sequence's ego poses.
DetectionWindow compensate_window(const DetectionWindow& window,
                                  const FrameSequence& seq);

}  // namespace lmot
