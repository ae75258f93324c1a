#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "enlighten/common.hpp"

namespace enlighten {

// Flat training configuration, loadable from `key = value` text files.
struct TrainConfig {
  // Data locations and geometry.
  std::string low_dir;
  std::string normal_dir;
  std::string out_dir;
  int target_w = 600;
  int target_h = 400;
  int crop_size = 320;  // 0 trains on the full resized frame
  bool flip = true;

  // Schedule and optimizer.
  int epochs_const = 100;
  int epochs_decay = 100;
  double lr0 = 1e-4;
  int batch = 32;
  int accum_steps = 1;  // micro-batches accumulated per optimizer step
  double beta1 = 0.5;
  double beta2 = 0.999;
  uint64_t seed = 1;
  int checkpoint_every = 20;  // epochs; 0 keeps only the final checkpoint

  // Patch critic sampling.
  int patch_count = 5;
  int patch_size = 32;

  // Architectures.
  int gen_base_channels = 32;
  int gen_depth = 4;
  int critic_base_channels = 64;
  int critic_n_strided = 3;

  // Feature extractor.
  std::string extractor_weights;  // empty -> seeded fallback backbone
  uint64_t extractor_seed = 0x7665676673ULL;
  double extractor_width_mult = 1.0;

  // The spatial size training actually runs at.
  int train_h() const { return crop_size > 0 ? crop_size : target_h; }
  int train_w() const { return crop_size > 0 ? crop_size : target_w; }

  void validate() const;

  // Canonical JSON (sorted keys, every field) and a stable fingerprint of it.
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  std::string fingerprint() const;
};

// Parses `key = value` lines ('#' comments, blank lines ignored). Unknown or
// malformed keys raise errors naming the key. Validates before returning.
TrainConfig parse_config_text(const std::string& text);
TrainConfig load_config(const std::string& path);

}  // namespace enlighten
