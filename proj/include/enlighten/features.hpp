#pragma once

#include <string>

#include "enlighten/params.hpp"
#include "enlighten/tensor.hpp"

namespace enlighten {

struct ExtractorConfig {
  // Archive of pretrained conv weights. When empty, a deterministic
  // seeded random backbone is built instead (allow_fallback must be true);
  // a nonexistent path is always an error.
  std::string weights_path;
  bool allow_fallback = true;
  uint64_t seed = 0x7665676673ULL;
  // Channel multiplier for the fallback backbone (tests and smoke budgets);
  // pretrained weights require 1.0.
  double width_mult = 1.0;
  // Feature tap: j-th conv (post-activation) of the i-th conv stage.
  int tap_block = 5;
  int tap_conv = 1;

  void validate() const;
};

// Frozen 16-layer classification backbone (13 convs in five stages of
// 2/2/3/3/3, each 3x3 + ReLU, max-pool between stages) evaluated up to the
// configured tap. Gradients flow through inputs only.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const ExtractorConfig& cfg);

  // img: {N,3,H,W} in [-1,1]. Reflect-pads H,W to a multiple of 16, applies
  // the standard channel normalization, and returns the tap activation.
  Tensor features(const Tensor& signed_img) const;

  // Spatial dims of the tap activation for an input of the given size.
  std::pair<int, int> feature_dims(int h, int w) const;
  int feature_channels() const;

  const ExtractorConfig& config() const { return cfg_; }
  const ParamStore& params() const { return params_; }

 private:
  int scaled(int channels) const;

  ExtractorConfig cfg_;
  ParamStore params_;
};

}  // namespace enlighten
