#pragma once

#include <string>

#include "enlighten/attention.hpp"
#include "enlighten/image.hpp"
#include "enlighten/params.hpp"
#include "enlighten/tensor.hpp"

namespace enlighten {

struct GeneratorConfig {
  int base_channels = 32;  // first-stage width; doubles per encoder stage
  int depth = 4;           // encoder/decoder stages; 2*depth conv blocks total

  void validate() const;
};

// Two (3x3 conv -> batch norm -> LeakyReLU 0.2) units whose parameters live
// under `prefix` in the store (conv1/conv2, bn1/bn2). Spatial dims preserved.
Tensor conv_block(const Tensor& x, ParamStore& ps, const std::string& prefix, bool training);

// Bilinear x2 upsample followed by a 3x3 conv that halves the channels.
Tensor upsample_conv(const Tensor& x, ParamStore& ps, const std::string& prefix);

// U-Net enhancer whose skip connections and output residual are gated by the
// illumination attention map.
class Generator {
 public:
  Generator(const GeneratorConfig& cfg, Rng& rng);  // Gaussian(0, 0.02) init
  explicit Generator(const GeneratorConfig& cfg);   // zeroed, for loading

  // x: {N,3,H,W} in [-1,1]; att: {N,1,H,W} in [0,1]. H and W must be
  // multiples of 2^depth. Output has x's shape, clamped to [-1,1].
  Tensor forward(const Tensor& x, const Tensor& att, bool training);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const GeneratorConfig& config() const { return cfg_; }
  int pad_multiple() const { return 1 << cfg_.depth; }

 private:
  void build(Rng* rng);

  GeneratorConfig cfg_;
  ParamStore params_;
};

// Full-image inference: reflect-pads to the generator's multiple, derives the
// attention map, runs in evaluation mode, restores the original frame.
ImageU8 enhance_image(Generator& g, const ImageU8& input);

}  // namespace enlighten
