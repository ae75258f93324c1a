#pragma once

#include <string>
#include <vector>

#include "enlighten/image.hpp"
#include "enlighten/params.hpp"
#include "enlighten/tensor.hpp"

namespace enlighten {

struct CriticConfig {
  int base_channels = 64;
  int n_strided = 3;  // stride-2 stages; one stride-1 stage and a 1-channel
                      // head follow (the standard patch critic schedule)

  void validate() const;
};

// Fully-convolutional patch critic: 4x4 convs, channels doubling per strided
// stage (capped at 8x base), LeakyReLU 0.2, batch norm on all but the first
// and last layers. Raw (unsquashed) score map out.
class Critic {
 public:
  Critic(const CriticConfig& cfg, Rng& rng);  // Gaussian(0, 0.02) init
  explicit Critic(const CriticConfig& cfg);   // zeroed, for loading

  // x: {N,3,H,W}; returns {N,1,h',w'}. Errors if the stage arithmetic would
  // produce an empty score map (input below the receptive-field minimum).
  Tensor forward(const Tensor& x, bool training);

  // Score-map dims for an input of the given size; same error contract.
  std::pair<int, int> score_map_shape(int h, int w) const;
  // Smallest square input that yields a non-empty score map.
  int min_input() const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const CriticConfig& config() const { return cfg_; }

 private:
  void build(Rng* rng);
  std::vector<std::pair<int, int>> layer_plan() const;  // (out_channels, stride)

  CriticConfig cfg_;
  ParamStore params_;
};

// Top-left corner of one crop, plus the crop extent.
struct PatchCoords {
  int top = 0, left = 0;
};

// A sampled set of same-size crops from one image, with provenance.
struct PatchSet {
  int size = 0;
  uint64_t seed_used = 0;
  std::vector<PatchCoords> coords;
  std::vector<Image> crops;
};

// Uniform over valid top-left positions; every crop lies fully inside.
std::vector<PatchCoords> sample_patch_coords(int h, int w, int size, int n, Rng& rng);

// Image-level sampler (records crops and coordinates for reproducibility).
PatchSet sample_patches(const Image& img, int n, int size, uint64_t seed);

// Tensor-level gather: crops `per_image` patches from every batch element
// using coords laid out image-major; result batch is N*per_image.
Tensor gather_patches(const Tensor& imgs, const std::vector<PatchCoords>& coords, int per_image,
                      int size);

}  // namespace enlighten
