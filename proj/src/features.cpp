#include "enlighten/features.hpp"

#include <cmath>
#include <filesystem>

namespace enlighten {

namespace {

constexpr int kStageConvs[5] = {2, 2, 3, 3, 3};
constexpr int kStageWidth[5] = {64, 128, 256, 512, 512};
constexpr double kMean[3] = {0.485, 0.456, 0.406};
constexpr double kStd[3] = {0.229, 0.224, 0.225};

std::string conv_name(int stage, int conv) {
  return "conv" + std::to_string(stage) + "_" + std::to_string(conv);
}

}  // namespace

void ExtractorConfig::validate() const {
  require(tap_block >= 1 && tap_block <= 5, ErrorCode::InvalidArgument,
          "extractor tap_block must be in [1,5]");
  require(tap_conv >= 1 && tap_conv <= kStageConvs[tap_block - 1], ErrorCode::InvalidArgument,
          "extractor tap_conv out of range for stage " + std::to_string(tap_block));
  require(width_mult > 0.0 && width_mult <= 1.0, ErrorCode::InvalidArgument,
          "extractor width_mult must be in (0,1]");
  if (weights_path.empty())
    require(allow_fallback, ErrorCode::NotFound,
            "no extractor weights configured and the seeded fallback is disabled");
  else
    require(width_mult == 1.0, ErrorCode::InvalidArgument,
            "pretrained extractor weights require width_mult = 1");
}

int FeatureExtractor::scaled(int channels) const {
  return std::max(1, static_cast<int>(std::lround(channels * cfg_.width_mult)));
}

FeatureExtractor::FeatureExtractor(const ExtractorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  // Declare every conv up to (and including) the tap.
  Rng rng(cfg_.seed);
  int cin = 3;
  for (int stage = 1; stage <= cfg_.tap_block; ++stage) {
    int convs = (stage == cfg_.tap_block) ? cfg_.tap_conv : kStageConvs[stage - 1];
    int cout = scaled(kStageWidth[stage - 1]);
    for (int conv = 1; conv <= convs; ++conv) {
      Shape4 ws{cout, cin, 3, 3};
      // He-style scale keeps activations in a sane range for random weights
      double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * 9.0));
      params_.add(conv_name(stage, conv) + ".w", Tensor::randn(rng, ws, stddev), false);
      params_.add(conv_name(stage, conv) + ".b", Tensor::zeros({1, cout, 1, 1}), false);
      cin = cout;
    }
  }

  if (!cfg_.weights_path.empty()) {
    require(std::filesystem::exists(cfg_.weights_path), ErrorCode::Io,
            "extractor weights file not found: " + cfg_.weights_path);
    Archive a = read_archive(cfg_.weights_path);
    store_from_archive(params_, "", a);
  }
}

std::pair<int, int> FeatureExtractor::feature_dims(int h, int w) const {
  require(h >= 1 && w >= 1, ErrorCode::InvalidArgument, "empty input");
  h += (16 - h % 16) % 16;
  w += (16 - w % 16) % 16;
  int pools = cfg_.tap_block - 1;
  return {h >> pools, w >> pools};
}

int FeatureExtractor::feature_channels() const { return scaled(kStageWidth[cfg_.tap_block - 1]); }

Tensor FeatureExtractor::features(const Tensor& signed_img) const {
  const Shape4& s = signed_img.shape();
  require(s.c == 3, ErrorCode::ShapeMismatch, "extractor input must have 3 channels");

  // signed [-1,1] -> unit -> channel-standardized
  std::vector<double> shift(3), scale(3);
  for (int c = 0; c < 3; ++c) {
    // (x+1)/2 then (u - mean)/std, folded into one affine map per channel
    scale[c] = 0.5 / kStd[c];
    shift[c] = (0.5 - kMean[c]) / kStd[c];
  }
  // per-channel affine via expanded constant operands (mul/add broadcast
  // only scalars, and constants stay out of the autodiff graph anyway)
  Tensor h = signed_img;
  {
    std::vector<double> sc(static_cast<size_t>(s.numel())), sh(static_cast<size_t>(s.numel()));
    int64_t plane = static_cast<int64_t>(s.h) * s.w;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < 3; ++c) {
        std::fill_n(sc.begin() + (static_cast<int64_t>(n) * 3 + c) * plane, plane, scale[c]);
        std::fill_n(sh.begin() + (static_cast<int64_t>(n) * 3 + c) * plane, plane, shift[c]);
      }
    h = add(mul(h, Tensor::from_data(s, std::move(sc))), Tensor::from_data(s, std::move(sh)));
  }

  h = reflect_pad_rb(h, (16 - s.h % 16) % 16, (16 - s.w % 16) % 16);

  for (int stage = 1; stage <= cfg_.tap_block; ++stage) {
    if (stage > 1) h = max_pool2(h);
    int convs = (stage == cfg_.tap_block) ? cfg_.tap_conv : kStageConvs[stage - 1];
    for (int conv = 1; conv <= convs; ++conv) {
      const std::string name = conv_name(stage, conv);
      h = relu(conv2d(h, params_.at(name + ".w"), params_.at(name + ".b"), 1, 1));
    }
  }
  return h;
}

}  // namespace enlighten
