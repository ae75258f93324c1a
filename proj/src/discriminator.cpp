#include "enlighten/discriminator.hpp"

namespace enlighten {

void CriticConfig::validate() const {
  require(base_channels >= 1, ErrorCode::InvalidArgument, "critic base_channels must be >= 1");
  require(n_strided >= 1 && n_strided <= 6, ErrorCode::InvalidArgument,
          "critic n_strided must be in [1,6]");
}

Critic::Critic(const CriticConfig& cfg, Rng& rng) : cfg_(cfg) { build(&rng); }
Critic::Critic(const CriticConfig& cfg) : cfg_(cfg) { build(nullptr); }

std::vector<std::pair<int, int>> Critic::layer_plan() const {
  std::vector<std::pair<int, int>> plan;
  int mult = 1;
  for (int i = 0; i < cfg_.n_strided; ++i) {
    mult = std::min(1 << i, 8);
    plan.push_back({cfg_.base_channels * mult, 2});
  }
  mult = std::min(1 << cfg_.n_strided, 8);
  plan.push_back({cfg_.base_channels * mult, 1});
  plan.push_back({1, 1});
  return plan;
}

void Critic::build(Rng* rng) {
  cfg_.validate();
  auto plan = layer_plan();
  int cin = 3;
  int idx = 1;
  for (auto [cout, stride] : plan) {
    (void)stride;
    std::string name = "conv" + std::to_string(idx);
    Shape4 ws{cout, cin, 4, 4};
    params_.add(name + ".w", rng ? Tensor::randn(*rng, ws, 0.02) : Tensor::zeros(ws));
    params_.add(name + ".b", Tensor::zeros({1, cout, 1, 1}));
    bool is_first = idx == 1;
    bool is_last = idx == static_cast<int>(plan.size());
    if (!is_first && !is_last) {
      params_.add(name + ".bn.gamma", Tensor::full({1, cout, 1, 1}, 1.0));
      params_.add(name + ".bn.beta", Tensor::zeros({1, cout, 1, 1}));
      params_.add(name + ".bn.running_mean", Tensor::zeros({1, cout, 1, 1}), false);
      params_.add(name + ".bn.running_var", Tensor::full({1, cout, 1, 1}, 1.0), false);
    }
    cin = cout;
    ++idx;
  }
}

std::pair<int, int> Critic::score_map_shape(int h, int w) const {
  for (auto [c, stride] : layer_plan()) {
    (void)c;
    h = (h + 2 - 4) / stride + 1;
    w = (w + 2 - 4) / stride + 1;
    if (h < 1 || w < 1)
      fail(ErrorCode::InvalidArgument,
           "critic input below receptive-field minimum (" + std::to_string(min_input()) +
               "), score map would be empty");
  }
  return {h, w};
}

int Critic::min_input() const {
  auto plan = layer_plan();
  for (int s = 1; s < 4096; ++s) {
    int h = s;
    bool ok = true;
    for (auto [c, stride] : plan) {
      (void)c;
      h = (h + 2 - 4) / stride + 1;
      if (h < 1) {
        ok = false;
        break;
      }
    }
    if (ok) return s;
  }
  return 4096;
}

Tensor Critic::forward(const Tensor& x, bool training) {
  const Shape4& s = x.shape();
  require(s.c == 3, ErrorCode::ShapeMismatch, "critic input must have 3 channels");
  score_map_shape(s.h, s.w);  // raises on undersized input before any work
  require(params_.all_finite(), ErrorCode::Numeric, "non-finite critic parameters");

  auto plan = layer_plan();
  Tensor h = x;
  for (size_t i = 0; i < plan.size(); ++i) {
    std::string name = "conv" + std::to_string(i + 1);
    h = conv2d(h, params_.at(name + ".w"), params_.at(name + ".b"), plan[i].second, 1);
    bool is_last = i + 1 == plan.size();
    if (is_last) break;
    if (i != 0)
      h = batch_norm(h, params_.at(name + ".bn.gamma"), params_.at(name + ".bn.beta"),
                     params_.at(name + ".bn.running_mean"), params_.at(name + ".bn.running_var"),
                     training);
    h = leaky_relu(h, 0.2);
  }
  return h;
}

std::vector<PatchCoords> sample_patch_coords(int h, int w, int size, int n, Rng& rng) {
  require(size >= 1 && n >= 1, ErrorCode::InvalidArgument, "patch size and count must be >= 1");
  require(size <= h && size <= w, ErrorCode::InvalidArgument,
          "patch size " + std::to_string(size) + " exceeds image " + std::to_string(h) + "x" +
              std::to_string(w));
  std::vector<PatchCoords> out(static_cast<size_t>(n));
  for (auto& c : out) {
    c.top = static_cast<int>(rng_below(rng, static_cast<uint64_t>(h - size + 1)));
    c.left = static_cast<int>(rng_below(rng, static_cast<uint64_t>(w - size + 1)));
  }
  return out;
}

PatchSet sample_patches(const Image& img, int n, int size, uint64_t seed) {
  Rng rng(seed);
  PatchSet set;
  set.size = size;
  set.seed_used = seed;
  set.coords = sample_patch_coords(img.h, img.w, size, n, rng);
  set.crops.reserve(set.coords.size());
  for (const auto& c : set.coords) set.crops.push_back(crop(img, c.top, c.left, size, size));
  return set;
}

Tensor gather_patches(const Tensor& imgs, const std::vector<PatchCoords>& coords, int per_image,
                      int size) {
  const Shape4& s = imgs.shape();
  require(per_image >= 1 &&
              coords.size() == static_cast<size_t>(s.n) * static_cast<size_t>(per_image),
          ErrorCode::InvalidArgument, "patch coordinate count does not match batch layout");
  std::vector<Tensor> parts;
  parts.reserve(coords.size());
  for (int n = 0; n < s.n; ++n)
    for (int k = 0; k < per_image; ++k) {
      const PatchCoords& c = coords[static_cast<size_t>(n) * per_image + k];
      parts.push_back(crop_patch(imgs, n, c.top, c.left, size, size));
    }
  return concat_batch(parts);
}

}  // namespace enlighten
