#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "enlighten/image.hpp"
#include "enlighten/tensor.hpp"

namespace testutil {

// Scratch directory removed when the test scope ends.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / (tag + "-" + std::to_string(i));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Central-difference check of every leaf coordinate against the recorded
// gradients. `fwd` must be deterministic and return a scalar. Returns the
// worst relative error.
inline double max_rel_grad_err(std::vector<enlighten::Tensor>& leaves,
                               const std::function<enlighten::Tensor()>& fwd,
                               double eps = 1e-5) {
  using enlighten::NoGradGuard;
  using enlighten::Tensor;
  for (auto& l : leaves) {
    l.set_requires_grad(true);
    l.zero_grad();
  }
  Tensor loss = fwd();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto& l : leaves) analytic.push_back(l.grad());

  double worst = 0.0;
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& data = leaves[li].data();
    for (size_t i = 0; i < data.size(); ++i) {
      double orig = data[i];
      double fp, fm;
      {
        NoGradGuard ng;
        data[i] = orig + eps;
        fp = fwd().item();
        data[i] = orig - eps;
        fm = fwd().item();
      }
      data[i] = orig;
      double numeric = (fp - fm) / (2.0 * eps);
      double ana = analytic[li][i];
      double err = std::abs(numeric - ana) / std::max({1.0, std::abs(numeric), std::abs(ana)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// Uniform values in [lo, hi], reproducible across standard libraries.
inline enlighten::Tensor uniform_tensor(enlighten::Rng& rng, const enlighten::Shape4& s,
                                        double lo, double hi) {
  std::vector<double> v(static_cast<size_t>(s.numel()));
  for (double& x : v) {
    double u = static_cast<double>(enlighten::rng_below(rng, 1u << 24)) / double(1u << 24);
    x = lo + (hi - lo) * u;
  }
  return enlighten::Tensor::from_data(s, std::move(v));
}

// Deterministic textured test image: smooth gradients plus sinusoidal detail,
// so crops, filters and statistics all see non-trivial structure.
inline enlighten::ImageU8 textured_image(int h, int w, uint64_t seed, double brightness = 1.0) {
  enlighten::ImageU8 img;
  img.h = h;
  img.w = w;
  img.px.resize(static_cast<size_t>(h) * w * 3);
  enlighten::Rng rng(seed);
  double fx = 0.05 + 0.001 * static_cast<double>(enlighten::rng_below(rng, 100));
  double fy = 0.07 + 0.001 * static_cast<double>(enlighten::rng_below(rng, 100));
  double phase = 0.01 * static_cast<double>(enlighten::rng_below(rng, 628));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double base = 0.45 + 0.25 * std::sin(fx * x * (c + 1) + phase) *
                                 std::cos(fy * y + 0.4 * c) +
                      0.2 * (static_cast<double>(x + y) / (h + w));
        double noise =
            0.04 * (static_cast<double>(enlighten::rng_below(rng, 1000)) / 1000.0 - 0.5);
        double v = std::clamp((base + noise) * brightness, 0.0, 1.0);
        img.at(y, x, c) = static_cast<uint8_t>(std::lround(v * 255.0));
      }
  return img;
}

}  // namespace testutil
