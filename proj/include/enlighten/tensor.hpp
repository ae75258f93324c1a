#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "enlighten/common.hpp"

namespace enlighten {

// NCHW shape; size-1 dims express vectors and scalars.
struct Shape4 {
  int n = 1, c = 1, h = 1, w = 1;

  int64_t numel() const { return static_cast<int64_t>(n) * c * h * w; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

namespace detail {
struct TensorImpl;
}

// Reverse-mode autodiff tensor. Copies share storage and graph node;
// detach() produces an untracked value copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape4& s, bool requires_grad = false);
  static Tensor full(const Shape4& s, double value, bool requires_grad = false);
  static Tensor from_data(const Shape4& s, std::vector<double> data, bool requires_grad = false);
  static Tensor randn(Rng& rng, const Shape4& s, double stddev, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape4& shape() const;
  int64_t numel() const;
  std::vector<double>& data();
  const std::vector<double>& data() const;
  std::vector<double>& grad();  // allocated (zeroed) on first access
  bool requires_grad() const;
  void set_requires_grad(bool v);
  void zero_grad();
  double item() const;
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  // Backpropagate from a scalar root; accumulates into leaf grads.
  void backward() const;

  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Scoped switch that stops graph recording (inference / frozen evaluations).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// Elementwise; shapes must match, or one side may be a scalar tensor.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor square(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double negative_slope);
Tensor clamp_op(const Tensor& a, double lo, double hi);

// x: {N,C,H,W} gated by map m: {N,1,H,W}, broadcast across channels.
Tensor mul_map(const Tensor& x, const Tensor& m);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor concat_batch(const std::vector<Tensor>& parts);
// Spatial crop of one batch element; result has n == 1.
Tensor crop_patch(const Tensor& x, int batch_index, int top, int left, int h, int w);

// Mean over the selected dims (kept as size 1).
Tensor reduce_mean(const Tensor& x, bool over_n, bool over_c, bool over_h, bool over_w);
Tensor mean_all(const Tensor& x);
Tensor sum_all(const Tensor& x);

// Symmetric reflection pad on the bottom/right edges only (the image-side
// pad_to_multiple uses the same fold, so tensors and images stay aligned).
Tensor reflect_pad_rb(const Tensor& x, int pad_h, int pad_w);

// x: {N,Cin,H,W}, w: {Cout,Cin,kh,kw}, b: {1,Cout,1,1}; zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
Tensor max_pool2(const Tensor& x);  // 2x2, stride 2; requires even dims
Tensor bilinear_resize(const Tensor& x, int oh, int ow);  // corner-aligned

// gamma/beta/running stats: {1,C,1,1}. Training mode normalizes with batch
// statistics (biased variance) and folds them into the running averages;
// eval mode reads the running averages.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  const Tensor& running_mean, const Tensor& running_var, bool training,
                  double momentum = 0.1, double eps = 1e-5);

// Per-sample, per-channel zero-mean/unit-variance (biased), no affine part.
Tensor instance_norm(const Tensor& x, double eps = 1e-5);

}  // namespace enlighten
