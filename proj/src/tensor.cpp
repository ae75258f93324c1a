#include "enlighten/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <Eigen/Core>

#include "interp.hpp"

namespace enlighten {

namespace detail {

struct TensorImpl {
  Shape4 shape;
  std::vector<double> v;
  std::vector<double> g;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backprop;

  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), 0.0);
  }
};

}  // namespace detail

using detail::TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

std::string Shape4::str() const {
  return "{" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + "}";
}

namespace {

thread_local bool g_grad_enabled = true;

ImplPtr make_impl(const Shape4& s) {
  auto p = std::make_shared<TensorImpl>();
  p->shape = s;
  p->v.assign(static_cast<size_t>(s.numel()), 0.0);
  return p;
}

// Wires the graph edge only when recording is on and some input is tracked.
Tensor finish_op(ImplPtr out, std::vector<ImplPtr> parents,
                 std::function<void(TensorImpl&)> backprop) {
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& p : parents)
      if (p && p->requires_grad) track = true;
  }
  if (track) {
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backprop = std::move(backprop);
  }
  return Tensor(std::move(out));
}

inline int64_t idx4(const Shape4& s, int n, int c, int h, int w) {
  return ((static_cast<int64_t>(n) * s.c + c) * s.h + h) * s.w + w;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

}  // namespace

Tensor Tensor::zeros(const Shape4& s, bool requires_grad) {
  auto p = make_impl(s);
  p->requires_grad = requires_grad;
  return Tensor(std::move(p));
}

Tensor Tensor::full(const Shape4& s, double value, bool requires_grad) {
  auto p = make_impl(s);
  std::fill(p->v.begin(), p->v.end(), value);
  p->requires_grad = requires_grad;
  return Tensor(std::move(p));
}

Tensor Tensor::from_data(const Shape4& s, std::vector<double> data, bool requires_grad) {
  require(static_cast<int64_t>(data.size()) == s.numel(), ErrorCode::ShapeMismatch,
          "from_data: size does not match shape " + s.str());
  auto p = std::make_shared<TensorImpl>();
  p->shape = s;
  p->v = std::move(data);
  p->requires_grad = requires_grad;
  return Tensor(std::move(p));
}

Tensor Tensor::randn(Rng& rng, const Shape4& s, double stddev, bool requires_grad) {
  auto p = make_impl(s);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& x : p->v) x = dist(rng);
  p->requires_grad = requires_grad;
  return Tensor(std::move(p));
}

const Shape4& Tensor::shape() const { return impl_->shape; }
int64_t Tensor::numel() const { return impl_->shape.numel(); }
std::vector<double>& Tensor::data() { return impl_->v; }
const std::vector<double>& Tensor::data() const { return impl_->v; }

std::vector<double>& Tensor::grad() {
  impl_->ensure_grad();
  return impl_->g;
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool v) { impl_->requires_grad = v; }

void Tensor::zero_grad() {
  impl_->g.assign(impl_->v.size(), 0.0);
}

double Tensor::item() const {
  require(numel() == 1, ErrorCode::ShapeMismatch, "item() on non-scalar tensor");
  return impl_->v[0];
}

Tensor Tensor::detach() const {
  auto p = std::make_shared<TensorImpl>();
  p->shape = impl_->shape;
  p->v = impl_->v;
  return Tensor(std::move(p));
}

void Tensor::backward() const {
  require(defined(), ErrorCode::InvalidArgument, "backward on undefined tensor");
  require(numel() == 1, ErrorCode::InvalidArgument, "backward requires a scalar root");

  // Reverse topological order over the recorded graph.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::pair<TensorImpl*, size_t>> stack;
  stack.push_back({impl_.get(), 0});
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* parent = node->parents[next].get();
      ++next;
      if (parent && parent->requires_grad && !seen.count(parent)) {
        seen.insert(parent);
        stack.push_back({parent, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  impl_->ensure_grad();
  impl_->g[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->backprop) {
      node->ensure_grad();
      node->backprop(*node);
    }
  }
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// elementwise

namespace {

enum class BinKind { Add, Sub, Mul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  bool a_scalar = sa.numel() == 1;
  bool b_scalar = sb.numel() == 1;
  require(sa == sb || a_scalar || b_scalar, ErrorCode::ShapeMismatch,
          "binary op shape mismatch " + sa.str() + " vs " + sb.str());
  const Shape4& so = a_scalar ? sb : sa;
  auto out = make_impl(so);
  const auto& va = a.data();
  const auto& vb = b.data();
  size_t n = out->v.size();
  for (size_t i = 0; i < n; ++i) {
    double x = va[a_scalar ? 0 : i];
    double y = vb[b_scalar ? 0 : i];
    out->v[i] = kind == BinKind::Add ? x + y : kind == BinKind::Sub ? x - y : x * y;
  }
  ImplPtr ai = a.impl(), bi = b.impl();
  return finish_op(std::move(out), {ai, bi}, [ai, bi, a_scalar, b_scalar, kind](TensorImpl& self) {
    size_t n = self.v.size();
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (size_t i = 0; i < n; ++i) {
        double d = self.g[i];
        if (kind == BinKind::Mul) d *= bi->v[b_scalar ? 0 : i];
        ai->g[a_scalar ? 0 : i] += d;
      }
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (size_t i = 0; i < n; ++i) {
        double d = self.g[i];
        if (kind == BinKind::Mul)
          d *= ai->v[a_scalar ? 0 : i];
        else if (kind == BinKind::Sub)
          d = -d;
        bi->g[b_scalar ? 0 : i] += d;
      }
    }
  });
}

Tensor unary_op(const Tensor& a, const std::function<double(double)>& f,
                const std::function<double(double, double)>& dfdx_of_xy) {
  auto out = make_impl(a.shape());
  const auto& va = a.data();
  for (size_t i = 0; i < va.size(); ++i) out->v[i] = f(va[i]);
  ImplPtr ai = a.impl();
  return finish_op(std::move(out), {ai}, [ai, dfdx_of_xy](TensorImpl& self) {
    ai->ensure_grad();
    for (size_t i = 0; i < self.v.size(); ++i)
      ai->g[i] += self.g[i] * dfdx_of_xy(ai->v[i], self.v[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Mul); }

Tensor add_scalar(const Tensor& a, double s) {
  return unary_op(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary_op(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor square(const Tensor& a) {
  return unary_op(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor tanh_op(const Tensor& a) {
  return unary_op(a, [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary_op(a, [](double x) { return x > 0 ? x : 0.0; },
                  [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double negative_slope) {
  return unary_op(a, [negative_slope](double x) { return x > 0 ? x : negative_slope * x; },
                  [negative_slope](double x, double) { return x > 0 ? 1.0 : negative_slope; });
}

Tensor clamp_op(const Tensor& a, double lo, double hi) {
  return unary_op(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
                  [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor mul_map(const Tensor& x, const Tensor& m) {
  const Shape4& sx = x.shape();
  const Shape4& sm = m.shape();
  require(sm.n == sx.n && sm.c == 1 && sm.h == sx.h && sm.w == sx.w, ErrorCode::ShapeMismatch,
          "mul_map: map " + sm.str() + " does not gate " + sx.str());
  auto out = make_impl(sx);
  const auto& vx = x.data();
  const auto& vm = m.data();
  int64_t plane = static_cast<int64_t>(sx.h) * sx.w;
  for (int n = 0; n < sx.n; ++n)
    for (int c = 0; c < sx.c; ++c) {
      const double* mp = vm.data() + n * plane;
      const double* xp = vx.data() + (static_cast<int64_t>(n) * sx.c + c) * plane;
      double* op = out->v.data() + (static_cast<int64_t>(n) * sx.c + c) * plane;
      for (int64_t i = 0; i < plane; ++i) op[i] = xp[i] * mp[i];
    }
  ImplPtr xi = x.impl(), mi = m.impl();
  return finish_op(std::move(out), {xi, mi}, [xi, mi](TensorImpl& self) {
    const Shape4& sx = xi->shape;
    int64_t plane = static_cast<int64_t>(sx.h) * sx.w;
    if (xi->requires_grad) {
      xi->ensure_grad();
      for (int n = 0; n < sx.n; ++n)
        for (int c = 0; c < sx.c; ++c) {
          const double* mp = mi->v.data() + n * plane;
          const double* gp = self.g.data() + (static_cast<int64_t>(n) * sx.c + c) * plane;
          double* dxp = xi->g.data() + (static_cast<int64_t>(n) * sx.c + c) * plane;
          for (int64_t i = 0; i < plane; ++i) dxp[i] += gp[i] * mp[i];
        }
    }
    if (mi->requires_grad) {
      mi->ensure_grad();
      for (int n = 0; n < sx.n; ++n)
        for (int c = 0; c < sx.c; ++c) {
          const double* xp = xi->v.data() + (static_cast<int64_t>(n) * sx.c + c) * plane;
          const double* gp = self.g.data() + (static_cast<int64_t>(n) * sx.c + c) * plane;
          double* dmp = mi->g.data() + n * plane;
          for (int64_t i = 0; i < plane; ++i) dmp[i] += gp[i] * xp[i];
        }
    }
  });
}

// ---------------------------------------------------------------------------
// structure

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape4& sa = a.shape();
  const Shape4& sb = b.shape();
  require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w, ErrorCode::ShapeMismatch,
          "concat_channels: " + sa.str() + " vs " + sb.str());
  Shape4 so{sa.n, sa.c + sb.c, sa.h, sa.w};
  auto out = make_impl(so);
  int64_t plane = static_cast<int64_t>(sa.h) * sa.w;
  for (int n = 0; n < sa.n; ++n) {
    std::copy_n(a.data().data() + n * sa.c * plane, sa.c * plane,
                out->v.data() + static_cast<int64_t>(n) * so.c * plane);
    std::copy_n(b.data().data() + n * sb.c * plane, sb.c * plane,
                out->v.data() + (static_cast<int64_t>(n) * so.c + sa.c) * plane);
  }
  ImplPtr ai = a.impl(), bi = b.impl();
  return finish_op(std::move(out), {ai, bi}, [ai, bi](TensorImpl& self) {
    const Shape4& sa = ai->shape;
    const Shape4& sb = bi->shape;
    const Shape4& so = self.shape;
    int64_t plane = static_cast<int64_t>(sa.h) * sa.w;
    for (int n = 0; n < sa.n; ++n) {
      if (ai->requires_grad) {
        ai->ensure_grad();
        const double* src = self.g.data() + static_cast<int64_t>(n) * so.c * plane;
        double* dst = ai->g.data() + static_cast<int64_t>(n) * sa.c * plane;
        for (int64_t i = 0; i < sa.c * plane; ++i) dst[i] += src[i];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        const double* src = self.g.data() + (static_cast<int64_t>(n) * so.c + sa.c) * plane;
        double* dst = bi->g.data() + static_cast<int64_t>(n) * sb.c * plane;
        for (int64_t i = 0; i < sb.c * plane; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor concat_batch(const std::vector<Tensor>& parts) {
  require(!parts.empty(), ErrorCode::InvalidArgument, "concat_batch on empty list");
  const Shape4& s0 = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    const Shape4& s = p.shape();
    require(s.c == s0.c && s.h == s0.h && s.w == s0.w, ErrorCode::ShapeMismatch,
            "concat_batch: mismatched part shapes");
    total += s.n;
  }
  Shape4 so{total, s0.c, s0.h, s0.w};
  auto out = make_impl(so);
  int64_t sample = static_cast<int64_t>(s0.c) * s0.h * s0.w;
  int64_t off = 0;
  std::vector<ImplPtr> impls;
  impls.reserve(parts.size());
  for (const auto& p : parts) {
    std::copy_n(p.data().data(), p.numel(), out->v.data() + off * sample);
    off += p.shape().n;
    impls.push_back(p.impl());
  }
  return finish_op(std::move(out), impls, [impls, sample](TensorImpl& self) {
    int64_t off = 0;
    for (const auto& p : impls) {
      int64_t count = p->shape.numel();
      if (p->requires_grad) {
        p->ensure_grad();
        const double* src = self.g.data() + off * sample;
        for (int64_t i = 0; i < count; ++i) p->g[i] += src[i];
      }
      off += p->shape.n;
    }
  });
}

Tensor crop_patch(const Tensor& x, int batch_index, int top, int left, int h, int w) {
  const Shape4& s = x.shape();
  require(batch_index >= 0 && batch_index < s.n, ErrorCode::InvalidArgument,
          "crop_patch: batch index out of range");
  require(top >= 0 && left >= 0 && h >= 1 && w >= 1 && top + h <= s.h && left + w <= s.w,
          ErrorCode::InvalidArgument, "crop_patch: region outside input");
  Shape4 so{1, s.c, h, w};
  auto out = make_impl(so);
  for (int c = 0; c < s.c; ++c)
    for (int y = 0; y < h; ++y)
      std::copy_n(x.data().data() + idx4(s, batch_index, c, top + y, left), w,
                  out->v.data() + idx4(so, 0, c, y, 0));
  ImplPtr xi = x.impl();
  return finish_op(std::move(out), {xi}, [xi, batch_index, top, left](TensorImpl& self) {
    const Shape4& s = xi->shape;
    const Shape4& so = self.shape;
    xi->ensure_grad();
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < so.h; ++y) {
        const double* src = self.g.data() + idx4(so, 0, c, y, 0);
        double* dst = xi->g.data() + idx4(s, batch_index, c, top + y, left);
        for (int xw = 0; xw < so.w; ++xw) dst[xw] += src[xw];
      }
  });
}

// ---------------------------------------------------------------------------
// reductions

Tensor reduce_mean(const Tensor& x, bool over_n, bool over_c, bool over_h, bool over_w) {
  const Shape4& s = x.shape();
  Shape4 so{over_n ? 1 : s.n, over_c ? 1 : s.c, over_h ? 1 : s.h, over_w ? 1 : s.w};
  int64_t count = (over_n ? s.n : 1) * static_cast<int64_t>(over_c ? s.c : 1) *
                  (over_h ? s.h : 1) * (over_w ? s.w : 1);
  auto out = make_impl(so);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w)
          out->v[idx4(so, over_n ? 0 : n, over_c ? 0 : c, over_h ? 0 : h, over_w ? 0 : w)] +=
              x.data()[idx4(s, n, c, h, w)];
  for (double& v : out->v) v /= static_cast<double>(count);
  ImplPtr xi = x.impl();
  return finish_op(std::move(out), {xi},
                   [xi, over_n, over_c, over_h, over_w, count](TensorImpl& self) {
                     const Shape4& s = xi->shape;
                     const Shape4& so = self.shape;
                     xi->ensure_grad();
                     double inv = 1.0 / static_cast<double>(count);
                     for (int n = 0; n < s.n; ++n)
                       for (int c = 0; c < s.c; ++c)
                         for (int h = 0; h < s.h; ++h)
                           for (int w = 0; w < s.w; ++w)
                             xi->g[idx4(s, n, c, h, w)] +=
                                 inv * self.g[idx4(so, over_n ? 0 : n, over_c ? 0 : c,
                                                   over_h ? 0 : h, over_w ? 0 : w)];
                   });
}

Tensor mean_all(const Tensor& x) { return reduce_mean(x, true, true, true, true); }

Tensor sum_all(const Tensor& x) {
  return mul_scalar(mean_all(x), static_cast<double>(x.numel()));
}

Tensor reflect_pad_rb(const Tensor& x, int pad_h, int pad_w) {
  require(pad_h >= 0 && pad_w >= 0, ErrorCode::InvalidArgument, "negative padding");
  const Shape4& s = x.shape();
  if (pad_h == 0 && pad_w == 0) {
    // still participate in the graph so callers can treat this uniformly
    return add_scalar(x, 0.0);
  }
  Shape4 so{s.n, s.c, s.h + pad_h, s.w + pad_w};
  auto out = make_impl(so);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < so.h; ++h) {
        int sy = detail::reflect_index(h, s.h);
        for (int w = 0; w < so.w; ++w)
          out->v[idx4(so, n, c, h, w)] =
              x.data()[idx4(s, n, c, sy, detail::reflect_index(w, s.w))];
      }
  ImplPtr xi = x.impl();
  return finish_op(std::move(out), {xi}, [xi](TensorImpl& self) {
    const Shape4& s = xi->shape;
    const Shape4& so = self.shape;
    xi->ensure_grad();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int h = 0; h < so.h; ++h) {
          int sy = detail::reflect_index(h, s.h);
          for (int w = 0; w < so.w; ++w)
            xi->g[idx4(s, n, c, sy, detail::reflect_index(w, s.w))] +=
                self.g[idx4(so, n, c, h, w)];
        }
  });
}

// ---------------------------------------------------------------------------
// convolution

namespace {

void im2col(const double* x, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho,
            int Wo, double* col) {
  int64_t P = static_cast<int64_t>(Ho) * Wo;
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        double* row = col + ((static_cast<int64_t>(c) * kh + ky) * kw + kx) * P;
        for (int ho = 0; ho < Ho; ++ho) {
          int iy = ho * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            std::fill_n(row + static_cast<int64_t>(ho) * Wo, Wo, 0.0);
            continue;
          }
          const double* xrow = x + (static_cast<int64_t>(c) * H + iy) * W;
          double* orow = row + static_cast<int64_t>(ho) * Wo;
          for (int wo = 0; wo < Wo; ++wo) {
            int ix = wo * stride - pad + kx;
            orow[wo] = (ix >= 0 && ix < W) ? xrow[ix] : 0.0;
          }
        }
      }
}

void col2im_add(const double* col, int C, int H, int W, int kh, int kw, int stride, int pad,
                int Ho, int Wo, double* dx) {
  int64_t P = static_cast<int64_t>(Ho) * Wo;
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const double* row = col + ((static_cast<int64_t>(c) * kh + ky) * kw + kx) * P;
        for (int ho = 0; ho < Ho; ++ho) {
          int iy = ho * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          double* xrow = dx + (static_cast<int64_t>(c) * H + iy) * W;
          const double* orow = row + static_cast<int64_t>(ho) * Wo;
          for (int wo = 0; wo < Wo; ++wo) {
            int ix = wo * stride - pad + kx;
            if (ix >= 0 && ix < W) xrow[ix] += orow[wo];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const Shape4& sx = x.shape();
  const Shape4& sw = w.shape();
  require(stride >= 1 && pad >= 0, ErrorCode::InvalidArgument, "conv2d: bad stride/pad");
  require(sw.c == sx.c, ErrorCode::ShapeMismatch,
          "conv2d: input channels " + std::to_string(sx.c) + " do not match kernel " + sw.str());
  require(b.shape() == Shape4{1, sw.n, 1, 1}, ErrorCode::ShapeMismatch, "conv2d: bias shape");
  int Ho = (sx.h + 2 * pad - sw.h) / stride + 1;
  int Wo = (sx.w + 2 * pad - sw.w) / stride + 1;
  require(sx.h + 2 * pad >= sw.h && sx.w + 2 * pad >= sw.w && Ho >= 1 && Wo >= 1,
          ErrorCode::InvalidArgument,
          "conv2d: input " + sx.str() + " too small for kernel " + sw.str());

  Shape4 so{sx.n, sw.n, Ho, Wo};
  auto out = make_impl(so);
  int64_t K = static_cast<int64_t>(sx.c) * sw.h * sw.w;
  int64_t P = static_cast<int64_t>(Ho) * Wo;
  std::vector<double> col(static_cast<size_t>(K * P));
  ConstMapMat wm(w.data().data(), sw.n, K);
  for (int n = 0; n < sx.n; ++n) {
    im2col(x.data().data() + static_cast<int64_t>(n) * sx.c * sx.h * sx.w, sx.c, sx.h, sx.w, sw.h,
           sw.w, stride, pad, Ho, Wo, col.data());
    MapMat om(out->v.data() + static_cast<int64_t>(n) * sw.n * P, sw.n, P);
    ConstMapMat cm(col.data(), K, P);
    om.noalias() = wm * cm;
    for (int co = 0; co < sw.n; ++co) om.row(co).array() += b.data()[co];
  }

  ImplPtr xi = x.impl(), wi = w.impl(), bi = b.impl();
  return finish_op(std::move(out), {xi, wi, bi}, [xi, wi, bi, stride, pad](TensorImpl& self) {
    const Shape4& sx = xi->shape;
    const Shape4& sw = wi->shape;
    const Shape4& so = self.shape;
    int64_t K = static_cast<int64_t>(sx.c) * sw.h * sw.w;
    int64_t P = static_cast<int64_t>(so.h) * so.w;
    std::vector<double> col(static_cast<size_t>(K * P));
    std::vector<double> dcol;
    bool need_x = xi->requires_grad;
    bool need_w = wi->requires_grad;
    bool need_b = bi->requires_grad;
    if (need_x) {
      xi->ensure_grad();
      dcol.resize(static_cast<size_t>(K * P));
    }
    if (need_w) wi->ensure_grad();
    if (need_b) bi->ensure_grad();
    ConstMapMat wm(wi->v.data(), sw.n, K);
    for (int n = 0; n < sx.n; ++n) {
      ConstMapMat gm(self.g.data() + static_cast<int64_t>(n) * sw.n * P, sw.n, P);
      if (need_w || need_x) {
        if (need_w) {
          im2col(xi->v.data() + static_cast<int64_t>(n) * sx.c * sx.h * sx.w, sx.c, sx.h, sx.w,
                 sw.h, sw.w, stride, pad, so.h, so.w, col.data());
          ConstMapMat cm(col.data(), K, P);
          MapMat dwm(wi->g.data(), sw.n, K);
          dwm.noalias() += gm * cm.transpose();
        }
        if (need_x) {
          MapMat dcm(dcol.data(), K, P);
          dcm.noalias() = wm.transpose() * gm;
          col2im_add(dcol.data(), sx.c, sx.h, sx.w, sw.h, sw.w, stride, pad, so.h, so.w,
                     xi->g.data() + static_cast<int64_t>(n) * sx.c * sx.h * sx.w);
        }
      }
      if (need_b)
        for (int co = 0; co < sw.n; ++co) bi->g[co] += gm.row(co).sum();
    }
  });
}

// ---------------------------------------------------------------------------
// pooling / resampling

Tensor max_pool2(const Tensor& x) {
  const Shape4& s = x.shape();
  require(s.h % 2 == 0 && s.w % 2 == 0, ErrorCode::InvalidArgument,
          "max_pool2 requires even spatial dims, got " + s.str());
  Shape4 so{s.n, s.c, s.h / 2, s.w / 2};
  auto out = make_impl(so);
  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(so.numel()));
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < so.h; ++h)
        for (int w = 0; w < so.w; ++w) {
          int64_t best_idx = idx4(s, n, c, 2 * h, 2 * w);
          double best = x.data()[best_idx];
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              int64_t i = idx4(s, n, c, 2 * h + dy, 2 * w + dx);
              if (x.data()[i] > best) {
                best = x.data()[i];
                best_idx = i;
              }
            }
          int64_t o = idx4(so, n, c, h, w);
          out->v[o] = best;
          (*argmax)[o] = best_idx;
        }
  ImplPtr xi = x.impl();
  return finish_op(std::move(out), {xi}, [xi, argmax](TensorImpl& self) {
    xi->ensure_grad();
    for (size_t i = 0; i < self.g.size(); ++i) xi->g[(*argmax)[i]] += self.g[i];
  });
}

Tensor bilinear_resize(const Tensor& x, int oh, int ow) {
  require(oh >= 1 && ow >= 1, ErrorCode::InvalidArgument, "bilinear_resize: bad target size");
  const Shape4& s = x.shape();
  Shape4 so{s.n, s.c, oh, ow};
  auto out = make_impl(so);
  for (int h = 0; h < oh; ++h) {
    detail::Lerp ly = detail::lerp_at(h, oh, s.h);
    for (int w = 0; w < ow; ++w) {
      detail::Lerp lx = detail::lerp_at(w, ow, s.w);
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
          double top = x.data()[idx4(s, n, c, ly.lo, lx.lo)] * (1 - lx.t) +
                       x.data()[idx4(s, n, c, ly.lo, lx.hi)] * lx.t;
          double bot = x.data()[idx4(s, n, c, ly.hi, lx.lo)] * (1 - lx.t) +
                       x.data()[idx4(s, n, c, ly.hi, lx.hi)] * lx.t;
          out->v[idx4(so, n, c, h, w)] = top * (1 - ly.t) + bot * ly.t;
        }
    }
  }
  ImplPtr xi = x.impl();
  return finish_op(std::move(out), {xi}, [xi](TensorImpl& self) {
    const Shape4& s = xi->shape;
    const Shape4& so = self.shape;
    xi->ensure_grad();
    for (int h = 0; h < so.h; ++h) {
      detail::Lerp ly = detail::lerp_at(h, so.h, s.h);
      for (int w = 0; w < so.w; ++w) {
        detail::Lerp lx = detail::lerp_at(w, so.w, s.w);
        for (int n = 0; n < s.n; ++n)
          for (int c = 0; c < s.c; ++c) {
            double d = self.g[idx4(so, n, c, h, w)];
            xi->g[idx4(s, n, c, ly.lo, lx.lo)] += d * (1 - ly.t) * (1 - lx.t);
            xi->g[idx4(s, n, c, ly.lo, lx.hi)] += d * (1 - ly.t) * lx.t;
            xi->g[idx4(s, n, c, ly.hi, lx.lo)] += d * ly.t * (1 - lx.t);
            xi->g[idx4(s, n, c, ly.hi, lx.hi)] += d * ly.t * lx.t;
          }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// normalization

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  const Tensor& running_mean, const Tensor& running_var, bool training,
                  double momentum, double eps) {
  const Shape4& s = x.shape();
  Shape4 cs{1, s.c, 1, 1};
  require(gamma.shape() == cs && beta.shape() == cs && running_mean.shape() == cs &&
              running_var.shape() == cs,
          ErrorCode::ShapeMismatch, "batch_norm: per-channel parameter shape mismatch");

  int64_t plane = static_cast<int64_t>(s.h) * s.w;
  int64_t m = static_cast<int64_t>(s.n) * plane;
  std::vector<double> mean(s.c), var(s.c);
  if (training) {
    for (int c = 0; c < s.c; ++c) {
      double sum = 0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = x.data().data() + (static_cast<int64_t>(n) * s.c + c) * plane;
        for (int64_t i = 0; i < plane; ++i) sum += p[i];
      }
      mean[c] = sum / static_cast<double>(m);
      double sq = 0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = x.data().data() + (static_cast<int64_t>(n) * s.c + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          double d = p[i] - mean[c];
          sq += d * d;
        }
      }
      var[c] = sq / static_cast<double>(m);
    }
    // fold into running averages (biased variance, matching eval normalization)
    auto& rm = running_mean.impl()->v;
    auto& rv = running_var.impl()->v;
    for (int c = 0; c < s.c; ++c) {
      rm[c] = (1 - momentum) * rm[c] + momentum * mean[c];
      rv[c] = (1 - momentum) * rv[c] + momentum * var[c];
    }
  } else {
    for (int c = 0; c < s.c; ++c) {
      mean[c] = running_mean.data()[c];
      var[c] = running_var.data()[c];
    }
  }

  auto out = make_impl(s);
  std::vector<double> inv_std(s.c);
  for (int c = 0; c < s.c; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const double* p = x.data().data() + (static_cast<int64_t>(n) * s.c + c) * plane;
      double* o = out->v.data() + (static_cast<int64_t>(n) * s.c + c) * plane;
      double g = gamma.data()[c], b = beta.data()[c], mu = mean[c], is = inv_std[c];
      for (int64_t i = 0; i < plane; ++i) o[i] = g * (p[i] - mu) * is + b;
    }

  ImplPtr xi = x.impl(), gi = gamma.impl(), bi = beta.impl();
  auto saved_mean = std::make_shared<std::vector<double>>(std::move(mean));
  auto saved_inv_std = std::make_shared<std::vector<double>>(std::move(inv_std));
  return finish_op(
      std::move(out), {xi, gi, bi},
      [xi, gi, bi, saved_mean, saved_inv_std, training, m, plane](TensorImpl& self) {
        const Shape4& s = xi->shape;
        bool need_x = xi->requires_grad;
        bool need_g = gi->requires_grad;
        bool need_b = bi->requires_grad;
        if (need_x) xi->ensure_grad();
        if (need_g) gi->ensure_grad();
        if (need_b) bi->ensure_grad();
        for (int c = 0; c < s.c; ++c) {
          double mu = (*saved_mean)[c];
          double is = (*saved_inv_std)[c];
          double gam = gi->v[c];
          double sum_dy = 0, sum_dy_xhat = 0;
          for (int n = 0; n < s.n; ++n) {
            const double* dy = self.g.data() + (static_cast<int64_t>(n) * s.c + c) * plane;
            const double* xv = xi->v.data() + (static_cast<int64_t>(n) * s.c + c) * plane;
            for (int64_t i = 0; i < plane; ++i) {
              sum_dy += dy[i];
              sum_dy_xhat += dy[i] * (xv[i] - mu) * is;
            }
          }
          if (need_g) gi->g[c] += sum_dy_xhat;
          if (need_b) bi->g[c] += sum_dy;
          if (!need_x) continue;
          if (training) {
            double inv_m = 1.0 / static_cast<double>(m);
            for (int n = 0; n < s.n; ++n) {
              const double* dy = self.g.data() + (static_cast<int64_t>(n) * s.c + c) * plane;
              const double* xv = xi->v.data() + (static_cast<int64_t>(n) * s.c + c) * plane;
              double* dx = xi->g.data() + (static_cast<int64_t>(n) * s.c + c) * plane;
              for (int64_t i = 0; i < plane; ++i) {
                double xhat = (xv[i] - mu) * is;
                dx[i] += gam * is * (dy[i] - inv_m * sum_dy - xhat * inv_m * sum_dy_xhat);
              }
            }
          } else {
            for (int n = 0; n < s.n; ++n) {
              const double* dy = self.g.data() + (static_cast<int64_t>(n) * s.c + c) * plane;
              double* dx = xi->g.data() + (static_cast<int64_t>(n) * s.c + c) * plane;
              for (int64_t i = 0; i < plane; ++i) dx[i] += dy[i] * gam * is;
            }
          }
        }
      });
}

Tensor instance_norm(const Tensor& x, double eps) {
  const Shape4& s = x.shape();
  int64_t plane = static_cast<int64_t>(s.h) * s.w;
  require(plane >= 1, ErrorCode::InvalidArgument, "instance_norm on empty plane");
  auto out = make_impl(s);
  int groups = s.n * s.c;
  auto saved_mean = std::make_shared<std::vector<double>>(groups);
  auto saved_inv_std = std::make_shared<std::vector<double>>(groups);
  for (int g = 0; g < groups; ++g) {
    const double* p = x.data().data() + g * plane;
    double sum = 0;
    for (int64_t i = 0; i < plane; ++i) sum += p[i];
    double mu = sum / static_cast<double>(plane);
    double sq = 0;
    for (int64_t i = 0; i < plane; ++i) {
      double d = p[i] - mu;
      sq += d * d;
    }
    double is = 1.0 / std::sqrt(sq / static_cast<double>(plane) + eps);
    (*saved_mean)[g] = mu;
    (*saved_inv_std)[g] = is;
    double* o = out->v.data() + g * plane;
    for (int64_t i = 0; i < plane; ++i) o[i] = (p[i] - mu) * is;
  }
  ImplPtr xi = x.impl();
  return finish_op(std::move(out), {xi},
                   [xi, saved_mean, saved_inv_std, plane](TensorImpl& self) {
                     int groups = xi->shape.n * xi->shape.c;
                     xi->ensure_grad();
                     double inv_m = 1.0 / static_cast<double>(plane);
                     for (int g = 0; g < groups; ++g) {
                       const double* dy = self.g.data() + g * plane;
                       const double* yv = self.v.data() + g * plane;
                       double* dx = xi->g.data() + g * plane;
                       double is = (*saved_inv_std)[g];
                       double sum_dy = 0, sum_dy_y = 0;
                       for (int64_t i = 0; i < plane; ++i) {
                         sum_dy += dy[i];
                         sum_dy_y += dy[i] * yv[i];
                       }
                       for (int64_t i = 0; i < plane; ++i)
                         dx[i] += is * (dy[i] - inv_m * sum_dy - yv[i] * inv_m * sum_dy_y);
                     }
                   });
}

}  // namespace enlighten
