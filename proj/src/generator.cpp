#include "enlighten/generator.hpp"

#include "enlighten/convert.hpp"

namespace enlighten {

void GeneratorConfig::validate() const {
  require(depth >= 1 && depth <= 8, ErrorCode::InvalidArgument,
          "generator depth must be in [1,8]");
  require(base_channels >= 2 && base_channels % 2 == 0, ErrorCode::InvalidArgument,
          "generator base_channels must be even and >= 2");
}

namespace {

void add_conv(ParamStore& ps, Rng* rng, const std::string& name, int cout, int cin, int k) {
  Shape4 ws{cout, cin, k, k};
  Tensor w = rng ? Tensor::randn(*rng, ws, 0.02) : Tensor::zeros(ws);
  ps.add(name + ".w", std::move(w));
  ps.add(name + ".b", Tensor::zeros({1, cout, 1, 1}));
}

void add_bn(ParamStore& ps, const std::string& name, int c) {
  ps.add(name + ".gamma", Tensor::full({1, c, 1, 1}, 1.0));
  ps.add(name + ".beta", Tensor::zeros({1, c, 1, 1}));
  ps.add(name + ".running_mean", Tensor::zeros({1, c, 1, 1}), /*trainable=*/false);
  ps.add(name + ".running_var", Tensor::full({1, c, 1, 1}, 1.0), /*trainable=*/false);
}

void add_block(ParamStore& ps, Rng* rng, const std::string& prefix, int cin, int cout) {
  add_conv(ps, rng, prefix + "conv1", cout, cin, 3);
  add_bn(ps, prefix + "bn1", cout);
  add_conv(ps, rng, prefix + "conv2", cout, cout, 3);
  add_bn(ps, prefix + "bn2", cout);
}

Tensor bn_from_store(const Tensor& x, ParamStore& ps, const std::string& prefix, bool training) {
  return batch_norm(x, ps.at(prefix + ".gamma"), ps.at(prefix + ".beta"),
                    ps.at(prefix + ".running_mean"), ps.at(prefix + ".running_var"), training);
}

}  // namespace

Tensor conv_block(const Tensor& x, ParamStore& ps, const std::string& prefix, bool training) {
  Tensor h = conv2d(x, ps.at(prefix + "conv1.w"), ps.at(prefix + "conv1.b"), 1, 1);
  h = leaky_relu(bn_from_store(h, ps, prefix + "bn1", training), 0.2);
  h = conv2d(h, ps.at(prefix + "conv2.w"), ps.at(prefix + "conv2.b"), 1, 1);
  return leaky_relu(bn_from_store(h, ps, prefix + "bn2", training), 0.2);
}

Tensor upsample_conv(const Tensor& x, ParamStore& ps, const std::string& prefix) {
  const Shape4& s = x.shape();
  Tensor up = bilinear_resize(x, 2 * s.h, 2 * s.w);
  return conv2d(up, ps.at(prefix + "conv.w"), ps.at(prefix + "conv.b"), 1, 1);
}

Generator::Generator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) { build(&rng); }
Generator::Generator(const GeneratorConfig& cfg) : cfg_(cfg) { build(nullptr); }

void Generator::build(Rng* rng) {
  cfg_.validate();
  int d = cfg_.depth;
  auto width = [&](int stage) { return cfg_.base_channels << (stage - 1); };

  int cin = 3;
  for (int i = 1; i <= d; ++i) {
    add_block(params_, rng, "enc" + std::to_string(i) + ".", cin, width(i));
    cin = width(i);
  }
  // decoder, deepest stage first; the deepest upsample halves the bottom
  // width, later ones halve the previous decoder output
  for (int i = d; i >= 1; --i) {
    int up_in = (i == d) ? width(d) : width(i + 1);
    add_conv(params_, rng, "up" + std::to_string(i) + ".conv", up_in / 2, up_in, 3);
    int skip = width(i);
    int dec_out = (i == d) ? width(d) : width(i);
    add_block(params_, rng, "dec" + std::to_string(i) + ".", skip + up_in / 2, dec_out);
  }
  add_conv(params_, rng, "head", 3, width(1), 1);
}

Tensor Generator::forward(const Tensor& x, const Tensor& att, bool training) {
  const Shape4& s = x.shape();
  require(s.c == 3, ErrorCode::ShapeMismatch, "generator input must have 3 channels");
  require(att.shape() == Shape4{s.n, 1, s.h, s.w}, ErrorCode::ShapeMismatch,
          "attention map dims do not match input: " + att.shape().str() + " vs " + s.str());
  int mult = pad_multiple();
  require(s.h % mult == 0 && s.w % mult == 0 && s.h >= mult && s.w >= mult,
          ErrorCode::InvalidArgument,
          "generator input dims must be positive multiples of " + std::to_string(mult));
  require(params_.all_finite(), ErrorCode::Numeric, "non-finite generator parameters");

  std::vector<Tensor> skips;
  Tensor cur = x;
  for (int i = 1; i <= cfg_.depth; ++i) {
    cur = conv_block(cur, params_, "enc" + std::to_string(i) + ".", training);
    skips.push_back(cur);
    cur = max_pool2(cur);
  }
  for (int i = cfg_.depth; i >= 1; --i) {
    cur = upsample_conv(cur, params_, "up" + std::to_string(i) + ".");
    const Tensor& skip = skips[static_cast<size_t>(i - 1)];
    Tensor att_i = bilinear_resize(att, skip.shape().h, skip.shape().w);
    cur = concat_channels(mul_map(skip, att_i), cur);
    cur = conv_block(cur, params_, "dec" + std::to_string(i) + ".", training);
  }
  Tensor residual = tanh_op(conv2d(cur, params_.at("head.w"), params_.at("head.b"), 1, 0));
  return clamp_op(add(x, mul_map(residual, att)), -1.0, 1.0);
}

ImageU8 enhance_image(Generator& g, const ImageU8& input) {
  Image unit = to_unit(input);
  auto [padded, rec] = pad_to_multiple(unit, g.pad_multiple());
  AttentionMap att = attention_map(padded);
  NoGradGuard ng;
  Tensor x = image_to_tensor(unit_to_signed(padded));
  Tensor a = graymap_to_tensor(att);
  Tensor y = g.forward(x, a, /*training=*/false);
  Image out = tensor_to_image(y, Range::Signed);
  return to_u8(crop_to_record(out, rec));
}

}  // namespace enlighten
