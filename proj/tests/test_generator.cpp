#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "enlighten/attention.hpp"
#include "enlighten/convert.hpp"
#include "enlighten/generator.hpp"
#include "test_util.hpp"

using namespace enlighten;
using testutil::max_rel_grad_err;
using testutil::textured_image;
using testutil::uniform_tensor;

namespace {

GeneratorConfig toy_config() {
  GeneratorConfig cfg;
  cfg.base_channels = 4;
  cfg.depth = 1;
  return cfg;
}

Tensor toy_attention(Rng& rng, int n, int h, int w) {
  return uniform_tensor(rng, {n, 1, h, w}, 0.0, 1.0);
}

}  // namespace

TEST_CASE("config validation") {
  GeneratorConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.depth = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.depth = 9;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = GeneratorConfig{};
  cfg.base_channels = 3;  // must be even
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("parameter inventory for the default architecture") {
  Rng rng(11);
  Generator g(GeneratorConfig{}, rng);
  const auto& ps = g.params();
  // 4 encoder + 4 decoder blocks, 4 upsample convs, 1 head.
  CHECK(ps.contains("enc1.conv1.w"));
  CHECK(ps.contains("enc4.bn2.running_var"));
  CHECK(ps.contains("up4.conv.w"));
  CHECK(ps.contains("dec1.conv2.b"));
  CHECK(ps.contains("head.w"));
  CHECK(g.pad_multiple() == 16);

  // Stage widths double: enc1 32, enc2 64, enc3 128, enc4 256.
  CHECK(ps.at("enc1.conv1.w").shape() == Shape4{32, 3, 3, 3});
  CHECK(ps.at("enc2.conv1.w").shape() == Shape4{64, 32, 3, 3});
  CHECK(ps.at("enc4.conv2.w").shape() == Shape4{256, 256, 3, 3});
  // Deepest upsample halves 256 -> 128; decoder block sees skip 256 + 128.
  CHECK(ps.at("up4.conv.w").shape() == Shape4{128, 256, 3, 3});
  CHECK(ps.at("dec4.conv1.w").shape() == Shape4{256, 384, 3, 3});
  CHECK(ps.at("head.w").shape() == Shape4{3, 32, 1, 1});
}

TEST_CASE("forward preserves shape and stays inside the signed range") {
  Rng rng(12);
  GeneratorConfig cfg;
  cfg.base_channels = 4;
  cfg.depth = 2;
  Generator g(cfg, rng);
  Tensor x = uniform_tensor(rng, {2, 3, 16, 12}, -1.0, 1.0);
  Tensor att = toy_attention(rng, 2, 16, 12);
  Tensor y = g.forward(x, att, /*training=*/true);
  CHECK(y.shape() == x.shape());
  for (double v : y.data()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("zero attention makes the generator an exact identity") {
  Rng rng(13);
  GeneratorConfig cfg;
  cfg.base_channels = 4;
  cfg.depth = 2;
  Generator g(cfg, rng);
  Tensor x = uniform_tensor(rng, {1, 3, 8, 8}, -1.0, 1.0);
  Tensor att = Tensor::zeros({1, 1, 8, 8});
  Tensor y = g.forward(x, att, false);
  const auto& xv = x.data();
  const auto& yv = y.data();
  for (size_t i = 0; i < xv.size(); ++i) CHECK(yv[i] == xv[i]);  // bitwise
}

TEST_CASE("zero-initialized head leaves any input unchanged") {
  Generator g(toy_config());  // zeroed weights
  Rng rng(14);
  Tensor x = uniform_tensor(rng, {1, 3, 6, 6}, -1.0, 1.0);
  Tensor att = toy_attention(rng, 1, 6, 6);
  Tensor y = g.forward(x, att, false);
  const auto& xv = x.data();
  const auto& yv = y.data();
  for (size_t i = 0; i < xv.size(); ++i) CHECK(yv[i] == xv[i]);
}

TEST_CASE("forward rejects bad shapes and non-multiple sizes") {
  Rng rng(15);
  Generator g(toy_config(), rng);  // depth 1 -> multiple of 2
  Tensor ok = uniform_tensor(rng, {1, 3, 4, 4}, -1.0, 1.0);
  Tensor att = toy_attention(rng, 1, 4, 4);
  CHECK_NOTHROW(g.forward(ok, att, false));

  Tensor gray = uniform_tensor(rng, {1, 1, 4, 4}, -1.0, 1.0);
  CHECK_THROWS_AS(g.forward(gray, att, false), Error);

  Tensor odd = uniform_tensor(rng, {1, 3, 5, 4}, -1.0, 1.0);
  Tensor att_odd = toy_attention(rng, 1, 5, 4);
  CHECK_THROWS_AS(g.forward(odd, att_odd, false), Error);

  Tensor att_wrong = toy_attention(rng, 1, 8, 8);
  CHECK_THROWS_AS(g.forward(ok, att_wrong, false), Error);
}

TEST_CASE("same seed builds identical generators, different seeds differ") {
  GeneratorConfig cfg = toy_config();
  Rng r1(77), r2(77), r3(78);
  Generator a(cfg, r1), b(cfg, r2), c(cfg, r3);
  Rng rx(5);
  Tensor x = uniform_tensor(rx, {1, 3, 4, 4}, -1.0, 1.0);
  Tensor att = toy_attention(rx, 1, 4, 4);
  Tensor ya = a.forward(x, att, false);
  Tensor yb = b.forward(x, att, false);
  Tensor yc = c.forward(x, att, false);
  const auto& va = ya.data();
  const auto& vb = yb.data();
  const auto& vc = yc.data();
  bool all_eq = true, any_diff = false;
  for (size_t i = 0; i < va.size(); ++i) {
    all_eq &= (va[i] == vb[i]);
    any_diff |= (va[i] != vc[i]);
  }
  CHECK(all_eq);
  CHECK(any_diff);
}

TEST_CASE("analytic gradients match central differences on a tiny model") {
  GeneratorConfig cfg = toy_config();
  Rng rng(21);
  Generator g(cfg, rng);
  Tensor x = uniform_tensor(rng, {1, 3, 4, 4}, -0.8, 0.8);
  Tensor att = uniform_tensor(rng, {1, 1, 4, 4}, 0.1, 0.9);
  Tensor target = uniform_tensor(rng, {1, 3, 4, 4}, -0.5, 0.5);

  std::vector<Tensor> leaves;
  for (auto& e : g.params().entries())
    if (e.trainable) leaves.push_back(e.tensor);

  auto fwd = [&]() {
    Tensor y = g.forward(x, att, /*training=*/true);
    return mean_all(square(sub(y, target)));
  };
  // Training-mode batch norm never reads the running stats it updates, so
  // repeated forwards stay consistent for differencing.
  double err = max_rel_grad_err(leaves, fwd, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("full-image enhancement handles sizes off the stride grid") {
  Rng rng(31);
  GeneratorConfig cfg;
  cfg.base_channels = 4;
  cfg.depth = 3;  // multiple of 8
  Generator g(cfg, rng);
  ImageU8 in = textured_image(37, 61, 99, 0.35);
  ImageU8 out = enhance_image(g, in);
  CHECK(out.h == 37);
  CHECK(out.w == 61);
  ImageU8 out2 = enhance_image(g, in);
  CHECK(out.px == out2.px);  // deterministic end to end
}

TEST_CASE("conv block and upsample conv shape contracts") {
  ParamStore ps;
  Rng rng(41);
  Tensor x = uniform_tensor(rng, {1, 3, 8, 8}, -1.0, 1.0);

  // conv_block parameters are created by the generator; emulate one block.
  ParamStore tmp;
  {
    GeneratorConfig cfg = toy_config();
    Generator g(cfg, rng);
    Tensor y = conv_block(x, g.params(), "enc1.", /*training=*/false);
    CHECK(y.shape() == Shape4{1, 4, 8, 8});
    Tensor u = upsample_conv(y, g.params(), "up1.");
    CHECK(u.shape() == Shape4{1, 2, 16, 16});
  }
}
