// Acceptance gate: one self-contained check per release criterion, each
// printed as a single PASS/FAIL line. The binary exits zero only when every
// criterion holds. Tolerances are pinned here, next to the checks they bound.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "enlighten/ahe.hpp"
#include "enlighten/attention.hpp"
#include "enlighten/convert.hpp"
#include "enlighten/data.hpp"
#include "enlighten/discriminator.hpp"
#include "enlighten/features.hpp"
#include "enlighten/generator.hpp"
#include "enlighten/image.hpp"
#include "enlighten/losses.hpp"
#include "enlighten/niqe.hpp"
#include "enlighten/tensor.hpp"
#include "enlighten/trainer.hpp"
#include "test_util.hpp"

namespace {

using namespace enlighten;
using testutil::TempDir;
using testutil::textured_image;
using testutil::uniform_tensor;

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void require(bool ok, const std::string& detail) {
  if (!ok) throw Failure(detail);
}

void require_near(double got, double want, double tol, const std::string& what) {
  if (!(std::abs(got - want) <= tol))
    throw Failure(what + ": got " + fmt(got) + ", want " + fmt(want) + " within " + fmt(tol));
}

// ---------------------------------------------------------------------------
// Criterion 1: adversarial losses reproduce hand-computed values.

void criterion_loss_hand_values() {
  constexpr double kTol = 1e-6;
  // Relative scores +-0.5 around the opposing means.
  require_near(global_d_loss({0.75}, {0.25}), 0.5, kTol, "global critic loss on 0.75/0.25");
  require_near(global_g_loss({0.75}, {0.25}), 2.5, kTol, "global adversarial loss on 0.75/0.25");
  // Equal scores: both relative scores vanish, each loss is (0-1)^2.
  require_near(global_d_loss({0.4}, {0.4}), 1.0, kTol, "global critic loss on equal scores");
  require_near(global_g_loss({0.4}, {0.4}), 1.0, kTol, "global adversarial loss on equal scores");
  // Local patch losses score against fixed 0/1 targets.
  require_near(local_d_loss({0.5, 0.5}, {0.5}), 0.5, kTol, "local critic loss at 0.5 everywhere");
  require_near(local_g_loss({0.5}), 0.25, kTol, "local adversarial loss at 0.5");
  require_near(local_d_loss({1.0, 1.0}, {0.0, 0.0}), 0.0, kTol, "local critic loss when perfect");
  require_near(local_g_loss({0.0}), 1.0, kTol, "local adversarial loss when fully rejected");
}

// ---------------------------------------------------------------------------
// Criterion 2: the feature-preservation loss vanishes when both sides are the
// same image.

void criterion_sfp_identity() {
  constexpr double kTol = 1e-6;
  ExtractorConfig fxc;
  fxc.width_mult = 0.25;
  FeatureExtractor fx(fxc);
  Rng rng(42);
  for (int i = 0; i < 50; ++i) {
    int h = 16 + 4 * static_cast<int>(rng_below(rng, 9));
    int w = 16 + 4 * static_cast<int>(rng_below(rng, 9));
    Tensor x = uniform_tensor(rng, {1, 3, h, w}, -1.0, 1.0);
    double v = sfp_loss(fx, x, x).item();
    require(std::abs(v) <= kTol,
            "sfp(x,x) = " + fmt(v) + " on image " + std::to_string(i) + " (" +
                std::to_string(h) + "x" + std::to_string(w) + ")");
  }
}

// ---------------------------------------------------------------------------
// Criterion 3: analytic gradients of the full generator objective agree with
// central finite differences on a two-block toy at 16x16.

void criterion_gradient_check() {
  constexpr double kMaxRelErr = 1e-3;
  constexpr double kBudgetSeconds = 120.0;
  auto t0 = std::chrono::steady_clock::now();

  Rng rng(33);
  Generator gen({/*base_channels=*/4, /*depth=*/1}, rng);
  Critic d_global({/*base_channels=*/4, /*n_strided=*/1}, rng);
  Critic d_local({/*base_channels=*/4, /*n_strided=*/1}, rng);
  ExtractorConfig fxc;
  fxc.width_mult = 0.125;
  FeatureExtractor fx(fxc);

  Tensor low = uniform_tensor(rng, {1, 3, 16, 16}, -0.9, 0.9);
  Tensor att = uniform_tensor(rng, {1, 1, 16, 16}, 0.05, 0.95);
  Tensor normal = uniform_tensor(rng, {1, 3, 16, 16}, -0.5, 0.9);
  const int patch_count = 2, patch_size = 8;
  Rng patch_rng(7);
  auto coords = sample_patch_coords(16, 16, patch_size, patch_count, patch_rng);

  std::vector<Tensor> leaves;
  for (auto& e : gen.params().entries())
    if (e.trainable) leaves.push_back(e.tensor);

  auto fwd = [&]() {
    Tensor fake = gen.forward(low, att, /*training=*/true);
    Tensor s_real = score_map_mean(d_global.forward(normal, true));
    Tensor s_fake = score_map_mean(d_global.forward(fake, true));
    Tensor adv_g = global_g_loss(s_real, s_fake);
    Tensor fake_patches = gather_patches(fake, coords, patch_count, patch_size);
    Tensor adv_l = local_g_loss(d_local.forward(fake_patches, true));
    Tensor sfp_g = sfp_loss(fx, low, fake);
    Tensor low_patches = gather_patches(low, coords, patch_count, patch_size);
    Tensor sfp_l = sfp_loss(fx, low_patches, fake_patches);
    return total_g_loss(sfp_g, sfp_l, adv_g, adv_l);
  };

  // Step 1e-6: small enough that no leaky-rectifier kink falls inside the
  // central-difference window at this seed, large enough to stay clear of
  // roundoff in the double-precision pipeline.
  double err = testutil::max_rel_grad_err(leaves, fwd, 1e-6);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  require(err < kMaxRelErr, "max relative gradient error " + fmt(err) + " >= " + fmt(kMaxRelErr));
  require(secs < kBudgetSeconds, "gradient check took " + fmt(secs) + "s, budget " +
                                     fmt(kBudgetSeconds) + "s");
}

// ---------------------------------------------------------------------------
// Criterion 4: attention-map invariants on 1000 random images, and the
// zero-attention inputs pass through the generator untouched.

void criterion_attention_invariants() {
  constexpr double kComplementTol = 1e-12;
  Rng rng(4u);
  Generator gen({/*base_channels=*/4, /*depth=*/2}, rng);

  for (int i = 0; i < 1000; ++i) {
    int h = 8 + 4 * static_cast<int>(rng_below(rng, 7));
    int w = 8 + 4 * static_cast<int>(rng_below(rng, 7));
    Image img;
    img.h = h;
    img.w = w;
    img.px.resize(static_cast<size_t>(h) * w * 3);
    for (double& p : img.px)
      p = static_cast<double>(rng_below(rng, 1 << 20)) / double(1 << 20);

    GrayMap luma = luminance(img);
    AttentionMap att = attention_map(img);
    for (size_t k = 0; k < att.v.size(); ++k) {
      double a = att.v[k];
      require(a >= 0.0 && a <= 1.0,
              "attention value " + fmt(a) + " outside [0,1] on image " + std::to_string(i));
      require(std::abs(a + luma.v[k] - 1.0) <= kComplementTol,
              "attention + luminance = " + fmt(a + luma.v[k]) + " on image " + std::to_string(i));
    }

    Tensor x = uniform_tensor(rng, {1, 3, h, w}, -1.0, 1.0);
    Tensor zero_att = Tensor::zeros({1, 1, h, w});
    Tensor y = gen.forward(x, zero_att, /*training=*/false);
    require(y.data() == x.data(),
            "zero-attention forward changed the input on image " + std::to_string(i));
  }
}

// ---------------------------------------------------------------------------
// Criterion 5: the learning-rate schedule hits its milestones exactly.

void criterion_lr_schedule() {
  TrainConfig cfg;
  cfg.epochs_const = 100;
  cfg.epochs_decay = 100;
  cfg.lr0 = 1e-4;
  struct Milestone {
    int epoch;
    double lr;
  };
  for (Milestone m : {Milestone{50, 1e-4}, {100, 1e-4}, {150, 5e-5}, {200, 0.0}}) {
    double got = lr_schedule(m.epoch, cfg);
    require(got == m.lr, "lr(" + std::to_string(m.epoch) + ") = " + fmt(got) + ", want exactly " +
                             fmt(m.lr));
  }
}

// ---------------------------------------------------------------------------
// Criterion 6: the brightness filter keeps a mean-44 image on the low side
// and rejects a mean-45 image at threshold 45.

void criterion_brightness_boundary() {
  TempDir dir("accept-bright");
  auto constant = [](uint8_t v) {
    ImageU8 img;
    img.h = 48;
    img.w = 48;
    img.px.assign(static_cast<size_t>(img.h) * img.w * 3, v);
    return img;
  };
  std::filesystem::create_directories(dir.path() / "src");
  save_png((dir.path() / "src" / "m44.png").string(), constant(44));
  save_png((dir.path() / "src" / "m45.png").string(), constant(45));

  PrepareReport rep = prepare_data((dir.path() / "src").string(), (dir.path() / "data").string(),
                                   /*threshold=*/45.0, 32, 32);
  require(rep.low == 1 && rep.normal == 1 && rep.skipped == 0,
          "split " + std::to_string(rep.low) + "/" + std::to_string(rep.normal) + "/" +
              std::to_string(rep.skipped) + ", want 1 low / 1 normal / 0 skipped");
  require(std::filesystem::exists(dir.path() / "data" / "trainA" / "m44.png"),
          "mean-44 image missing from the low side");
  require(std::filesystem::exists(dir.path() / "data" / "trainB" / "m45.png"),
          "mean-45 image missing from the normal side");
}

// ---------------------------------------------------------------------------
// Shared smoke-training fixture for criteria 7, 9 and 10: 8 dark + 8 bright
// synthetic 64x64 images, 200 iterations (50 epochs x 4 iterations).

struct SmokeArtifacts {
  std::unique_ptr<TempDir> dir;
  std::unique_ptr<Trainer> trainer;
  std::vector<ImageU8> darks;
  std::vector<IterationMetrics> metrics;
  double seconds = 0;
  std::string checkpoint;
};

SmokeArtifacts& smoke_artifacts() {
  static std::optional<SmokeArtifacts> cached;
  static std::string error;
  if (!error.empty()) throw Failure("smoke fixture failed earlier: " + error);
  if (cached) return *cached;
  try {
    SmokeArtifacts a;
    a.dir = std::make_unique<TempDir>("accept-smoke");
    auto low_dir = a.dir->path() / "low";
    auto normal_dir = a.dir->path() / "normal";
    std::filesystem::create_directories(low_dir);
    std::filesystem::create_directories(normal_dir);
    for (int i = 0; i < 8; ++i) {
      ImageU8 dark = textured_image(64, 64, 500 + i, 0.15);
      a.darks.push_back(dark);
      save_png((low_dir / ("d" + std::to_string(i) + ".png")).string(), dark);
      save_png((normal_dir / ("n" + std::to_string(i) + ".png")).string(),
               textured_image(64, 64, 600 + i, 0.85));
    }

    TrainConfig cfg;
    cfg.low_dir = low_dir.string();
    cfg.normal_dir = normal_dir.string();
    cfg.out_dir = (a.dir->path() / "run").string();
    cfg.target_w = 64;
    cfg.target_h = 64;
    cfg.crop_size = 0;  // train on the full 64x64 frame
    // 50 epochs x 4 iterations = 200 iterations. At this scale the critics'
    // batch statistics absorb most of a uniform brightness shift, so the
    // surviving adversarial brightness signal is weak; an aggressive rate
    // held flat for nearly the whole run, together with a narrow feature
    // extractor (a gentler self-preservation anchor), lets the brightening
    // accumulate within the iteration budget.
    cfg.epochs_const = 49;
    cfg.epochs_decay = 1;
    cfg.lr0 = 6e-3;
    cfg.batch = 2;
    cfg.seed = 79;
    cfg.checkpoint_every = 0;
    cfg.patch_count = 5;
    cfg.patch_size = 16;
    cfg.gen_base_channels = 8;
    cfg.gen_depth = 4;
    cfg.critic_base_channels = 16;
    cfg.critic_n_strided = 2;
    cfg.extractor_width_mult = 0.03125;

    a.trainer = std::make_unique<Trainer>(cfg);
    int total = a.trainer->total_epochs();
    int per_epoch = a.trainer->iters_per_epoch();
    auto t0 = std::chrono::steady_clock::now();
    for (int epoch = 1; epoch <= total; ++epoch)
      for (int it = 0; it < per_epoch; ++it) a.metrics.push_back(a.trainer->step(epoch, it));
    a.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    a.checkpoint = (a.dir->path() / "smoke-checkpoint.bin").string();
    a.trainer->save_checkpoint(a.checkpoint, total);
    cached = std::move(a);
    return *cached;
  } catch (const std::exception& e) {
    error = e.what();
    throw Failure(error);
  }
}

// Criterion 7: the smoke run finishes 200 iterations under the CPU budget
// with finite losses and brightens the dark inputs by at least 1.2x.

void criterion_smoke_training() {
  constexpr double kBudgetSeconds = 600.0;
  constexpr double kBrightnessGain = 1.2;
  SmokeArtifacts& a = smoke_artifacts();

  require(a.metrics.size() == 200,
          "ran " + std::to_string(a.metrics.size()) + " iterations, want 200");
  require(a.seconds < kBudgetSeconds,
          "training took " + fmt(a.seconds) + "s, budget " + fmt(kBudgetSeconds) + "s");
  for (const IterationMetrics& m : a.metrics) {
    for (double v : {m.lr, m.d_global, m.d_local, m.d_total, m.adv_global, m.adv_local,
                     m.sfp_global, m.sfp_local, m.g_total})
      require(std::isfinite(v), "non-finite loss at epoch " + std::to_string(m.epoch) +
                                    " iteration " + std::to_string(m.iter));
  }

  double in_mean = 0, out_mean = 0;
  for (const ImageU8& dark : a.darks) {
    in_mean += mean_intensity_u8(dark);
    out_mean += mean_intensity_u8(enhance_image(a.trainer->generator(), dark));
  }
  double gain = out_mean / in_mean;
  require(gain >= kBrightnessGain, "mean output brightness is only " + fmt(gain) +
                                       "x the input mean, want >= " + fmt(kBrightnessGain) + "x");
}

// ---------------------------------------------------------------------------
// Shared pristine quality model for criteria 8 and 9.

struct NiqeFixture {
  std::unique_ptr<TempDir> dir;
  NiqeModel model;
};

NiqeFixture& niqe_fixture() {
  static std::optional<NiqeFixture> cached;
  if (cached) return *cached;
  NiqeFixture f;
  f.dir = std::make_unique<TempDir>("accept-niqe");
  std::vector<std::string> corpus;
  for (int i = 0; i < 12; ++i) {
    std::string path = f.dir->file("pristine" + std::to_string(i) + ".png");
    save_png(path, textured_image(128, 128, 700 + i, 0.9));
    corpus.push_back(path);
  }
  f.model = fit_pristine_model(corpus);
  cached = std::move(f);
  return *cached;
}

ImageU8 add_noise(const ImageU8& img, double sigma, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  ImageU8 out = img;
  for (uint8_t& p : out.px)
    p = static_cast<uint8_t>(std::clamp(std::lround(p + n(rng)), 0l, 255l));
  return out;
}

// Criterion 8: the quality score ranks noisy images worse for at least 9 of
// 10 photos, and the asymmetric fit recovers a Gaussian's shape parameter.

void criterion_niqe_sanity() {
  constexpr double kAlphaRelTol = 0.05;
  NiqeFixture& f = niqe_fixture();

  int ordered = 0;
  for (int i = 0; i < 10; ++i) {
    ImageU8 clean = textured_image(128, 128, 800 + i, 0.9);
    ImageU8 noisy = add_noise(clean, 25.0, 4000 + i);
    if (niqe_score(clean, f.model) < niqe_score(noisy, f.model)) ++ordered;
  }
  require(ordered >= 9, "clean image scored better on only " + std::to_string(ordered) +
                            "/10 photos, want >= 9");

  std::mt19937_64 rng(88);
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<double> samples(1000000);
  for (double& s : samples) s = n(rng);
  AggdFit fit = fit_aggd(samples);
  require(std::abs(fit.alpha - 2.0) / 2.0 <= kAlphaRelTol,
          "asymmetric fit on 1e6 Gaussian samples gave alpha = " + fmt(fit.alpha) +
              ", want 2.0 within 5%");
}

// Criterion 9: images enhanced by the smoke model score no worse than their
// dark inputs under the pristine quality model.

void criterion_niqe_ordering_after_enhancement() {
  SmokeArtifacts& a = smoke_artifacts();
  NiqeFixture& f = niqe_fixture();

  double in_sum = 0, out_sum = 0;
  const int kBatch = 6;
  for (int i = 0; i < kBatch; ++i) {
    ImageU8 dark = textured_image(128, 128, 900 + i, 0.15);
    ImageU8 enhanced = enhance_image(a.trainer->generator(), dark);
    in_sum += niqe_score(dark, f.model);
    out_sum += niqe_score(enhanced, f.model);
  }
  double in_mean = in_sum / kBatch, out_mean = out_sum / kBatch;
  require(out_mean <= in_mean, "enhanced validation batch scores " + fmt(out_mean) +
                                   ", inputs score " + fmt(in_mean) +
                                   "; enhancement must not read worse");
}

// ---------------------------------------------------------------------------
// Criterion 10: checkpoint save -> load -> forward reproduces the pre-save
// forwards bit for bit on 10 random inputs.

void criterion_checkpoint_roundtrip() {
  SmokeArtifacts& a = smoke_artifacts();
  Rng rng(1010);

  std::vector<Tensor> inputs, atts, before;
  for (int i = 0; i < 10; ++i) {
    inputs.push_back(uniform_tensor(rng, {1, 3, 64, 64}, -1.0, 1.0));
    atts.push_back(uniform_tensor(rng, {1, 1, 64, 64}, 0.0, 1.0));
    before.push_back(a.trainer->generator().forward(inputs[i], atts[i], /*training=*/false));
  }

  Generator reloaded = load_generator_from_checkpoint(a.checkpoint);
  for (int i = 0; i < 10; ++i) {
    Tensor after = reloaded.forward(inputs[i], atts[i], /*training=*/false);
    require(after.data() == before[i].data(),
            "forward after reload differs on input " + std::to_string(i));
  }
}

// ---------------------------------------------------------------------------
// Criterion 11: histogram equalization leaves constant images unchanged up to
// +-1 and every per-tile remap is monotone on random images.

void criterion_ahe_properties() {
  auto constant = [](uint8_t r, uint8_t g, uint8_t b) {
    ImageU8 img;
    img.h = 64;
    img.w = 48;
    img.px.resize(static_cast<size_t>(img.h) * img.w * 3);
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        img.at(y, x, 0) = r;
        img.at(y, x, 1) = g;
        img.at(y, x, 2) = b;
      }
    return img;
  };
  for (double clip : {0.0, 2.0}) {
    for (ImageU8 img : {constant(0, 0, 0), constant(60, 60, 60), constant(255, 255, 255),
                        constant(90, 140, 200)}) {
      ImageU8 out = ahe(img, 8, 8, clip);
      for (size_t k = 0; k < img.px.size(); ++k)
        require(std::abs(int(out.px[k]) - int(img.px[k])) <= 1,
                "constant image moved by more than 1 at byte " + std::to_string(k) +
                    " (clip " + fmt(clip) + ")");
    }
  }

  for (int s = 0; s < 5; ++s) {
    ImageU8 img = textured_image(96, 128, 1100 + s);
    for (double clip : {0.0, 2.0}) {
      auto maps = ahe_tile_maps(img, 4, 4, clip);
      for (size_t t = 0; t < maps.size(); ++t)
        for (int v = 1; v < 256; ++v)
          require(maps[t][v] >= maps[t][v - 1],
                  "tile " + std::to_string(t) + " remap decreases at value " + std::to_string(v) +
                      " (seed " + std::to_string(1100 + s) + ", clip " + fmt(clip) + ")");
    }
  }
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* label;
    std::function<void()> run;
  };
  const std::vector<Entry> entries = {
      {1, "adversarial losses match hand-computed values", criterion_loss_hand_values},
      {2, "feature-preservation loss vanishes on identical pairs", criterion_sfp_identity},
      {3, "generator objective gradients match finite differences", criterion_gradient_check},
      {4, "attention invariants and zero-attention identity", criterion_attention_invariants},
      {5, "learning-rate schedule hits exact milestones", criterion_lr_schedule},
      {6, "brightness filter boundary at the threshold", criterion_brightness_boundary},
      {7, "smoke training: 200 finite iterations brighten 1.2x in budget",
       criterion_smoke_training},
      {8, "quality score ranks noise; Gaussian shape recovered", criterion_niqe_sanity},
      {9, "enhanced validation batch scores no worse than inputs",
       criterion_niqe_ordering_after_enhancement},
      {10, "checkpoint round-trip preserves forwards bitwise", criterion_checkpoint_roundtrip},
      {11, "equalization fixed point and monotone tile remaps", criterion_ahe_properties},
  };

  int failed = 0;
  for (const Entry& e : entries) {
    auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    try {
      e.run();
    } catch (const std::exception& ex) {
      detail = ex.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (detail.empty()) {
      std::printf("PASS criterion %2d: %s (%.1fs)\n", e.id, e.label, secs);
    } else {
      std::printf("FAIL criterion %2d: %s (%.1fs) — %s\n", e.id, e.label, secs, detail.c_str());
      ++failed;
    }
    std::fflush(stdout);
  }
  if (failed == 0)
    std::printf("acceptance: all %zu criteria passed\n", entries.size());
  else
    std::printf("acceptance: %d of %zu criteria FAILED\n", failed, entries.size());
  return failed == 0 ? 0 : 1;
}
