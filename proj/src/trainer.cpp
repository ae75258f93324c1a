#include "enlighten/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "enlighten/losses.hpp"

namespace enlighten {

namespace fs = std::filesystem;

namespace {

// Seed-derivation tags: one lane per random decision.
constexpr uint64_t kTagGenInit = 0xA101;
constexpr uint64_t kTagGlobalCriticInit = 0xA102;
constexpr uint64_t kTagLocalCriticInit = 0xA103;
constexpr uint64_t kTagRealPatches = 0xB101;
constexpr uint64_t kTagFakePatches = 0xB102;

PreprocessOptions preprocess_options(const TrainConfig& cfg) {
  PreprocessOptions opt;
  opt.target_w = cfg.target_w;
  opt.target_h = cfg.target_h;
  opt.crop_size = cfg.crop_size;
  opt.flip = cfg.flip;
  opt.augment = true;
  return opt;
}

Generator make_generator(const TrainConfig& cfg) {
  GeneratorConfig g;
  g.base_channels = cfg.gen_base_channels;
  g.depth = cfg.gen_depth;
  Rng rng(derive_seed(cfg.seed, kTagGenInit));
  return Generator(g, rng);
}

Critic make_critic(const TrainConfig& cfg, uint64_t tag) {
  CriticConfig c;
  c.base_channels = cfg.critic_base_channels;
  c.n_strided = cfg.critic_n_strided;
  Rng rng(derive_seed(cfg.seed, tag));
  return Critic(c, rng);
}

FeatureExtractor make_extractor(const TrainConfig& cfg) {
  ExtractorConfig e;
  e.weights_path = cfg.extractor_weights;
  e.seed = cfg.extractor_seed;
  e.width_mult = cfg.extractor_width_mult;
  return FeatureExtractor(e);
}

std::string epoch_filename(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "checkpoint-e%04d.bin", epoch);
  return buf;
}

}  // namespace

double lr_schedule(int epoch, const TrainConfig& cfg) {
  int total = cfg.epochs_const + cfg.epochs_decay;
  require(epoch >= 1 && epoch <= total, ErrorCode::InvalidArgument,
          "epoch " + std::to_string(epoch) + " outside the schedule range [1," +
              std::to_string(total) + "]");
  if (epoch <= cfg.epochs_const) return cfg.lr0;
  return cfg.lr0 * static_cast<double>(total - epoch) / static_cast<double>(cfg.epochs_decay);
}

Adam::Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(ParamStore& ps, double lr) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& e : ps.entries()) {
    if (!e.trainable) continue;
    auto& data = e.tensor.data();
    auto& grad = e.tensor.grad();  // allocated (zeroed) if backward never ran
    Moments& mom = state_[e.name];
    if (mom.m.empty()) {
      mom.m.assign(data.size(), 0.0);
      mom.v.assign(data.size(), 0.0);
    }
    for (size_t i = 0; i < data.size(); ++i) {
      double g = grad[i];
      mom.m[i] = beta1_ * mom.m[i] + (1.0 - beta1_) * g;
      mom.v[i] = beta2_ * mom.v[i] + (1.0 - beta2_) * g * g;
      double mhat = mom.m[i] / bc1;
      double vhat = mom.v[i] / bc2;
      data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::to_archive(const ParamStore& ps, const std::string& prefix, Archive& a) const {
  for (const auto& e : ps.entries()) {
    if (!e.trainable) continue;
    auto it = state_.find(e.name);
    size_t n = e.tensor.data().size();
    NamedArray m, v;
    m.name = prefix + "m." + e.name;
    v.name = prefix + "v." + e.name;
    m.shape = v.shape = e.tensor.shape();
    m.data = it != state_.end() ? it->second.m : std::vector<double>(n, 0.0);
    v.data = it != state_.end() ? it->second.v : std::vector<double>(n, 0.0);
    a.arrays.push_back(std::move(m));
    a.arrays.push_back(std::move(v));
  }
  NamedArray t;
  t.name = prefix + "t";
  t.shape = {1, 1, 1, 1};
  t.data = {static_cast<double>(t_)};
  a.arrays.push_back(std::move(t));
}

void Adam::from_archive(const ParamStore& ps, const std::string& prefix, const Archive& a) {
  state_.clear();
  size_t expected = 1;  // the step counter
  for (const auto& e : ps.entries()) {
    if (!e.trainable) continue;
    expected += 2;
    Moments mom;
    for (const char* part : {"m.", "v."}) {
      const NamedArray* arr = a.find(prefix + part + e.name);
      require(arr != nullptr, ErrorCode::Corrupt,
              "checkpoint is missing optimizer array " + prefix + part + e.name);
      require(arr->shape == e.tensor.shape(), ErrorCode::ShapeMismatch,
              "optimizer array " + arr->name + " has shape " + arr->shape.str() +
                  ", parameter expects " + e.tensor.shape().str());
      (part[0] == 'm' ? mom.m : mom.v) = arr->data;
    }
    state_[e.name] = std::move(mom);
  }
  const NamedArray* t = a.find(prefix + "t");
  require(t != nullptr && t->data.size() == 1, ErrorCode::Corrupt,
          "checkpoint is missing optimizer counter " + prefix + "t");
  t_ = static_cast<int64_t>(t->data[0]);

  size_t present = 0;
  for (const auto& arr : a.arrays)
    if (arr.name.rfind(prefix, 0) == 0) ++present;
  require(present == expected, ErrorCode::Corrupt,
          "checkpoint holds unexpected optimizer arrays under prefix " + prefix);
}

Trainer::Trainer(const TrainConfig& cfg)
    : Trainer(cfg, UnpairedDataset::open(cfg.low_dir, cfg.normal_dir, preprocess_options(cfg),
                                         cfg.seed)) {}

Trainer::Trainer(const TrainConfig& cfg, UnpairedDataset ds)
    : cfg_(cfg),
      ds_(std::move(ds)),
      gen_(make_generator(cfg)),
      d_global_(make_critic(cfg, kTagGlobalCriticInit)),
      d_local_(make_critic(cfg, kTagLocalCriticInit)),
      fx_(make_extractor(cfg)),
      adam_g_(cfg.beta1, cfg.beta2),
      adam_dg_(cfg.beta1, cfg.beta2),
      adam_dl_(cfg.beta1, cfg.beta2) {
  cfg_.validate();
  require(cfg_.patch_size >= d_local_.min_input(), ErrorCode::InvalidArgument,
          "patch_size " + std::to_string(cfg_.patch_size) +
              " is below the local critic's minimum input " +
              std::to_string(d_local_.min_input()));
  require(std::min(cfg_.train_h(), cfg_.train_w()) >= d_global_.min_input(),
          ErrorCode::InvalidArgument, "training frame is below the global critic's minimum input " +
                                          std::to_string(d_global_.min_input()));
  gen_.params().set_requires_grad(true);
  d_global_.params().set_requires_grad(true);
  d_local_.params().set_requires_grad(true);
}

Trainer::Trainer(const TrainConfig& cfg, const std::string& resume_checkpoint) : Trainer(cfg) {
  load_checkpoint_file(resume_checkpoint, /*params_only=*/false);
}

Trainer Trainer::adapt(const TrainConfig& cfg, const std::string& target_low_dir,
                       const std::string& init_checkpoint, double threshold) {
  BrightnessReport rep = brightness_filter(list_images(target_low_dir), threshold);
  require(!rep.kept.empty(), ErrorCode::InvalidArgument,
          "no images in " + target_low_dir + " fall below the brightness threshold " +
              std::to_string(threshold));
  UnpairedDataset ds(rep.kept, list_images(cfg.normal_dir), preprocess_options(cfg), cfg.seed);
  Trainer t(cfg, std::move(ds));
  if (!init_checkpoint.empty()) t.load_checkpoint_file(init_checkpoint, /*params_only=*/true);
  return t;
}

int Trainer::iters_per_epoch() const {
  return std::max<int64_t>(1, static_cast<int64_t>(ds_.low_count()) / cfg_.batch);
}

std::string Trainer::dump_diagnostics(const Batch& batch, const Tensor& fake, int epoch,
                                      int iter) const {
  Archive a;
  a.meta = {{"kind", "diagnostic-batch"},
            {"epoch", epoch},
            {"iter", iter},
            {"low_paths", batch.low_paths},
            {"normal_paths", batch.normal_paths}};
  auto push = [&a](const char* name, const Tensor& t) {
    if (!t.defined()) return;
    NamedArray arr;
    arr.name = name;
    arr.shape = t.shape();
    arr.data = t.data();
    a.arrays.push_back(std::move(arr));
  };
  push("low", batch.low);
  push("low_att", batch.low_att);
  push("normal", batch.normal);
  push("fake", fake);
  std::string path = (fs::path(cfg_.out_dir) / "diagnostic-batch.bin").string();
  fs::create_directories(cfg_.out_dir);
  write_archive(path, a);
  return path;
}

IterationMetrics Trainer::step(int epoch, int iter) {
  require(iter >= 0, ErrorCode::InvalidArgument, "iteration index must be non-negative");
  IterationMetrics out;
  out.epoch = epoch;
  out.iter = iter;
  out.lr = lr_schedule(epoch, cfg_);

  const int accum = cfg_.accum_steps;
  const double inv_accum = 1.0 / accum;
  uint64_t iter_global =
      (static_cast<uint64_t>(epoch - 1) * static_cast<uint64_t>(iters_per_epoch()) +
       static_cast<uint64_t>(iter)) *
      static_cast<uint64_t>(accum);

  struct Micro {
    Batch batch;
    Tensor fake;
    std::vector<PatchCoords> coords_real, coords_fake;
  };
  std::vector<Micro> micros(static_cast<size_t>(accum));

  auto ensure_finite = [&](double v, const char* what, const Micro& mi) {
    if (std::isfinite(v)) return;
    std::string dump = dump_diagnostics(mi.batch, mi.fake, epoch, iter);
    fail(ErrorCode::Numeric, std::string(what) + " became non-finite at epoch " +
                                 std::to_string(epoch) + " iter " + std::to_string(iter) +
                                 "; offending batch written to " + dump);
  };

  // Critic phase: both critics score real frames against detached output.
  d_global_.params().zero_grad();
  d_local_.params().zero_grad();
  for (int m = 0; m < accum; ++m) {
    Micro& mi = micros[static_cast<size_t>(m)];
    uint64_t micro_index = iter_global + static_cast<uint64_t>(m);
    mi.batch = ds_.batch_at(micro_index, cfg_.batch);
    mi.fake = gen_.forward(mi.batch.low, mi.batch.low_att, /*training=*/true);

    const Shape4& fs4 = mi.fake.shape();
    Rng rng_real(derive_seed(cfg_.seed, kTagRealPatches, micro_index));
    Rng rng_fake(derive_seed(cfg_.seed, kTagFakePatches, micro_index));
    mi.coords_real = sample_patch_coords(fs4.h, fs4.w, cfg_.patch_size,
                                         cfg_.batch * cfg_.patch_count, rng_real);
    mi.coords_fake = sample_patch_coords(fs4.h, fs4.w, cfg_.patch_size,
                                         cfg_.batch * cfg_.patch_count, rng_fake);

    Tensor fake_det = mi.fake.detach();
    Tensor s_real = score_map_mean(d_global_.forward(mi.batch.normal, true));
    Tensor s_fake = score_map_mean(d_global_.forward(fake_det, true));
    Tensor loss_g = global_d_loss(s_real, s_fake);

    Tensor real_patches =
        gather_patches(mi.batch.normal, mi.coords_real, cfg_.patch_count, cfg_.patch_size);
    Tensor fake_patches =
        gather_patches(fake_det, mi.coords_fake, cfg_.patch_count, cfg_.patch_size);
    Tensor loss_l = local_d_loss(d_local_.forward(real_patches, true),
                                 d_local_.forward(fake_patches, true));

    ensure_finite(loss_g.item(), "global critic loss", mi);
    ensure_finite(loss_l.item(), "local critic loss", mi);
    out.d_global += loss_g.item() * inv_accum;
    out.d_local += loss_l.item() * inv_accum;

    mul_scalar(add(loss_g, loss_l), inv_accum).backward();
  }
  out.d_total = out.d_global + out.d_local;
  adam_dg_.step(d_global_.params(), out.lr);
  adam_dl_.step(d_local_.params(), out.lr);

  // Generator phase against the updated critics; the cached forward graphs
  // are reused, so the generator runs once per micro-batch.
  gen_.params().zero_grad();
  for (int m = 0; m < accum; ++m) {
    Micro& mi = micros[static_cast<size_t>(m)];
    Tensor s_real = score_map_mean(d_global_.forward(mi.batch.normal, true));
    Tensor s_fake = score_map_mean(d_global_.forward(mi.fake, true));
    Tensor adv_g = global_g_loss(s_real, s_fake);

    Tensor fake_patches =
        gather_patches(mi.fake, mi.coords_fake, cfg_.patch_count, cfg_.patch_size);
    Tensor adv_l = local_g_loss(d_local_.forward(fake_patches, true));

    Tensor sfp_g = sfp_loss(fx_, mi.batch.low, mi.fake);
    Tensor low_patches =
        gather_patches(mi.batch.low, mi.coords_fake, cfg_.patch_count, cfg_.patch_size);
    Tensor sfp_l = sfp_loss(fx_, low_patches, fake_patches);

    ensure_finite(adv_g.item(), "global adversarial loss", mi);
    ensure_finite(adv_l.item(), "local adversarial loss", mi);
    ensure_finite(sfp_g.item(), "global feature-preservation loss", mi);
    ensure_finite(sfp_l.item(), "local feature-preservation loss", mi);

    Tensor total = total_g_loss(sfp_g, sfp_l, adv_g, adv_l);
    out.adv_global += adv_g.item() * inv_accum;
    out.adv_local += adv_l.item() * inv_accum;
    out.sfp_global += sfp_g.item() * inv_accum;
    out.sfp_local += sfp_l.item() * inv_accum;
    out.g_total += total.item() * inv_accum;

    mul_scalar(total, inv_accum).backward();
  }
  adam_g_.step(gen_.params(), out.lr);
  return out;
}

void Trainer::run(const ProgressFn& progress) {
  require(!cfg_.out_dir.empty(), ErrorCode::InvalidArgument, "out_dir is not set");
  fs::create_directories(cfg_.out_dir);
  std::ofstream log(fs::path(cfg_.out_dir) / "metrics.jsonl", std::ios::app);
  require(log.good(), ErrorCode::Io, "cannot open metric log in " + cfg_.out_dir);

  int total = total_epochs();
  int per_epoch = iters_per_epoch();
  for (int epoch = start_epoch_; epoch <= total; ++epoch) {
    double g_sum = 0, d_sum = 0;
    for (int it = 0; it < per_epoch; ++it) {
      IterationMetrics m = step(epoch, it);
      nlohmann::json line{{"epoch", m.epoch},
                          {"iter", m.iter},
                          {"lr", m.lr},
                          {"d_global", m.d_global},
                          {"d_local", m.d_local},
                          {"d_total", m.d_total},
                          {"adv_global", m.adv_global},
                          {"adv_local", m.adv_local},
                          {"sfp_global", m.sfp_global},
                          {"sfp_local", m.sfp_local},
                          {"g_total", m.g_total}};
      log << line.dump() << "\n";
      log.flush();
      g_sum += m.g_total;
      d_sum += m.d_total;
    }
    if (progress) progress(epoch, total, g_sum / per_epoch, d_sum / per_epoch);
    bool periodic = cfg_.checkpoint_every > 0 && epoch % cfg_.checkpoint_every == 0;
    if (periodic || epoch == total) {
      save_checkpoint((fs::path(cfg_.out_dir) / epoch_filename(epoch)).string(), epoch);
      save_checkpoint((fs::path(cfg_.out_dir) / "checkpoint-latest.bin").string(), epoch);
    }
  }
}

void Trainer::save_checkpoint(const std::string& path, int epoch) const {
  Archive a;
  a.meta = {{"kind", "checkpoint"},
            {"version", 1},
            {"epoch", epoch},
            {"config_hash", cfg_.fingerprint()},
            {"config", cfg_.to_json()}};
  store_to_archive(gen_.params(), "gen.", a);
  store_to_archive(d_global_.params(), "dglobal.", a);
  store_to_archive(d_local_.params(), "dlocal.", a);
  adam_g_.to_archive(gen_.params(), "adam_g.", a);
  adam_dg_.to_archive(d_global_.params(), "adam_dg.", a);
  adam_dl_.to_archive(d_local_.params(), "adam_dl.", a);
  write_archive(path, a);
}

void Trainer::load_checkpoint_file(const std::string& path, bool params_only) {
  Archive a = read_archive(path);
  require(a.meta.value("kind", "") == "checkpoint", ErrorCode::Corrupt,
          "not a checkpoint archive: " + path);
  require(a.meta.value("version", 0) == 1, ErrorCode::Corrupt,
          "unsupported checkpoint version in " + path);
  if (!params_only) {
    std::string have = a.meta.value("config_hash", "");
    std::string want = cfg_.fingerprint();
    require(have == want, ErrorCode::InvalidArgument,
            "configuration fingerprint mismatch: checkpoint was written with " + have +
                ", current configuration hashes to " + want);
  }
  store_from_archive(gen_.params(), "gen.", a);
  store_from_archive(d_global_.params(), "dglobal.", a);
  store_from_archive(d_local_.params(), "dlocal.", a);
  if (!params_only) {
    adam_g_.from_archive(gen_.params(), "adam_g.", a);
    adam_dg_.from_archive(d_global_.params(), "adam_dg.", a);
    adam_dl_.from_archive(d_local_.params(), "adam_dl.", a);
    int epoch = a.meta.value("epoch", 0);
    require(epoch >= 1, ErrorCode::Corrupt, "checkpoint has no valid epoch");
    start_epoch_ = epoch + 1;
  }
  // Loading replaced values only; graph flags were set at construction.
}

Generator load_generator_from_checkpoint(const std::string& path) {
  Archive a = read_archive(path);
  require(a.meta.value("kind", "") == "checkpoint", ErrorCode::Corrupt,
          "not a checkpoint archive: " + path);
  require(a.meta.value("version", 0) == 1, ErrorCode::Corrupt,
          "unsupported checkpoint version in " + path);
  require(a.meta.contains("config"), ErrorCode::Corrupt, "checkpoint lacks embedded config");
  TrainConfig cfg = TrainConfig::from_json(a.meta.at("config"));
  GeneratorConfig g;
  g.base_channels = cfg.gen_base_channels;
  g.depth = cfg.gen_depth;
  Generator gen(g);
  store_from_archive(gen.params(), "gen.", a);
  return gen;
}

}  // namespace enlighten
