#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "enlighten/config.hpp"
#include "enlighten/data.hpp"
#include "enlighten/discriminator.hpp"
#include "enlighten/features.hpp"
#include "enlighten/generator.hpp"

namespace enlighten {

// Piecewise-linear schedule: lr0 through the constant phase, then a straight
// line down to exactly zero at the final epoch. Epochs are 1-based.
double lr_schedule(int epoch, const TrainConfig& cfg);

// First-order adaptive optimizer with bias correction. State (first/second
// moments and the step counter) serializes next to the parameters so a
// resumed run continues the exact trajectory.
class Adam {
 public:
  Adam(double beta1, double beta2, double eps = 1e-8);

  void step(ParamStore& ps, double lr);

  void to_archive(const ParamStore& ps, const std::string& prefix, Archive& a) const;
  void from_archive(const ParamStore& ps, const std::string& prefix, const Archive& a);

  int64_t steps_taken() const { return t_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::unordered_map<std::string, Moments> state_;
};

struct IterationMetrics {
  int epoch = 0;
  int iter = 0;
  double lr = 0;
  double d_global = 0;
  double d_local = 0;
  double d_total = 0;
  double adv_global = 0;
  double adv_local = 0;
  double sfp_global = 0;
  double sfp_local = 0;
  double g_total = 0;
};

using ProgressFn = std::function<void(int epoch, int total_epochs, double g_loss, double d_loss)>;

// Alternating optimization: per iteration one critic update (both critics)
// on detached generator output, then one generator update against the just-
// updated critics. Batches, patch coordinates and augmentations are derived
// from (seed, epoch, iteration), so interrupted runs resume bit-exactly.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);
  Trainer(const TrainConfig& cfg, const std::string& resume_checkpoint);

  // Domain transfer: the low side is replaced by the target-directory images
  // that pass the brightness filter; optionally starts from the parameters
  // (not the optimizer state) of an existing checkpoint.
  static Trainer adapt(const TrainConfig& cfg, const std::string& target_low_dir,
                       const std::string& init_checkpoint = "", double threshold = 45.0);

  IterationMetrics step(int epoch, int iter);
  void run(const ProgressFn& progress = nullptr);

  void save_checkpoint(const std::string& path, int epoch) const;

  int iters_per_epoch() const;
  int total_epochs() const { return cfg_.epochs_const + cfg_.epochs_decay; }
  int start_epoch() const { return start_epoch_; }

  Generator& generator() { return gen_; }
  Critic& global_critic() { return d_global_; }
  Critic& local_critic() { return d_local_; }
  const TrainConfig& config() const { return cfg_; }
  const UnpairedDataset& dataset() const { return ds_; }

 private:
  Trainer(const TrainConfig& cfg, UnpairedDataset ds);
  void load_checkpoint_file(const std::string& path, bool params_only);
  std::string dump_diagnostics(const Batch& batch, const Tensor& fake, int epoch, int iter) const;

  TrainConfig cfg_;
  UnpairedDataset ds_;
  Generator gen_;
  Critic d_global_;
  Critic d_local_;
  FeatureExtractor fx_;
  Adam adam_g_, adam_dg_, adam_dl_;
  int start_epoch_ = 1;
};

// Rebuilds just the generator from a checkpoint (architecture comes from the
// embedded config); the inference path needs nothing else.
Generator load_generator_from_checkpoint(const std::string& path);

}  // namespace enlighten
