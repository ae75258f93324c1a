#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enlighten/config.hpp"
#include "enlighten/image.hpp"
#include "enlighten/tensor.hpp"

namespace enlighten {

// Sorted list of decodable image files (png/jpg/jpeg, case-insensitive).
std::vector<std::string> list_images(const std::string& dir);

// Partition by 8-bit mean intensity, strictly below `threshold` = kept.
// Unreadable files land in `skipped` with their error text.
struct BrightnessReport {
  std::vector<std::string> kept;
  std::vector<std::string> rejected;
  std::vector<std::pair<std::string, std::string>> skipped;  // (path, reason)
};
BrightnessReport brightness_filter(const std::vector<std::string>& paths, double threshold = 45.0);

// One decoded sample, ready for the models.
struct Sample {
  Tensor image;      // {1,3,h,w} in [-1,1]
  Tensor attention;  // {1,1,h,w} in [0,1]
};

// Geometry + augmentation settings for preprocessing.
struct PreprocessOptions {
  int target_w = 600;
  int target_h = 400;
  int crop_size = 0;   // 0 -> no crop
  bool flip = false;   // random horizontal flip
  bool augment = false;  // enables crop/flip; false -> resize only
};

// Resize, optionally crop/flip (driven by aug_seed), derive the attention
// map from the unit-range image, then shift to the signed range.
Sample preprocess(const ImageU8& img, const PreprocessOptions& opt, uint64_t aug_seed);

// Position-addressable shuffled index sequence: positions [k*n, (k+1)*n)
// traverse a fresh permutation of [0, n), so reading sequentially gives
// reshuffle-per-pass sampling with wraparound, and any position can be
// recomputed directly when resuming.
class IndexStream {
 public:
  IndexStream(uint64_t seed, uint64_t tag, size_t n);
  size_t at(uint64_t pos) const;
  size_t size() const { return n_; }

 private:
  uint64_t seed_, tag_;
  size_t n_;
  mutable uint64_t cached_block_;
  mutable std::vector<size_t> perm_;
};

// Independent low/normal batches; no pairing exists anywhere in the API.
struct Batch {
  Tensor low;      // {B,3,h,w}
  Tensor low_att;  // {B,1,h,w}
  Tensor normal;   // {B,3,h,w}
  std::vector<std::string> low_paths;
  std::vector<std::string> normal_paths;
};

class UnpairedDataset {
 public:
  // Lists both directories; empty sides are allowed here and rejected when
  // a batch is requested, so inspection tools can still open the dataset.
  static UnpairedDataset open(const std::string& low_dir, const std::string& normal_dir,
                              const PreprocessOptions& opt, uint64_t seed);
  UnpairedDataset(std::vector<std::string> low_paths, std::vector<std::string> normal_paths,
                  const PreprocessOptions& opt, uint64_t seed);

  size_t low_count() const { return low_paths_.size(); }
  size_t normal_count() const { return normal_paths_.size(); }
  const std::vector<std::string>& low_paths() const { return low_paths_; }
  const std::vector<std::string>& normal_paths() const { return normal_paths_; }

  // Assembles batch `batch_index` (0-based); sample positions advance by
  // `b` per call on each side independently.
  Batch batch_at(uint64_t batch_index, int b) const;

 private:
  std::vector<std::string> low_paths_, normal_paths_;
  PreprocessOptions opt_;
  uint64_t seed_;
  IndexStream low_stream_, normal_stream_;
};

// Resizes every readable image in src_dir into out_dir/trainA (mean < threshold)
// or out_dir/trainB, and writes out_dir/manifest.jsonl describing the split.
struct PrepareReport {
  int low = 0;
  int normal = 0;
  int skipped = 0;
  std::string manifest_path;
};
PrepareReport prepare_data(const std::string& src_dir, const std::string& out_dir,
                           double threshold, int target_w, int target_h);

}  // namespace enlighten
