#include "enlighten/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "enlighten/attention.hpp"
#include "enlighten/convert.hpp"

namespace enlighten {

namespace fs = std::filesystem;

namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

std::vector<std::string> list_images(const std::string& dir) {
  require(fs::exists(dir), ErrorCode::Io, "directory does not exist: " + dir);
  require(fs::is_directory(dir), ErrorCode::Io, "not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && has_image_extension(entry.path()))
      out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

BrightnessReport brightness_filter(const std::vector<std::string>& paths, double threshold) {
  BrightnessReport rep;
  for (const auto& p : paths) {
    ImageU8 img;
    try {
      img = load_image_u8(p);
    } catch (const Error& e) {
      rep.skipped.emplace_back(p, e.what());
      continue;
    }
    if (mean_intensity_u8(img) < threshold)
      rep.kept.push_back(p);
    else
      rep.rejected.push_back(p);
  }
  return rep;
}

Sample preprocess(const ImageU8& img, const PreprocessOptions& opt, uint64_t aug_seed) {
  require(opt.target_w >= 1 && opt.target_h >= 1, ErrorCode::InvalidArgument,
          "target dimensions must be positive");
  Image unit = to_unit(img);
  if (unit.h != opt.target_h || unit.w != opt.target_w)
    unit = bilinear_resize(unit, opt.target_h, opt.target_w);

  if (opt.augment) {
    Rng rng(aug_seed);
    if (opt.crop_size > 0) {
      require(opt.crop_size <= unit.h && opt.crop_size <= unit.w, ErrorCode::InvalidArgument,
              "crop_size exceeds the resized frame");
      int top = static_cast<int>(rng_below(rng, unit.h - opt.crop_size + 1));
      int left = static_cast<int>(rng_below(rng, unit.w - opt.crop_size + 1));
      unit = crop(unit, top, left, opt.crop_size, opt.crop_size);
    }
    if (opt.flip && rng_below(rng, 2) == 1) unit = flip_horizontal(unit);
  }

  Sample s;
  s.attention = graymap_to_tensor(attention_map(unit));
  s.image = image_to_tensor(unit_to_signed(unit));
  return s;
}

IndexStream::IndexStream(uint64_t seed, uint64_t tag, size_t n)
    : seed_(seed), tag_(tag), n_(n), cached_block_(~0ull) {}

size_t IndexStream::at(uint64_t pos) const {
  require(n_ > 0, ErrorCode::InvalidArgument, "empty dataset split");
  uint64_t block = pos / n_;
  if (block != cached_block_) {
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), size_t{0});
    Rng rng(derive_seed(seed_, tag_, block));
    for (size_t i = n_ - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(rng_below(rng, static_cast<int64_t>(i) + 1));
      std::swap(perm_[i], perm_[j]);
    }
    cached_block_ = block;
  }
  return perm_[pos % n_];
}

UnpairedDataset UnpairedDataset::open(const std::string& low_dir, const std::string& normal_dir,
                                      const PreprocessOptions& opt, uint64_t seed) {
  return UnpairedDataset(list_images(low_dir), list_images(normal_dir), opt, seed);
}

UnpairedDataset::UnpairedDataset(std::vector<std::string> low_paths,
                                 std::vector<std::string> normal_paths,
                                 const PreprocessOptions& opt, uint64_t seed)
    : low_paths_(std::move(low_paths)),
      normal_paths_(std::move(normal_paths)),
      opt_(opt),
      seed_(seed),
      low_stream_(seed, 0x1001, low_paths_.size()),
      normal_stream_(seed, 0x1002, normal_paths_.size()) {}

Batch UnpairedDataset::batch_at(uint64_t batch_index, int b) const {
  require(b >= 1, ErrorCode::InvalidArgument, "batch size must be at least 1");
  require(!low_paths_.empty(), ErrorCode::InvalidArgument, "low split is empty");
  require(!normal_paths_.empty(), ErrorCode::InvalidArgument, "normal split is empty");

  Batch out;
  std::vector<Tensor> lows, atts, normals;
  lows.reserve(b);
  atts.reserve(b);
  normals.reserve(b);
  for (int j = 0; j < b; ++j) {
    uint64_t pos = batch_index * static_cast<uint64_t>(b) + static_cast<uint64_t>(j);
    const std::string& lp = low_paths_[low_stream_.at(pos)];
    const std::string& np = normal_paths_[normal_stream_.at(pos)];
    Sample ls = preprocess(load_image_u8(lp), opt_, derive_seed(seed_, 0x2001, pos));
    Sample ns = preprocess(load_image_u8(np), opt_, derive_seed(seed_, 0x2002, pos));
    lows.push_back(ls.image);
    atts.push_back(ls.attention);
    normals.push_back(ns.image);
    out.low_paths.push_back(lp);
    out.normal_paths.push_back(np);
  }
  out.low = concat_batch(lows);
  out.low_att = concat_batch(atts);
  out.normal = concat_batch(normals);
  return out;
}

PrepareReport prepare_data(const std::string& src_dir, const std::string& out_dir,
                           double threshold, int target_w, int target_h) {
  require(target_w >= 1 && target_h >= 1, ErrorCode::InvalidArgument,
          "target dimensions must be positive");
  std::vector<std::string> paths = list_images(src_dir);

  fs::create_directories(fs::path(out_dir) / "trainA");
  fs::create_directories(fs::path(out_dir) / "trainB");

  PrepareReport rep;
  rep.manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
  std::ofstream manifest(rep.manifest_path, std::ios::trunc);
  require(manifest.good(), ErrorCode::Io, "cannot write manifest: " + rep.manifest_path);

  std::unordered_map<std::string, int> name_uses;
  for (const auto& p : paths) {
    nlohmann::json line;
    line["src"] = p;
    ImageU8 img;
    try {
      img = load_image_u8(p);
    } catch (const Error& e) {
      line["class"] = "skipped";
      line["error"] = e.what();
      manifest << line.dump() << "\n";
      ++rep.skipped;
      continue;
    }
    double mean = mean_intensity_u8(img);
    bool low = mean < threshold;

    std::string stem = fs::path(p).stem().string();
    int uses = name_uses[stem]++;
    std::string name = uses == 0 ? stem + ".png" : stem + "-" + std::to_string(uses) + ".png";
    fs::path dst = fs::path(out_dir) / (low ? "trainA" : "trainB") / name;

    Image unit = to_unit(img);
    if (unit.h != target_h || unit.w != target_w)
      unit = bilinear_resize(unit, target_h, target_w);
    save_png(dst.string(), to_u8(unit));

    line["dst"] = dst.string();
    line["mean"] = mean;
    line["class"] = low ? "low" : "normal";
    manifest << line.dump() << "\n";
    if (low)
      ++rep.low;
    else
      ++rep.normal;
  }
  manifest.close();
  return rep;
}

}  // namespace enlighten
