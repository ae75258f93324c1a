#include "enlighten/niqe.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "nlohmann/json.hpp"

namespace enlighten {

namespace {

constexpr int kFeatureDim = 36;
constexpr double kAlphaGridLo = 0.2;
constexpr double kAlphaGridStep = 0.001;
constexpr int kAlphaGridCount = 9801;  // covers [0.2, 10]

double grid_alpha(int i) { return kAlphaGridLo + kAlphaGridStep * i; }

// Gamma-ratio lookup tables over the shape grid, built once.
// ggd_ratio(a)  = G(1/a) G(3/a) / G(2/a)^2   matched against E[x^2]/E[|x|]^2
// aggd_ratio(a) = G(2/a)^2 / (G(1/a) G(3/a)) matched against the asymmetry-
// corrected E[|x|]^2/E[x^2]
const std::vector<double>& ggd_ratio_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kAlphaGridCount);
    for (int i = 0; i < kAlphaGridCount; ++i) {
      double a = grid_alpha(i);
      t[i] = std::exp(std::lgamma(1.0 / a) + std::lgamma(3.0 / a) - 2.0 * std::lgamma(2.0 / a));
    }
    return t;
  }();
  return table;
}

const std::vector<double>& aggd_ratio_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kAlphaGridCount);
    const auto& ggd = ggd_ratio_table();
    for (int i = 0; i < kAlphaGridCount; ++i) t[i] = 1.0 / ggd[i];
    return t;
  }();
  return table;
}

// Normalized 1-D Gaussian taps for the 7x7 window (std 7/6); the 2-D window
// is separable so filtering runs as two 1-D passes.
const std::array<double, 7>& window_taps() {
  static const std::array<double, 7> taps = [] {
    std::array<double, 7> t{};
    const double sigma = 7.0 / 6.0;
    double sum = 0.0;
    for (int i = 0; i < 7; ++i) {
      double d = i - 3;
      t[i] = std::exp(-d * d / (2.0 * sigma * sigma));
      sum += t[i];
    }
    for (double& v : t) v /= sum;
    return t;
  }();
  return taps;
}

int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

// Separable Gaussian blur with replicate borders. Each window is evaluated
// in deviation form around its center tap (center + sum of tap-weighted
// differences), so a constant input reproduces itself bitwise and downstream
// residuals vanish exactly instead of carrying rounding dust.
GrayMap gaussian_blur(const GrayMap& m) {
  const auto& taps = window_taps();
  GrayMap tmp(m.h, m.w), out(m.h, m.w);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) {
      double center = m.at(y, x);
      double acc = 0.0;
      for (int k = -3; k <= 3; ++k)
        acc += taps[k + 3] * (m.at(y, clamp_index(x + k, m.w)) - center);
      tmp.at(y, x) = center + acc;
    }
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) {
      double center = tmp.at(y, x);
      double acc = 0.0;
      for (int k = -3; k <= 3; ++k)
        acc += taps[k + 3] * (tmp.at(clamp_index(y + k, m.h), x) - center);
      out.at(y, x) = center + acc;
    }
  return out;
}

void check_gray_dims(const GrayMap& gray) {
  require(gray.h >= 1 && gray.w >= 1, ErrorCode::InvalidArgument, "empty gray image");
  require(gray.v.size() == static_cast<size_t>(gray.h) * gray.w, ErrorCode::ShapeMismatch,
          "gray buffer does not match its dimensions");
}

// Local mean and standard deviation under the Gaussian window.
void local_moments(const GrayMap& gray, GrayMap& mu, GrayMap& sigma) {
  check_gray_dims(gray);
  mu = gaussian_blur(gray);
  GrayMap sq(gray.h, gray.w);
  for (size_t i = 0; i < gray.v.size(); ++i) sq.v[i] = gray.v[i] * gray.v[i];
  sigma = gaussian_blur(sq);
  for (size_t i = 0; i < sigma.v.size(); ++i) {
    double var = sigma.v[i] - mu.v[i] * mu.v[i];
    sigma.v[i] = std::sqrt(var > 0.0 ? var : 0.0);
  }
}

// Rec.601 luma of the 8-bit image, kept on the [0,255] scale.
GrayMap gray255(const ImageU8& img) {
  require(img.h >= 1 && img.w >= 1, ErrorCode::InvalidArgument, "empty image");
  GrayMap g(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      g.at(y, x) = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
  return g;
}

GrayMap crop_gray(const GrayMap& m, int top, int left, int size) {
  GrayMap out(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) out.at(y, x) = m.at(top + y, left + x);
  return out;
}

// Products of each coefficient with its neighbor along (dy, dx), restricted
// to positions where both pixels lie inside the patch.
std::vector<double> neighbor_products(const GrayMap& m, int dy, int dx) {
  std::vector<double> out;
  int y0 = dy < 0 ? -dy : 0, y1 = m.h - (dy > 0 ? dy : 0);
  int x0 = dx < 0 ? -dx : 0, x1 = m.w - (dx > 0 ? dx : 0);
  out.reserve(static_cast<size_t>(y1 - y0) * (x1 - x0));
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) out.push_back(m.at(y, x) * m.at(y + dy, x + dx));
  return out;
}

struct Moments {
  std::vector<double> mu;     // kFeatureDim
  std::vector<double> sigma;  // kFeatureDim^2 row-major; zero when n == 1
};

Moments feature_moments(const std::vector<std::vector<double>>& rows) {
  require(!rows.empty(), ErrorCode::InvalidArgument, "no feature rows");
  Moments m;
  m.mu.assign(kFeatureDim, 0.0);
  m.sigma.assign(static_cast<size_t>(kFeatureDim) * kFeatureDim, 0.0);
  for (const auto& r : rows) {
    require(r.size() == kFeatureDim, ErrorCode::ShapeMismatch, "feature row has wrong length");
    for (int i = 0; i < kFeatureDim; ++i) m.mu[i] += r[i];
  }
  const double n = static_cast<double>(rows.size());
  for (double& v : m.mu) v /= n;
  if (rows.size() < 2) return m;
  for (const auto& r : rows)
    for (int i = 0; i < kFeatureDim; ++i)
      for (int j = 0; j < kFeatureDim; ++j)
        m.sigma[static_cast<size_t>(i) * kFeatureDim + j] += (r[i] - m.mu[i]) * (r[j] - m.mu[j]);
  for (double& v : m.sigma) v /= (n - 1.0);
  return m;
}

constexpr char kModelMagic[8] = {'E', 'G', 'N', 'I', 'Q', 'E', '0', '1'};

void put_u32le(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64le(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

uint32_t get_u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

double get_f64le(const unsigned char* p) {
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(p[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

nlohmann::json model_meta(const NiqeModel& model) {
  return {{"kind", "niqe-model"},
          {"version", 1},
          {"patch_size", model.patch_size},
          {"scales", model.scales},
          {"sharpness_ratio", model.sharpness_ratio}};
}

void read_model_meta(const nlohmann::json& j, NiqeModel& model) {
  require(j.value("kind", std::string()) == "niqe-model", ErrorCode::Corrupt,
          "not a quality model file");
  require(j.value("version", 0) == 1, ErrorCode::Corrupt, "unsupported quality model version");
  try {
    model.patch_size = j.at("patch_size").get<int>();
    model.scales = j.at("scales").get<int>();
    model.sharpness_ratio = j.at("sharpness_ratio").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Corrupt, "quality model metadata malformed: " + std::string(e.what()));
  }
}

void atomic_write(const std::string& path, const std::string& blob) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    require(f.good(), ErrorCode::Io, "cannot open for writing: " + tmp);
    f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    require(f.good(), ErrorCode::Io, "write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::Io, "cannot move model file into place: " + path);
}

}  // namespace

void NiqeModel::validate() const {
  require(patch_size >= 32, ErrorCode::InvalidArgument, "model patch size too small");
  require(scales == 2, ErrorCode::InvalidArgument, "unsupported model scale count");
  require(sharpness_ratio > 0.0 && sharpness_ratio <= 1.0, ErrorCode::InvalidArgument,
          "model sharpness ratio outside (0, 1]");
  require(mu.size() == kFeatureDim, ErrorCode::ShapeMismatch, "model mean is not 36-dimensional");
  require(sigma.size() == static_cast<size_t>(kFeatureDim) * kFeatureDim, ErrorCode::ShapeMismatch,
          "model covariance is not 36x36");
  double scale = 0.0;
  for (double v : mu) require(std::isfinite(v), ErrorCode::Numeric, "model mean is not finite");
  for (double v : sigma) {
    require(std::isfinite(v), ErrorCode::Numeric, "model covariance is not finite");
    scale = std::max(scale, std::abs(v));
  }
  for (int i = 0; i < kFeatureDim; ++i)
    for (int j = i + 1; j < kFeatureDim; ++j) {
      double a = sigma[static_cast<size_t>(i) * kFeatureDim + j];
      double b = sigma[static_cast<size_t>(j) * kFeatureDim + i];
      require(std::abs(a - b) <= 1e-9 * std::max(scale, 1.0), ErrorCode::Corrupt,
              "model covariance is not symmetric");
    }
}

GrayMap local_deviation(const GrayMap& gray) {
  GrayMap mu, sigma;
  local_moments(gray, mu, sigma);
  return sigma;
}

GrayMap mscn(const GrayMap& gray) {
  GrayMap mu, sigma;
  local_moments(gray, mu, sigma);
  GrayMap out(gray.h, gray.w);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = (gray.v[i] - mu.v[i]) / (sigma.v[i] + 1.0);
  return out;
}

GgdFit fit_ggd(const std::vector<double>& samples) {
  require(samples.size() >= 2, ErrorCode::InvalidArgument, "need at least 2 samples");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (double v : samples) {
    abs_sum += std::abs(v);
    sq_sum += v * v;
  }
  const double n = static_cast<double>(samples.size());
  const double mean_abs = abs_sum / n, mean_sq = sq_sum / n;
  require(mean_abs > 0.0 && std::isfinite(mean_sq), ErrorCode::Numeric,
          "degenerate samples for distribution fit");

  const double rho = mean_sq / (mean_abs * mean_abs);
  const auto& table = ggd_ratio_table();
  int best = 0;
  double best_err = std::abs(table[0] - rho);
  for (int i = 1; i < kAlphaGridCount; ++i) {
    double err = std::abs(table[i] - rho);
    if (err < best_err) {
      best_err = err;
      best = i;
    }
  }
  return {grid_alpha(best), mean_sq};
}

AggdFit fit_aggd(const std::vector<double>& samples) {
  require(samples.size() >= 2, ErrorCode::InvalidArgument, "need at least 2 samples");
  double left_sq = 0.0, right_sq = 0.0, abs_sum = 0.0, sq_sum = 0.0;
  size_t left_n = 0, right_n = 0;
  for (double v : samples) {
    if (v < 0.0) {
      left_sq += v * v;
      ++left_n;
    } else if (v > 0.0) {
      right_sq += v * v;
      ++right_n;
    }
    abs_sum += std::abs(v);
    sq_sum += v * v;
  }
  require(left_n > 0 && right_n > 0 && std::isfinite(sq_sum) && sq_sum > 0.0, ErrorCode::Numeric,
          "degenerate samples for distribution fit");

  const double n = static_cast<double>(samples.size());
  const double left_std = std::sqrt(left_sq / left_n);
  const double right_std = std::sqrt(right_sq / right_n);
  const double gamma_hat = left_std / right_std;
  const double r_hat = (abs_sum / n) * (abs_sum / n) / (sq_sum / n);
  const double r_hat_norm = r_hat * (gamma_hat * gamma_hat * gamma_hat + 1.0) * (gamma_hat + 1.0) /
                            ((gamma_hat * gamma_hat + 1.0) * (gamma_hat * gamma_hat + 1.0));

  const auto& table = aggd_ratio_table();
  int best = 0;
  double best_err = (table[0] - r_hat_norm) * (table[0] - r_hat_norm);
  for (int i = 1; i < kAlphaGridCount; ++i) {
    double err = (table[i] - r_hat_norm) * (table[i] - r_hat_norm);
    if (err < best_err) {
      best_err = err;
      best = i;
    }
  }
  const double alpha = grid_alpha(best);
  const double gamma_ratio =
      std::exp(std::lgamma(2.0 / alpha) - std::lgamma(1.0 / alpha)) *
      std::sqrt(std::exp(std::lgamma(1.0 / alpha) - std::lgamma(3.0 / alpha)));
  AggdFit fit;
  fit.alpha = alpha;
  fit.mean = (right_std - left_std) * gamma_ratio;
  fit.left_variance = left_std * left_std;
  fit.right_variance = right_std * right_std;
  return fit;
}

std::vector<double> nss_features(const GrayMap& mscn_patch) {
  check_gray_dims(mscn_patch);
  std::vector<double> feat;
  feat.reserve(18);
  GgdFit g = fit_ggd(mscn_patch.v);
  feat.push_back(g.alpha);
  feat.push_back(g.variance);
  constexpr int kOrientations[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
  for (const auto& d : kOrientations) {
    AggdFit a = fit_aggd(neighbor_products(mscn_patch, d[0], d[1]));
    feat.push_back(a.alpha);
    feat.push_back(a.mean);
    feat.push_back(a.left_variance);
    feat.push_back(a.right_variance);
  }
  return feat;
}

std::vector<std::vector<double>> patch_features(const ImageU8& img, int patch_size,
                                                double sharpness_ratio) {
  require(patch_size >= 32 && patch_size % 2 == 0, ErrorCode::InvalidArgument,
          "patch size must be even and at least 32");
  require(sharpness_ratio > 0.0 && sharpness_ratio <= 1.0, ErrorCode::InvalidArgument,
          "sharpness ratio outside (0, 1]");
  require(img.h >= patch_size && img.w >= patch_size, ErrorCode::InvalidArgument,
          "image smaller than one analysis patch");

  GrayMap gray = gray255(img);
  GrayMap mu, sigma;
  local_moments(gray, mu, sigma);
  GrayMap coeffs(gray.h, gray.w);
  for (size_t i = 0; i < coeffs.v.size(); ++i)
    coeffs.v[i] = (gray.v[i] - mu.v[i]) / (sigma.v[i] + 1.0);

  const int rows = img.h / patch_size, cols = img.w / patch_size;
  const int half = patch_size / 2;
  GrayMap half_gray = bilinear_resize(gray, gray.h / 2, gray.w / 2);
  GrayMap half_coeffs = mscn(half_gray);

  // Sharpness of each candidate patch = mean local deviation at full scale.
  std::vector<double> sharpness(static_cast<size_t>(rows) * cols, 0.0);
  double max_sharpness = 0.0;
  for (int by = 0; by < rows; ++by)
    for (int bx = 0; bx < cols; ++bx) {
      double acc = 0.0;
      for (int y = 0; y < patch_size; ++y)
        for (int x = 0; x < patch_size; ++x)
          acc += sigma.at(by * patch_size + y, bx * patch_size + x);
      double s = acc / (static_cast<double>(patch_size) * patch_size);
      sharpness[static_cast<size_t>(by) * cols + bx] = s;
      max_sharpness = std::max(max_sharpness, s);
    }
  require(max_sharpness > 0.0, ErrorCode::Numeric, "no sharp patches");

  std::vector<std::vector<double>> out;
  for (int by = 0; by < rows; ++by)
    for (int bx = 0; bx < cols; ++bx) {
      if (sharpness[static_cast<size_t>(by) * cols + bx] < sharpness_ratio * max_sharpness)
        continue;
      std::vector<double> feat =
          nss_features(crop_gray(coeffs, by * patch_size, bx * patch_size, patch_size));
      std::vector<double> half_feat =
          nss_features(crop_gray(half_coeffs, by * half, bx * half, half));
      feat.insert(feat.end(), half_feat.begin(), half_feat.end());
      out.push_back(std::move(feat));
    }
  return out;
}

NiqeModel fit_pristine_model(const std::vector<std::string>& corpus_paths) {
  require(corpus_paths.size() >= 10, ErrorCode::InvalidArgument,
          "pristine corpus needs at least 10 images");
  NiqeModel model;
  std::vector<std::vector<double>> rows;
  for (const auto& path : corpus_paths) {
    auto feats = patch_features(load_image_u8(path), model.patch_size, model.sharpness_ratio);
    rows.insert(rows.end(), std::make_move_iterator(feats.begin()),
                std::make_move_iterator(feats.end()));
  }
  require(rows.size() >= 2, ErrorCode::InvalidArgument, "insufficient patches in pristine corpus");

  Moments m = feature_moments(rows);
  for (int i = 0; i < kFeatureDim; ++i) m.sigma[static_cast<size_t>(i) * kFeatureDim + i] += 1e-6;
  model.mu = std::move(m.mu);
  model.sigma = std::move(m.sigma);
  model.validate();
  return model;
}

double niqe_score(const ImageU8& img, const NiqeModel& model) {
  model.validate();
  Moments m = feature_moments(patch_features(img, model.patch_size, model.sharpness_ratio));

  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> s1(model.sigma.data(), kFeatureDim, kFeatureDim);
  Eigen::Map<const Mat> s2(m.sigma.data(), kFeatureDim, kFeatureDim);
  Eigen::VectorXd diff(kFeatureDim);
  for (int i = 0; i < kFeatureDim; ++i) diff[i] = model.mu[i] - m.mu[i];

  Mat pooled = 0.5 * (s1 + s2);
  Eigen::LDLT<Mat> ldlt(pooled);
  require(ldlt.info() == Eigen::Success, ErrorCode::Numeric,
          "singular pooled covariance in quality score");
  double q = diff.dot(ldlt.solve(diff));
  require(std::isfinite(q) && q > -1e-9, ErrorCode::Numeric,
          "singular pooled covariance in quality score");
  return std::sqrt(q > 0.0 ? q : 0.0);
}

void save_niqe_model(const std::string& path, const NiqeModel& model) {
  model.validate();
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    nlohmann::json j = model_meta(model);
    j["mu"] = model.mu;
    j["sigma"] = model.sigma;
    atomic_write(path, j.dump(2) + "\n");
    return;
  }
  std::string meta = model_meta(model).dump();
  std::string blob;
  blob.reserve(16 + meta.size() + 8 * (model.mu.size() + model.sigma.size()));
  blob.append(kModelMagic, sizeof(kModelMagic));
  put_u32le(blob, static_cast<uint32_t>(meta.size()));
  blob += meta;
  for (double v : model.mu) put_f64le(blob, v);
  for (double v : model.sigma) put_f64le(blob, v);
  atomic_write(path, blob);
}

NiqeModel load_niqe_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::Io, "cannot open: " + path);
  std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  NiqeModel model;
  if (blob.size() >= sizeof(kModelMagic) &&
      std::memcmp(blob.data(), kModelMagic, sizeof(kModelMagic)) == 0) {
    require(blob.size() >= 12, ErrorCode::Corrupt, "quality model truncated: " + path);
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
    uint32_t mlen = get_u32le(p + 8);
    require(blob.size() >= 12 + static_cast<size_t>(mlen), ErrorCode::Corrupt,
            "quality model metadata truncated: " + path);
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(blob.substr(12, mlen));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Corrupt, "quality model metadata is not valid JSON: " + std::string(e.what()));
    }
    read_model_meta(meta, model);
    const size_t values = static_cast<size_t>(kFeatureDim) * (1 + kFeatureDim);
    require(blob.size() == 12 + static_cast<size_t>(mlen) + 8 * values, ErrorCode::Corrupt,
            "quality model has wrong payload size: " + path);
    size_t off = 12 + mlen;
    model.mu.resize(kFeatureDim);
    model.sigma.resize(static_cast<size_t>(kFeatureDim) * kFeatureDim);
    for (double& v : model.mu) {
      v = get_f64le(reinterpret_cast<const unsigned char*>(blob.data()) + off);
      off += 8;
    }
    for (double& v : model.sigma) {
      v = get_f64le(reinterpret_cast<const unsigned char*>(blob.data()) + off);
      off += 8;
    }
  } else {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(blob);
    } catch (const nlohmann::json::exception&) {
      fail(ErrorCode::Corrupt, "not a quality model file: " + path);
    }
    read_model_meta(j, model);
    try {
      model.mu = j.at("mu").get<std::vector<double>>();
      model.sigma = j.at("sigma").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Corrupt, "quality model payload malformed: " + std::string(e.what()));
    }
  }
  model.validate();
  return model;
}

}  // namespace enlighten
