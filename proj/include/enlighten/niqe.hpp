#pragma once

#include <string>
#include <vector>

#include "enlighten/image.hpp"

namespace enlighten {

// Natural-scene-statistics quality model: mean vector and covariance of
// 36-dimensional patch feature vectors gathered from pristine photographs.
// Smaller distances to this distribution mean more natural-looking images.
struct NiqeModel {
  int patch_size = 96;           // square patch edge at full scale
  int scales = 2;                // feature pyramid depth (fixed at 2)
  double sharpness_ratio = 0.75; // keep patches >= ratio * max sharpness
  std::vector<double> mu;        // 36 feature means
  std::vector<double> sigma;     // 36x36 covariance, row-major

  // Throws unless dimensions, symmetry and finiteness all hold.
  void validate() const;
};

// Generalized Gaussian fit of zero-mean samples (moment matching over a
// shape grid alpha in [0.2, 10], step 0.001).
struct GgdFit {
  double alpha = 0.0;     // shape
  double variance = 0.0;  // mean of squared samples
};

// Asymmetric generalized Gaussian fit: separate left/right spread around
// zero plus the distribution mean implied by the asymmetry.
struct AggdFit {
  double alpha = 0.0;
  double mean = 0.0;
  double left_variance = 0.0;   // mean square of the negative samples
  double right_variance = 0.0;  // mean square of the positive samples
};

// Locally mean-subtracted, contrast-normalized coefficients of a gray image
// on the [0,255] scale: (I - mu) / (sigma + 1), where mu and sigma are
// Gaussian-weighted local moments (7x7 window, std 7/6, replicate border).
GrayMap mscn(const GrayMap& gray);

// The local standard-deviation field from the same windowed moments. Its
// per-patch mean is the sharpness measure used to select analysis patches.
GrayMap local_deviation(const GrayMap& gray);

GgdFit fit_ggd(const std::vector<double>& samples);
AggdFit fit_aggd(const std::vector<double>& samples);

// 18 statistics of one MSCN patch: GGD shape/variance of the coefficients
// followed by AGGD (shape, mean, left/right variance) of the four
// neighboring-pixel products (horizontal, vertical, both diagonals).
std::vector<double> nss_features(const GrayMap& mscn_patch);

// Tiles the image into patch_size x patch_size regions, keeps the ones whose
// sharpness reaches sharpness_ratio times the sharpest, and returns one
// 36-dim vector per kept patch (18 features at full scale + 18 from the
// bilinear half-scale patch covering the same region).
std::vector<std::vector<double>> patch_features(const ImageU8& img, int patch_size = 96,
                                                double sharpness_ratio = 0.75);

// Fits mu/sigma over every kept patch of every corpus image. Requires at
// least 10 images; sigma is regularized with +1e-6 on the diagonal so a
// rank-deficient corpus still yields an invertible model.
NiqeModel fit_pristine_model(const std::vector<std::string>& corpus_paths);

// Distance between the image's feature distribution and the pristine model:
// sqrt((mu1-mu2)^T ((sigma1+sigma2)/2)^-1 (mu1-mu2)). Lower is better.
double niqe_score(const ImageU8& img, const NiqeModel& model);

// Model persistence. Paths ending in ".json" use a structured-text format;
// anything else uses a flat binary container (magic "EGNIQE01", then a
// little-endian u32 metadata length, the metadata JSON, and mu followed by
// row-major sigma as little-endian IEEE-754 doubles). Loading sniffs the
// format from the file contents, not the extension.
void save_niqe_model(const std::string& path, const NiqeModel& model);
NiqeModel load_niqe_model(const std::string& path);

}  // namespace enlighten
