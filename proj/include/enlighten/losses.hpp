#pragma once

#include <vector>

#include "enlighten/features.hpp"
#include "enlighten/tensor.hpp"

namespace enlighten {

// Per-sample spatial mean of a {N,1,h,w} score map -> {N,1,1,1} scalars.
Tensor score_map_mean(const Tensor& score_map);

// Relativistic score: a[k] - mean(b). Inputs are per-sample scalar batches.
Tensor d_ra(const Tensor& a_scores, const Tensor& b_scores);

// Least-squares adversarial objectives. The global pair is relativistic;
// the local pair scores patches directly against fixed targets.
Tensor global_d_loss(const Tensor& real_scores, const Tensor& fake_scores);
Tensor global_g_loss(const Tensor& real_scores, const Tensor& fake_scores);
Tensor local_d_loss(const Tensor& real_patch_scores, const Tensor& fake_patch_scores);
Tensor local_g_loss(const Tensor& fake_patch_scores);

// Feature-space self-preservation: instance-normalize both activations,
// then sum squared differences over channels and space, divided by the
// spatial element count (mean over the batch).
Tensor sfp_from_features(const Tensor& feat_a, const Tensor& feat_b);

// Extractor-backed form over signed image tensors.
Tensor sfp_loss(const FeatureExtractor& fx, const Tensor& low, const Tensor& enhanced);

// Unweighted sum of the four generator terms; rejects non-finite parts.
Tensor total_g_loss(const Tensor& sfp_global, const Tensor& sfp_local, const Tensor& adv_global,
                    const Tensor& adv_local);

// Plain-number conveniences for score batches already reduced to scalars.
std::vector<double> d_ra(const std::vector<double>& a, const std::vector<double>& b);
double global_d_loss(const std::vector<double>& real, const std::vector<double>& fake);
double global_g_loss(const std::vector<double>& real, const std::vector<double>& fake);
double local_d_loss(const std::vector<double>& real, const std::vector<double>& fake);
double local_g_loss(const std::vector<double>& fake);

}  // namespace enlighten
