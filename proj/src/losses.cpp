#include "enlighten/losses.hpp"

#include <cmath>

#include "enlighten/common.hpp"

namespace enlighten {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw Error(ErrorCode::InvalidArgument, msg);
}

void check_scalar_batch(const Tensor& t, const char* name) {
  require(t.defined(), "loss input tensor is undefined");
  const Shape4& s = t.shape();
  if (s.c != 1 || s.h != 1 || s.w != 1) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(name) + " must be a {N,1,1,1} scalar batch, got " + s.str());
  }
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

}  // namespace

Tensor score_map_mean(const Tensor& score_map) {
  require(score_map.defined(), "score map is undefined");
  return reduce_mean(score_map, false, true, true, true);
}

Tensor d_ra(const Tensor& a_scores, const Tensor& b_scores) {
  check_scalar_batch(a_scores, "d_ra first argument");
  check_scalar_batch(b_scores, "d_ra second argument");
  Tensor b_mean = reduce_mean(b_scores, true, false, false, false);  // {1,1,1,1}
  return sub(a_scores, b_mean);
}

Tensor global_d_loss(const Tensor& real_scores, const Tensor& fake_scores) {
  Tensor rel_real = d_ra(real_scores, fake_scores);
  Tensor rel_fake = d_ra(fake_scores, real_scores);
  Tensor term_real = mean_all(square(add_scalar(rel_real, -1.0)));
  Tensor term_fake = mean_all(square(rel_fake));
  return add(term_real, term_fake);
}

Tensor global_g_loss(const Tensor& real_scores, const Tensor& fake_scores) {
  Tensor rel_fake = d_ra(fake_scores, real_scores);
  Tensor rel_real = d_ra(real_scores, fake_scores);
  Tensor term_fake = mean_all(square(add_scalar(rel_fake, -1.0)));
  Tensor term_real = mean_all(square(rel_real));
  return add(term_fake, term_real);
}

Tensor local_d_loss(const Tensor& real_patch_scores, const Tensor& fake_patch_scores) {
  require(real_patch_scores.defined() && fake_patch_scores.defined(),
          "local loss inputs are undefined");
  Tensor term_real = mean_all(square(add_scalar(real_patch_scores, -1.0)));
  Tensor term_fake = mean_all(square(fake_patch_scores));
  return add(term_real, term_fake);
}

Tensor local_g_loss(const Tensor& fake_patch_scores) {
  require(fake_patch_scores.defined(), "local loss input is undefined");
  return mean_all(square(add_scalar(fake_patch_scores, -1.0)));
}

Tensor sfp_from_features(const Tensor& feat_a, const Tensor& feat_b) {
  require(feat_a.defined() && feat_b.defined(), "feature tensors are undefined");
  if (!(feat_a.shape() == feat_b.shape())) {
    throw Error(ErrorCode::ShapeMismatch, "feature tensors differ in shape: " +
                                           feat_a.shape().str() + " vs " + feat_b.shape().str());
  }
  Tensor na = instance_norm(feat_a);
  Tensor nb = instance_norm(feat_b);
  Tensor diff_sq = square(sub(na, nb));
  // Batch mean of sum_{c,h,w} / (h*w)  ==  mean over all elements * channels.
  double channels = static_cast<double>(feat_a.shape().c);
  return mul_scalar(mean_all(diff_sq), channels);
}

Tensor sfp_loss(const FeatureExtractor& fx, const Tensor& low, const Tensor& enhanced) {
  Tensor fa = fx.features(low);
  Tensor fb = fx.features(enhanced);
  return sfp_from_features(fa, fb);
}

Tensor total_g_loss(const Tensor& sfp_global, const Tensor& sfp_local, const Tensor& adv_global,
                    const Tensor& adv_local) {
  const Tensor* parts[] = {&sfp_global, &sfp_local, &adv_global, &adv_local};
  const char* names[] = {"sfp_global", "sfp_local", "adv_global", "adv_local"};
  for (int i = 0; i < 4; ++i) {
    require(parts[i]->defined(), "generator loss term is undefined");
    if (parts[i]->numel() != 1) {
      throw Error(ErrorCode::ShapeMismatch,
                  std::string("generator loss term ") + names[i] + " is not scalar");
    }
    if (!std::isfinite(parts[i]->item())) {
      throw Error(ErrorCode::Numeric,
                  std::string("generator loss term ") + names[i] + " is not finite");
    }
  }
  return add(add(sfp_global, sfp_local), add(adv_global, adv_local));
}

std::vector<double> d_ra(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::InvalidArgument, "d_ra inputs must be non-empty");
  double mb = mean_of(b);
  std::vector<double> out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - mb;
  return out;
}

double global_d_loss(const std::vector<double>& real, const std::vector<double>& fake) {
  std::vector<double> rr = d_ra(real, fake);
  std::vector<double> rf = d_ra(fake, real);
  double t1 = 0.0, t2 = 0.0;
  for (double x : rr) t1 += (x - 1.0) * (x - 1.0);
  for (double x : rf) t2 += x * x;
  return t1 / static_cast<double>(rr.size()) + t2 / static_cast<double>(rf.size());
}

double global_g_loss(const std::vector<double>& real, const std::vector<double>& fake) {
  std::vector<double> rf = d_ra(fake, real);
  std::vector<double> rr = d_ra(real, fake);
  double t1 = 0.0, t2 = 0.0;
  for (double x : rf) t1 += (x - 1.0) * (x - 1.0);
  for (double x : rr) t2 += x * x;
  return t1 / static_cast<double>(rf.size()) + t2 / static_cast<double>(rr.size());
}

double local_d_loss(const std::vector<double>& real, const std::vector<double>& fake) {
  if (real.empty() || fake.empty())
    throw Error(ErrorCode::InvalidArgument, "local loss inputs must be non-empty");
  double t1 = 0.0, t2 = 0.0;
  for (double x : real) t1 += (x - 1.0) * (x - 1.0);
  for (double x : fake) t2 += x * x;
  return t1 / static_cast<double>(real.size()) + t2 / static_cast<double>(fake.size());
}

double local_g_loss(const std::vector<double>& fake) {
  if (fake.empty()) throw Error(ErrorCode::InvalidArgument, "local loss input must be non-empty");
  double t = 0.0;
  for (double x : fake) t += (x - 1.0) * (x - 1.0);
  return t / static_cast<double>(fake.size());
}

}  // namespace enlighten
