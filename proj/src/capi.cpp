#include "enlighten.h"

#include <exception>
#include <string>
#include <vector>

#include "enlighten/ahe.hpp"
#include "enlighten/common.hpp"
#include "enlighten/config.hpp"
#include "enlighten/data.hpp"
#include "enlighten/generator.hpp"
#include "enlighten/image.hpp"
#include "enlighten/niqe.hpp"
#include "enlighten/trainer.hpp"

struct eg_enhancer {
  enlighten::Generator generator;
};

struct eg_niqe_model {
  enlighten::NiqeModel model;
};

namespace {

thread_local std::string g_last_error;

eg_status status_of(enlighten::ErrorCode code) {
  switch (code) {
    case enlighten::ErrorCode::InvalidArgument: return EG_INVALID_ARGUMENT;
    case enlighten::ErrorCode::Io: return EG_IO;
    case enlighten::ErrorCode::Corrupt: return EG_CORRUPT;
    case enlighten::ErrorCode::ShapeMismatch: return EG_SHAPE_MISMATCH;
    case enlighten::ErrorCode::Numeric: return EG_NUMERIC;
    case enlighten::ErrorCode::NotFound: return EG_NOT_FOUND;
  }
  return EG_INTERNAL;
}

// Runs the body, translating exceptions into status codes + the thread-local
// message. Every API entry point goes through here.
template <typename Fn>
eg_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    return fn();
  } catch (const enlighten::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EG_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return EG_INTERNAL;
  }
}

eg_status invalid(const char* message) {
  g_last_error = message;
  return EG_INVALID_ARGUMENT;
}

enlighten::ProgressFn wrap_progress(eg_progress_fn progress, void* user) {
  if (!progress) return nullptr;
  return [progress, user](int epoch, int total, double g, double d) {
    progress(epoch, total, g, d, user);
  };
}

}  // namespace

extern "C" {

const char* eg_version(void) { return "0.1.0"; }

const char* eg_last_error_message(void) { return g_last_error.c_str(); }

eg_status eg_prepare_data(const char* src_dir, const char* out_dir, double low_threshold,
                          int target_w, int target_h, int* out_low, int* out_normal,
                          int* out_skipped) {
  if (!src_dir || !out_dir) return invalid("src_dir and out_dir are required");
  return guarded([&] {
    enlighten::PrepareReport report =
        enlighten::prepare_data(src_dir, out_dir, low_threshold, target_w, target_h);
    if (out_low) *out_low = report.low;
    if (out_normal) *out_normal = report.normal;
    if (out_skipped) *out_skipped = report.skipped;
    return EG_OK;
  });
}

eg_status eg_train(const char* config_path, const char* resume_checkpoint, eg_progress_fn progress,
                   void* user) {
  if (!config_path) return invalid("config_path is required");
  return guarded([&] {
    enlighten::TrainConfig cfg = enlighten::load_config(config_path);
    if (resume_checkpoint && resume_checkpoint[0]) {
      enlighten::Trainer trainer(cfg, resume_checkpoint);
      trainer.run(wrap_progress(progress, user));
    } else {
      enlighten::Trainer trainer(cfg);
      trainer.run(wrap_progress(progress, user));
    }
    return EG_OK;
  });
}

eg_status eg_adapt(const char* config_path, const char* target_low_dir,
                   const char* init_checkpoint, double low_threshold, eg_progress_fn progress,
                   void* user) {
  if (!config_path || !target_low_dir) return invalid("config_path and target_low_dir are required");
  return guarded([&] {
    enlighten::TrainConfig cfg = enlighten::load_config(config_path);
    enlighten::Trainer trainer = enlighten::Trainer::adapt(
        cfg, target_low_dir, init_checkpoint ? init_checkpoint : "", low_threshold);
    trainer.run(wrap_progress(progress, user));
    return EG_OK;
  });
}

eg_status eg_enhancer_open(const char* checkpoint_path, eg_enhancer** out) {
  if (!checkpoint_path || !out) return invalid("checkpoint_path and out are required");
  *out = nullptr;
  return guarded([&] {
    *out = new eg_enhancer{enlighten::load_generator_from_checkpoint(checkpoint_path)};
    return EG_OK;
  });
}

void eg_enhancer_close(eg_enhancer* enhancer) { delete enhancer; }

eg_status eg_enhance_file(eg_enhancer* enhancer, const char* input_path, const char* output_path) {
  if (!enhancer || !input_path || !output_path)
    return invalid("enhancer, input_path and output_path are required");
  return guarded([&] {
    enlighten::ImageU8 input = enlighten::load_image_u8(input_path);
    enlighten::ImageU8 output = enlighten::enhance_image(enhancer->generator, input);
    enlighten::save_png(output_path, output);
    return EG_OK;
  });
}

eg_status eg_ahe_file(const char* input_path, const char* output_path, int tiles_x, int tiles_y,
                      double clip_limit) {
  if (!input_path || !output_path) return invalid("input_path and output_path are required");
  return guarded([&] {
    enlighten::ImageU8 input = enlighten::load_image_u8(input_path);
    enlighten::save_png(output_path, enlighten::ahe(input, tiles_x, tiles_y, clip_limit));
    return EG_OK;
  });
}

eg_status eg_niqe_fit(const char* const* image_paths, int count, const char* model_out_path) {
  if (!image_paths || !model_out_path) return invalid("image_paths and model_out_path are required");
  if (count < 0) return invalid("count must be nonnegative");
  return guarded([&] {
    std::vector<std::string> paths;
    paths.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
      if (!image_paths[i]) return invalid("image_paths contains a NULL entry");
      paths.emplace_back(image_paths[i]);
    }
    enlighten::save_niqe_model(model_out_path, enlighten::fit_pristine_model(paths));
    return EG_OK;
  });
}

eg_status eg_niqe_model_open(const char* model_path, eg_niqe_model** out) {
  if (!model_path || !out) return invalid("model_path and out are required");
  *out = nullptr;
  return guarded([&] {
    *out = new eg_niqe_model{enlighten::load_niqe_model(model_path)};
    return EG_OK;
  });
}

void eg_niqe_model_close(eg_niqe_model* model) { delete model; }

eg_status eg_niqe_score_file(const eg_niqe_model* model, const char* image_path,
                             double* out_score) {
  if (!model || !image_path || !out_score)
    return invalid("model, image_path and out_score are required");
  return guarded([&] {
    *out_score = enlighten::niqe_score(enlighten::load_image_u8(image_path), model->model);
    return EG_OK;
  });
}

}  // extern "C"
