/* C interface to the low-light enhancement library.
 *
 * Every function returns eg_status; EG_OK means success. On failure,
 * eg_last_error_message() returns a human-readable description valid until
 * the next library call on the same thread. Pointer arguments must be
 * non-NULL unless documented as optional.
 */
#ifndef ENLIGHTEN_H
#define ENLIGHTEN_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eg_status {
  EG_OK = 0,
  EG_INVALID_ARGUMENT = 1,
  EG_IO = 2,
  EG_CORRUPT = 3,
  EG_SHAPE_MISMATCH = 4,
  EG_NUMERIC = 5,
  EG_NOT_FOUND = 6,
  EG_INTERNAL = 7
} eg_status;

/* Library version as "major.minor.patch". */
const char* eg_version(void);

/* Message for the most recent failure on this thread ("" if none). */
const char* eg_last_error_message(void);

/* Called once per finished epoch during training. */
typedef void (*eg_progress_fn)(int epoch, int total_epochs, double g_loss, double d_loss,
                               void* user);

/* Splits the images in src_dir into out_dir/trainA (mean intensity below
 * low_threshold) and out_dir/trainB, resizing to target_w x target_h, and
 * writes out_dir/manifest.jsonl. The count outputs are optional. */
eg_status eg_prepare_data(const char* src_dir, const char* out_dir, double low_threshold,
                          int target_w, int target_h, int* out_low, int* out_normal,
                          int* out_skipped);

/* Runs the training loop described by the config file. resume_checkpoint may
 * be NULL to start fresh; progress may be NULL. */
eg_status eg_train(const char* config_path, const char* resume_checkpoint, eg_progress_fn progress,
                   void* user);

/* Domain adaptation: trains with the low-light side replaced by the images
 * in target_low_dir that pass the brightness filter. init_checkpoint may be
 * NULL to start from random parameters; otherwise its model parameters (not
 * the optimizer state) seed the run. */
eg_status eg_adapt(const char* config_path, const char* target_low_dir,
                   const char* init_checkpoint, double low_threshold, eg_progress_fn progress,
                   void* user);

/* Generator loaded from a checkpoint, ready to enhance files. */
typedef struct eg_enhancer eg_enhancer;

eg_status eg_enhancer_open(const char* checkpoint_path, eg_enhancer** out);
void eg_enhancer_close(eg_enhancer* enhancer);

/* Enhances one image file and writes the result as PNG. */
eg_status eg_enhance_file(eg_enhancer* enhancer, const char* input_path, const char* output_path);

/* Adaptive histogram equalization baseline on one file (PNG written).
 * clip_limit 0 disables clipping. */
eg_status eg_ahe_file(const char* input_path, const char* output_path, int tiles_x, int tiles_y,
                      double clip_limit);

/* Pristine natural-scene-statistics model for no-reference quality scoring. */
typedef struct eg_niqe_model eg_niqe_model;

/* Fits a model from at least 10 pristine images and writes it to
 * model_out_path (".json" suffix selects the text format, anything else the
 * flat binary format). */
eg_status eg_niqe_fit(const char* const* image_paths, int count, const char* model_out_path);

eg_status eg_niqe_model_open(const char* model_path, eg_niqe_model** out);
void eg_niqe_model_close(eg_niqe_model* model);

/* Scores one image against the model; lower is more natural. */
eg_status eg_niqe_score_file(const eg_niqe_model* model, const char* image_path,
                             double* out_score);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ENLIGHTEN_H */
