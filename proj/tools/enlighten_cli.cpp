// Command-line front end for the low-light enhancement library. Talks to the
// library exclusively through its C interface, so it doubles as a living
// example of embedding the shared library.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "enlighten.h"
#include "json.hpp"

namespace {

namespace stdfs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUserError = 1;
constexpr int kExitInternalError = 2;

int exit_code_of(eg_status status) {
  if (status == EG_OK) return kExitOk;
  return status == EG_INTERNAL ? kExitInternalError : kExitUserError;
}

int fail(eg_status status) {
  std::cerr << "error: " << eg_last_error_message() << "\n";
  return exit_code_of(status);
}

bool has_image_extension(const stdfs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// Sorted so every run visits files in the same order.
std::vector<std::string> list_images(const std::string& dir, std::string& error) {
  std::error_code ec;
  if (!stdfs::is_directory(dir, ec)) {
    error = "not a directory: " + dir;
    return {};
  }
  std::vector<std::string> out;
  for (const auto& entry : stdfs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && has_image_extension(entry.path()))
      out.push_back(entry.path().string());
  }
  if (ec) {
    error = "cannot read directory: " + dir;
    return {};
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Runs body(i) for i in [0, n) across `jobs` threads; each worker takes a
// strided slice so the partition is deterministic.
void parallel_files(int jobs, int n, const std::function<void(int)>& body) {
  jobs = std::clamp(jobs, 1, 16);
  if (jobs == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&, t] {
      for (int i = t; i < n; i += jobs) body(i);
    });
  for (auto& th : pool) th.join();
}

void print_progress(int epoch, int total, double g_loss, double d_loss, void*) {
  std::cout << "epoch " << epoch << "/" << total << "  g_loss=" << g_loss
            << "  d_loss=" << d_loss << "\n"
            << std::flush;
}

int cmd_prepare_data(const std::string& src, const std::string& out, double threshold, int width,
                     int height) {
  int low = 0, normal = 0, skipped = 0;
  eg_status status =
      eg_prepare_data(src.c_str(), out.c_str(), threshold, width, height, &low, &normal, &skipped);
  if (status != EG_OK) return fail(status);
  std::cout << "low: " << low << "\nnormal: " << normal << "\nskipped: " << skipped
            << "\nmanifest: " << (stdfs::path(out) / "manifest.jsonl").string() << "\n";
  if (low + normal + skipped == 0) {
    std::cerr << "warning: no images found in " << src << "\n";
    return kExitUserError;
  }
  return kExitOk;
}

int cmd_train(const std::string& config, const std::string& resume) {
  eg_status status = eg_train(config.c_str(), resume.empty() ? nullptr : resume.c_str(),
                              print_progress, nullptr);
  if (status != EG_OK) return fail(status);
  std::cout << "training finished\n";
  return kExitOk;
}

int cmd_adapt(const std::string& config, const std::string& target, const std::string& init,
              double threshold) {
  eg_status status = eg_adapt(config.c_str(), target.c_str(), init.empty() ? nullptr : init.c_str(),
                              threshold, print_progress, nullptr);
  if (status != EG_OK) return fail(status);
  std::cout << "adaptation finished\n";
  return kExitOk;
}

int cmd_enhance(const std::string& input_dir, const std::string& output_dir,
                const std::string& method, const std::string& checkpoint, int tiles_x, int tiles_y,
                double clip_limit, int jobs) {
  std::string list_error;
  std::vector<std::string> inputs = list_images(input_dir, list_error);
  if (!list_error.empty()) {
    std::cerr << "error: " << list_error << "\n";
    return kExitUserError;
  }
  if (inputs.empty()) {
    std::cerr << "error: no images found in " << input_dir << "\n";
    return kExitUserError;
  }

  std::error_code ec;
  stdfs::create_directories(output_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory: " << output_dir << "\n";
    return kExitUserError;
  }

  const int n = static_cast<int>(inputs.size());
  jobs = std::clamp(jobs, 1, 16);

  // One generator instance per worker: scoring files never shares state.
  std::vector<eg_enhancer*> enhancers;
  if (method == "gan") {
    if (checkpoint.empty()) {
      std::cerr << "error: --checkpoint is required with --method gan\n";
      return kExitUserError;
    }
    for (int t = 0; t < std::min(jobs, n); ++t) {
      eg_enhancer* e = nullptr;
      eg_status status = eg_enhancer_open(checkpoint.c_str(), &e);
      if (status != EG_OK) {
        for (eg_enhancer* open : enhancers) eg_enhancer_close(open);
        return fail(status);
      }
      enhancers.push_back(e);
    }
  }

  std::vector<std::string> failures(inputs.size());
  std::vector<std::string> outputs(inputs.size());
  parallel_files(jobs, n, [&](int i) {
    stdfs::path out = stdfs::path(output_dir) / (stdfs::path(inputs[i]).stem().string() + ".png");
    outputs[i] = out.string();
    // Workers take strided slices, so worker t sees exactly the indices with
    // i % enhancers.size() == t: each concurrent thread owns one enhancer.
    eg_status status =
        method == "gan"
            ? eg_enhance_file(enhancers[i % enhancers.size()], inputs[i].c_str(),
                              out.string().c_str())
            : eg_ahe_file(inputs[i].c_str(), out.string().c_str(), tiles_x, tiles_y, clip_limit);
    if (status != EG_OK) failures[i] = eg_last_error_message();
  });
  for (eg_enhancer* e : enhancers) eg_enhancer_close(e);

  int failed = 0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (failures[i].empty()) {
      std::cout << "ok: " << outputs[i] << "\n";
    } else {
      std::cerr << "error: " << inputs[i] << ": " << failures[i] << "\n";
      ++failed;
    }
  }
  std::cout << "enhanced " << (n - failed) << "/" << n << " files\n";
  return failed == 0 ? kExitOk : kExitUserError;
}

int cmd_evaluate_niqe(const std::string& dir, const std::string& model_path,
                      const std::string& report_path, int jobs) {
  eg_niqe_model* model = nullptr;
  eg_status status = eg_niqe_model_open(model_path.c_str(), &model);
  if (status != EG_OK) return fail(status);

  std::string list_error;
  std::vector<std::string> images = list_images(dir, list_error);
  if (!list_error.empty()) {
    eg_niqe_model_close(model);
    std::cerr << "error: " << list_error << "\n";
    return kExitUserError;
  }
  if (images.empty()) {
    eg_niqe_model_close(model);
    std::cerr << "error: no images found in " << dir << "\n";
    return kExitUserError;
  }

  const int n = static_cast<int>(images.size());
  std::vector<double> scores(images.size(), 0.0);
  std::vector<std::string> skips(images.size());
  parallel_files(jobs, n, [&](int i) {
    eg_status s = eg_niqe_score_file(model, images[i].c_str(), &scores[i]);
    if (s != EG_OK) skips[i] = eg_last_error_message();
  });
  eg_niqe_model_close(model);

  std::ofstream report;
  if (!report_path.empty()) {
    report.open(report_path, std::ios::trunc);
    if (!report.good()) {
      std::cerr << "error: cannot open report file: " << report_path << "\n";
      return kExitUserError;
    }
  }
  auto emit = [&](const nlohmann::json& j) {
    std::string line = j.dump();
    std::cout << line << "\n";
    if (report.is_open()) report << line << "\n";
  };

  double sum = 0.0;
  int scored = 0;
  for (size_t i = 0; i < images.size(); ++i) {
    if (skips[i].empty()) {
      emit({{"path", images[i]}, {"score", scores[i]}});
      sum += scores[i];
      ++scored;
    } else {
      emit({{"path", images[i]}, {"skipped", skips[i]}});
    }
  }
  nlohmann::json summary = {{"count", scored}, {"skipped", n - scored}};
  summary["mean"] = scored > 0 ? nlohmann::json(sum / scored) : nlohmann::json(nullptr);
  emit(summary);

  if (scored == 0) {
    std::cerr << "error: no image could be scored\n";
    return kExitUserError;
  }
  return kExitOk;
}

int cmd_fit_niqe(const std::string& dir, const std::string& model_out) {
  std::string list_error;
  std::vector<std::string> images = list_images(dir, list_error);
  if (!list_error.empty()) {
    std::cerr << "error: " << list_error << "\n";
    return kExitUserError;
  }
  std::vector<const char*> cpaths;
  cpaths.reserve(images.size());
  for (const auto& p : images) cpaths.push_back(p.c_str());

  eg_status status = eg_niqe_fit(cpaths.data(), static_cast<int>(cpaths.size()), model_out.c_str());
  if (status != EG_OK) return fail(status);
  std::cout << "model written to " << model_out << " (" << images.size() << " images)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unpaired low-light image enhancement toolkit"};
  app.set_version_flag("--version", eg_version());
  app.require_subcommand(1);

  // prepare-data
  std::string prep_src, prep_out;
  double prep_threshold = 45.0;
  int prep_w = 600, prep_h = 400;
  auto* prep = app.add_subcommand("prepare-data", "Split a directory into low/normal training sets");
  prep->add_option("src", prep_src, "Source image directory")->required();
  prep->add_option("out", prep_out, "Output dataset directory")->required();
  prep->add_option("--low-threshold", prep_threshold, "Mean intensity below which an image is low-light");
  prep->add_option("--width", prep_w, "Resize target width");
  prep->add_option("--height", prep_h, "Resize target height");

  // train
  std::string train_config, train_resume;
  auto* train = app.add_subcommand("train", "Run adversarial training from a config file");
  train->add_option("config", train_config, "Config file (key = value lines)")->required();
  train->add_option("--resume", train_resume, "Checkpoint to continue from");

  // adapt
  std::string adapt_config, adapt_target, adapt_init;
  double adapt_threshold = 45.0;
  auto* adapt = app.add_subcommand("adapt", "Retrain against a new low-light domain");
  adapt->add_option("config", adapt_config, "Config file")->required();
  adapt->add_option("target", adapt_target, "Directory of target-domain images")->required();
  adapt->add_option("--init", adapt_init, "Checkpoint whose parameters seed the run");
  adapt->add_option("--low-threshold", adapt_threshold, "Brightness filter for the target side");

  // enhance
  std::string enh_in, enh_out, enh_method = "gan", enh_checkpoint;
  int enh_tiles_x = 8, enh_tiles_y = 8, enh_jobs = 1;
  double enh_clip = 0.0;
  auto* enh = app.add_subcommand("enhance", "Enhance every image in a directory");
  enh->add_option("input", enh_in, "Input image directory")->required();
  enh->add_option("output", enh_out, "Output directory (PNG files)")->required();
  enh->add_option("--method", enh_method, "gan or ahe")
      ->check(CLI::IsMember({"gan", "ahe"}));
  enh->add_option("--checkpoint", enh_checkpoint, "Generator checkpoint (gan method)");
  enh->add_option("--tiles-x", enh_tiles_x, "AHE tile columns");
  enh->add_option("--tiles-y", enh_tiles_y, "AHE tile rows");
  enh->add_option("--clip", enh_clip, "AHE clip limit (0 = none)");
  enh->add_option("--jobs", enh_jobs, "Parallel workers");

  // evaluate-niqe
  std::string eval_dir, eval_model, eval_report;
  int eval_jobs = 1;
  auto* eval = app.add_subcommand("evaluate-niqe", "Score a directory with a quality model");
  eval->add_option("dir", eval_dir, "Image directory")->required();
  eval->add_option("--model", eval_model, "Quality model file")->required();
  eval->add_option("--out", eval_report, "Also write the line-delimited report here");
  eval->add_option("--jobs", eval_jobs, "Parallel workers");

  // fit-niqe
  std::string fit_dir, fit_out;
  auto* fit = app.add_subcommand("fit-niqe", "Fit a quality model from pristine images");
  fit->add_option("dir", fit_dir, "Directory of pristine images")->required();
  fit->add_option("--out", fit_out, "Model output path (.json or binary)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUserError;
  }

  try {
    if (prep->parsed()) return cmd_prepare_data(prep_src, prep_out, prep_threshold, prep_w, prep_h);
    if (train->parsed()) return cmd_train(train_config, train_resume);
    if (adapt->parsed()) return cmd_adapt(adapt_config, adapt_target, adapt_init, adapt_threshold);
    if (enh->parsed())
      return cmd_enhance(enh_in, enh_out, enh_method, enh_checkpoint, enh_tiles_x, enh_tiles_y,
                         enh_clip, enh_jobs);
    if (eval->parsed()) return cmd_evaluate_niqe(eval_dir, eval_model, eval_report, eval_jobs);
    if (fit->parsed()) return cmd_fit_niqe(fit_dir, fit_out);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternalError;
  }
  return kExitUserError;
}
