#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "enlighten.h"
#include "enlighten/image.hpp"
#include "test_util.hpp"

// These tests exercise the C surface end to end; the C++ core is used only
// to produce image fixtures.

using testutil::TempDir;
using testutil::textured_image;

namespace {

struct Fixture {
  TempDir td{"capi"};
  std::string low_dir, normal_dir, out_dir;

  Fixture() {
    namespace stdfs = std::filesystem;
    low_dir = (td.path() / "low").string();
    normal_dir = (td.path() / "normal").string();
    out_dir = (td.path() / "out").string();
    stdfs::create_directories(low_dir);
    stdfs::create_directories(normal_dir);
    for (int i = 0; i < 3; ++i) {
      enlighten::save_png(low_dir + "/l" + std::to_string(i) + ".png",
                          textured_image(32, 32, 100 + static_cast<uint64_t>(i), 0.15));
      enlighten::save_png(normal_dir + "/n" + std::to_string(i) + ".png",
                          textured_image(32, 32, 200 + static_cast<uint64_t>(i), 0.9));
    }
  }

  std::string write_config(const std::string& extra = "") {
    std::string path = td.file("train.cfg");
    std::ofstream f(path);
    f << "low_dir = " << low_dir << "\n"
      << "normal_dir = " << normal_dir << "\n"
      << "out_dir = " << out_dir << "\n"
      << "target_w = 32\ntarget_h = 32\ncrop_size = 0\n"
      << "epochs_const = 1\nepochs_decay = 1\nbatch = 2\nseed = 5\n"
      << "checkpoint_every = 1\npatch_count = 2\npatch_size = 16\n"
      << "gen_base_channels = 4\ngen_depth = 2\n"
      << "critic_base_channels = 4\ncritic_n_strided = 2\n"
      << "extractor_width_mult = 0.0625\n"
      << extra;
    return path;
  }
};

struct ProgressLog {
  std::vector<int> epochs;
  int total = 0;
};

void record_progress(int epoch, int total, double, double, void* user) {
  auto* log = static_cast<ProgressLog*>(user);
  log->epochs.push_back(epoch);
  log->total = total;
}

}  // namespace

TEST_CASE("version and error message plumbing") {
  REQUIRE(eg_version() != nullptr);
  CHECK(std::strlen(eg_version()) >= 5);
  CHECK(std::string(eg_last_error_message()).empty());

  CHECK(eg_prepare_data(nullptr, "x", 45.0, 8, 8, nullptr, nullptr, nullptr) ==
        EG_INVALID_ARGUMENT);
  CHECK(!std::string(eg_last_error_message()).empty());
}

TEST_CASE("data preparation reports the split") {
  TempDir td("capi-prep");
  std::string src = (td.path() / "src").string();
  std::filesystem::create_directories(src);
  enlighten::save_png(src + "/dark.png", textured_image(24, 24, 1, 0.1));
  enlighten::save_png(src + "/bright.png", textured_image(24, 24, 2, 0.9));

  int low = -1, normal = -1, skipped = -1;
  std::string out = (td.path() / "prepared").string();
  REQUIRE(eg_prepare_data(src.c_str(), out.c_str(), 45.0, 16, 16, &low, &normal, &skipped) ==
          EG_OK);
  CHECK(low == 1);
  CHECK(normal == 1);
  CHECK(skipped == 0);
  CHECK(std::filesystem::exists(out + "/manifest.jsonl"));

  CHECK(eg_prepare_data((src + "-missing").c_str(), out.c_str(), 45.0, 16, 16, nullptr, nullptr,
                        nullptr) == EG_IO);
}

TEST_CASE("training, enhancement and adaptation through the C surface") {
  Fixture fx;
  std::string cfg = fx.write_config();

  ProgressLog log;
  REQUIRE(eg_train(cfg.c_str(), nullptr, record_progress, &log) == EG_OK);
  CHECK(log.epochs == std::vector<int>{1, 2});
  CHECK(log.total == 2);
  std::string ckpt = fx.out_dir + "/checkpoint-latest.bin";
  REQUIRE(std::filesystem::exists(ckpt));

  SUBCASE("resume continues from the checkpoint") {
    // The finished run has no epochs left, so resume succeeds with no work.
    CHECK(eg_train(cfg.c_str(), ckpt.c_str(), nullptr, nullptr) == EG_OK);
  }

  SUBCASE("enhancer round-trips a file") {
    eg_enhancer* enhancer = nullptr;
    REQUIRE(eg_enhancer_open(ckpt.c_str(), &enhancer) == EG_OK);
    REQUIRE(enhancer != nullptr);

    std::string in = fx.low_dir + "/l0.png";
    std::string out = fx.td.file("enhanced.png");
    REQUIRE(eg_enhance_file(enhancer, in.c_str(), out.c_str()) == EG_OK);
    enlighten::ImageU8 img = enlighten::load_image_u8(out);
    CHECK(img.h == 32);
    CHECK(img.w == 32);

    CHECK(eg_enhance_file(enhancer, (in + ".missing").c_str(), out.c_str()) == EG_IO);
    CHECK(!std::string(eg_last_error_message()).empty());
    eg_enhancer_close(enhancer);
  }

  SUBCASE("adaptation retrains against a target directory") {
    std::string target = (fx.td.path() / "target").string();
    std::filesystem::create_directories(target);
    for (int i = 0; i < 2; ++i)
      enlighten::save_png(target + "/t" + std::to_string(i) + ".png",
                          textured_image(32, 32, 300 + static_cast<uint64_t>(i), 0.1));

    ProgressLog adapt_log;
    REQUIRE(eg_adapt(cfg.c_str(), target.c_str(), ckpt.c_str(), 45.0, record_progress,
                     &adapt_log) == EG_OK);
    CHECK(adapt_log.epochs.size() == 2);
  }
}

TEST_CASE("config errors carry their message across the boundary") {
  Fixture fx;
  std::string cfg = fx.write_config("learning_rate = 1\n");
  CHECK(eg_train(cfg.c_str(), nullptr, nullptr, nullptr) == EG_INVALID_ARGUMENT);
  CHECK(std::string(eg_last_error_message()).find("unknown config key") != std::string::npos);

  CHECK(eg_enhancer_open((fx.out_dir + "/nope.bin").c_str(), nullptr) == EG_INVALID_ARGUMENT);
  eg_enhancer* enhancer = nullptr;
  CHECK(eg_enhancer_open((fx.out_dir + "/nope.bin").c_str(), &enhancer) == EG_IO);
  CHECK(enhancer == nullptr);
}

TEST_CASE("histogram equalization baseline through file paths") {
  TempDir td("capi-ahe");
  std::string in = td.file("in.png");
  std::string out = td.file("out.png");
  enlighten::save_png(in, textured_image(40, 48, 7, 0.3));

  REQUIRE(eg_ahe_file(in.c_str(), out.c_str(), 4, 4, 0.0) == EG_OK);
  enlighten::ImageU8 img = enlighten::load_image_u8(out);
  CHECK(img.h == 40);
  CHECK(img.w == 48);

  CHECK(eg_ahe_file(in.c_str(), out.c_str(), 100, 1, 0.0) == EG_INVALID_ARGUMENT);
}

TEST_CASE("quality model fitting and scoring through the C surface") {
  TempDir td("capi-niqe");
  std::vector<std::string> paths;
  std::vector<const char*> cpaths;
  for (int i = 0; i < 10; ++i) {
    std::string p = td.file("img" + std::to_string(i) + ".png");
    enlighten::save_png(p, textured_image(96, 96, 500 + static_cast<uint64_t>(i)));
    paths.push_back(p);
  }
  for (const auto& p : paths) cpaths.push_back(p.c_str());

  std::string model_path = td.file("model.bin");
  REQUIRE(eg_niqe_fit(cpaths.data(), static_cast<int>(cpaths.size()), model_path.c_str()) ==
          EG_OK);

  eg_niqe_model* model = nullptr;
  REQUIRE(eg_niqe_model_open(model_path.c_str(), &model) == EG_OK);
  REQUIRE(model != nullptr);

  double score = -1.0;
  REQUIRE(eg_niqe_score_file(model, paths[0].c_str(), &score) == EG_OK);
  CHECK(score >= 0.0);

  CHECK(eg_niqe_score_file(model, td.file("missing.png").c_str(), &score) == EG_IO);
  CHECK(eg_niqe_fit(cpaths.data(), 3, model_path.c_str()) == EG_INVALID_ARGUMENT);

  eg_niqe_model_close(model);
}
