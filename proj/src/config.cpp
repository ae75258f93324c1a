#include "enlighten/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_map>

namespace enlighten {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    int64_t x = std::stoll(v, &used);
    require(used == v.size(), ErrorCode::InvalidArgument, "");
    return x;
  } catch (...) {
    fail(ErrorCode::InvalidArgument, "config key '" + key + "' expects an integer, got '" + v + "'");
  }
}

uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    uint64_t x = std::stoull(v, &used);
    require(used == v.size() && v[0] != '-', ErrorCode::InvalidArgument, "");
    return x;
  } catch (...) {
    fail(ErrorCode::InvalidArgument,
         "config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double x = std::stod(v, &used);
    require(used == v.size(), ErrorCode::InvalidArgument, "");
    return x;
  } catch (...) {
    fail(ErrorCode::InvalidArgument, "config key '" + key + "' expects a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::InvalidArgument,
       "config key '" + key + "' expects true/false/1/0, got '" + v + "'");
}

}  // namespace

void TrainConfig::validate() const {
  require(epochs_const >= 1 && epochs_decay >= 1, ErrorCode::InvalidArgument,
          "epochs_const and epochs_decay must be positive");
  require(lr0 > 0.0, ErrorCode::InvalidArgument, "lr0 must be positive");
  require(batch >= 1, ErrorCode::InvalidArgument, "batch must be at least 1");
  require(accum_steps >= 1, ErrorCode::InvalidArgument, "accum_steps must be at least 1");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorCode::InvalidArgument,
          "betas must lie in [0,1)");
  require(target_w >= 1 && target_h >= 1, ErrorCode::InvalidArgument,
          "target dimensions must be positive");
  require(crop_size >= 0, ErrorCode::InvalidArgument, "crop_size must be non-negative");
  if (crop_size > 0)
    require(crop_size <= target_w && crop_size <= target_h, ErrorCode::InvalidArgument,
            "crop_size exceeds the resized frame");
  require(patch_count >= 1, ErrorCode::InvalidArgument, "patch_count must be at least 1");
  require(patch_size >= 1, ErrorCode::InvalidArgument, "patch_size must be positive");
  require(patch_size <= train_h() && patch_size <= train_w(), ErrorCode::InvalidArgument,
          "patch_size exceeds the training frame");
  require(checkpoint_every >= 0, ErrorCode::InvalidArgument,
          "checkpoint_every must be non-negative");
  require(extractor_width_mult > 0.0 && extractor_width_mult <= 1.0, ErrorCode::InvalidArgument,
          "extractor_width_mult must be in (0,1]");

  {
    int multiple = 1 << gen_depth;
    require(gen_depth >= 1 && gen_depth <= 8, ErrorCode::InvalidArgument,
            "gen_depth must be in [1,8]");
    require(gen_base_channels >= 2 && gen_base_channels % 2 == 0, ErrorCode::InvalidArgument,
            "gen_base_channels must be even and at least 2");
    require(train_h() % multiple == 0 && train_w() % multiple == 0, ErrorCode::InvalidArgument,
            "training frame must be divisible by 2^gen_depth");
  }
  // The feature extractor pads internally, but training frames must land on
  // its grid so cropped patches and full frames share one geometry.
  require(train_h() % 16 == 0 && train_w() % 16 == 0, ErrorCode::InvalidArgument,
          "training frame must be divisible by 16 for the feature extractor");
  require(critic_n_strided >= 1 && critic_n_strided <= 5, ErrorCode::InvalidArgument,
          "critic_n_strided must be in [1,5]");
  require(critic_base_channels >= 1, ErrorCode::InvalidArgument,
          "critic_base_channels must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{{"low_dir", low_dir},
                        {"normal_dir", normal_dir},
                        {"out_dir", out_dir},
                        {"target_w", target_w},
                        {"target_h", target_h},
                        {"crop_size", crop_size},
                        {"flip", flip},
                        {"epochs_const", epochs_const},
                        {"epochs_decay", epochs_decay},
                        {"lr0", lr0},
                        {"batch", batch},
                        {"accum_steps", accum_steps},
                        {"beta1", beta1},
                        {"beta2", beta2},
                        {"seed", seed},
                        {"checkpoint_every", checkpoint_every},
                        {"patch_count", patch_count},
                        {"patch_size", patch_size},
                        {"gen_base_channels", gen_base_channels},
                        {"gen_depth", gen_depth},
                        {"critic_base_channels", critic_base_channels},
                        {"critic_n_strided", critic_n_strided},
                        {"extractor_weights", extractor_weights},
                        {"extractor_seed", extractor_seed},
                        {"extractor_width_mult", extractor_width_mult}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.low_dir = j.at("low_dir").get<std::string>();
  c.normal_dir = j.at("normal_dir").get<std::string>();
  c.out_dir = j.at("out_dir").get<std::string>();
  c.target_w = j.at("target_w").get<int>();
  c.target_h = j.at("target_h").get<int>();
  c.crop_size = j.at("crop_size").get<int>();
  c.flip = j.at("flip").get<bool>();
  c.epochs_const = j.at("epochs_const").get<int>();
  c.epochs_decay = j.at("epochs_decay").get<int>();
  c.lr0 = j.at("lr0").get<double>();
  c.batch = j.at("batch").get<int>();
  c.accum_steps = j.at("accum_steps").get<int>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  c.checkpoint_every = j.at("checkpoint_every").get<int>();
  c.patch_count = j.at("patch_count").get<int>();
  c.patch_size = j.at("patch_size").get<int>();
  c.gen_base_channels = j.at("gen_base_channels").get<int>();
  c.gen_depth = j.at("gen_depth").get<int>();
  c.critic_base_channels = j.at("critic_base_channels").get<int>();
  c.critic_n_strided = j.at("critic_n_strided").get<int>();
  c.extractor_weights = j.at("extractor_weights").get<std::string>();
  c.extractor_seed = j.at("extractor_seed").get<uint64_t>();
  c.extractor_width_mult = j.at("extractor_width_mult").get<double>();
  return c;
}

std::string TrainConfig::fingerprint() const {
  // nlohmann::json orders keys, so dump() is canonical.
  std::string s = to_json().dump();
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::unordered_map<std::string, std::function<void(const std::string&, const std::string&)>>
      setters;
  auto set_int = [](int& dst) {
    return [&dst](const std::string& k, const std::string& v) {
      dst = static_cast<int>(parse_int(k, v));
    };
  };
  auto set_double = [](double& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_double(k, v); };
  };
  auto set_string = [](std::string& dst) {
    return [&dst](const std::string&, const std::string& v) { dst = v; };
  };
  auto set_bool = [](bool& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_bool(k, v); };
  };
  auto set_uint = [](uint64_t& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_uint(k, v); };
  };

  setters["low_dir"] = set_string(cfg.low_dir);
  setters["normal_dir"] = set_string(cfg.normal_dir);
  setters["out_dir"] = set_string(cfg.out_dir);
  setters["target_w"] = set_int(cfg.target_w);
  setters["target_h"] = set_int(cfg.target_h);
  setters["crop_size"] = set_int(cfg.crop_size);
  setters["flip"] = set_bool(cfg.flip);
  setters["epochs_const"] = set_int(cfg.epochs_const);
  setters["epochs_decay"] = set_int(cfg.epochs_decay);
  setters["lr0"] = set_double(cfg.lr0);
  setters["batch"] = set_int(cfg.batch);
  setters["accum_steps"] = set_int(cfg.accum_steps);
  setters["beta1"] = set_double(cfg.beta1);
  setters["beta2"] = set_double(cfg.beta2);
  setters["seed"] = set_uint(cfg.seed);
  setters["checkpoint_every"] = set_int(cfg.checkpoint_every);
  setters["patch_count"] = set_int(cfg.patch_count);
  setters["patch_size"] = set_int(cfg.patch_size);
  setters["gen_base_channels"] = set_int(cfg.gen_base_channels);
  setters["gen_depth"] = set_int(cfg.gen_depth);
  setters["critic_base_channels"] = set_int(cfg.critic_base_channels);
  setters["critic_n_strided"] = set_int(cfg.critic_n_strided);
  setters["extractor_weights"] = set_string(cfg.extractor_weights);
  setters["extractor_seed"] = set_uint(cfg.extractor_seed);
  setters["extractor_width_mult"] = set_double(cfg.extractor_width_mult);

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string stripped = line;
    size_t hash = stripped.find('#');
    if (hash != std::string::npos) stripped.erase(hash);
    stripped = trim(stripped);
    if (stripped.empty()) continue;
    size_t eq = stripped.find('=');
    require(eq != std::string::npos, ErrorCode::InvalidArgument,
            "config line " + std::to_string(lineno) + " is not 'key = value': " + trim(line));
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    auto it = setters.find(key);
    require(it != setters.end(), ErrorCode::InvalidArgument, "unknown config key: " + key);
    it->second(key, value);
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorCode::Io, "cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  TrainConfig cfg = parse_config_text(ss.str());

  // A relative weights file that is not present from the working directory
  // is looked up under ENLIGHTEN_WEIGHTS_DIR, so one shared weights cache
  // can serve configs living anywhere.
  if (!cfg.extractor_weights.empty()) {
    namespace stdfs = std::filesystem;
    stdfs::path w(cfg.extractor_weights);
    const char* base = std::getenv("ENLIGHTEN_WEIGHTS_DIR");
    if (w.is_relative() && !stdfs::exists(w) && base && base[0]) {
      stdfs::path candidate = stdfs::path(base) / w;
      if (stdfs::exists(candidate)) cfg.extractor_weights = candidate.string();
    }
  }
  return cfg;
}

}  // namespace enlighten
