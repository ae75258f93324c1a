#include "enlighten/params.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

namespace enlighten {

static_assert(std::numeric_limits<double>::is_iec559, "IEEE-754 doubles required");

Tensor& ParamStore::add(const std::string& name, Tensor t, bool trainable) {
  require(!contains(name), ErrorCode::InvalidArgument, "duplicate parameter name: " + name);
  index_[name] = entries_.size();
  entries_.push_back({name, std::move(t), trainable});
  return entries_.back().tensor;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  require(it != index_.end(), ErrorCode::NotFound, "unknown parameter: " + name);
  return entries_[it->second].tensor;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), ErrorCode::NotFound, "unknown parameter: " + name);
  return entries_[it->second].tensor;
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) != 0; }

void ParamStore::zero_grad() {
  for (auto& e : entries_)
    if (e.trainable) e.tensor.zero_grad();
}

void ParamStore::set_requires_grad(bool on) {
  for (auto& e : entries_)
    if (e.trainable) e.tensor.set_requires_grad(on);
}

bool ParamStore::all_finite() const {
  for (const auto& e : entries_)
    for (double v : e.tensor.data())
      if (!std::isfinite(v)) return false;
  return true;
}

int64_t ParamStore::trainable_count() const {
  int64_t n = 0;
  for (const auto& e : entries_)
    if (e.trainable) n += e.tensor.numel();
  return n;
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& e : entries_) out.add(e.name, e.tensor.detach(), e.trainable);
  return out;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  require(other.entries_.size() == entries_.size(), ErrorCode::ShapeMismatch,
          "parameter store layout mismatch");
  for (auto& e : entries_) {
    const Tensor& src = other.at(e.name);
    require(src.shape() == e.tensor.shape(), ErrorCode::ShapeMismatch,
            "parameter shape mismatch: " + e.name);
    e.tensor.data() = src.data();
  }
}

// ---------------------------------------------------------------------------
// archive

namespace {

constexpr char kMagic[8] = {'E', 'G', 'A', 'R', 'C', 'H', '0', '1'};

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

}  // namespace

const NamedArray* Archive::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

void write_archive(const std::string& path, const Archive& a) {
  nlohmann::json manifest;
  manifest["meta"] = a.meta;
  auto& list = manifest["arrays"] = nlohmann::json::array();
  for (const auto& arr : a.arrays) {
    require(static_cast<int64_t>(arr.data.size()) == arr.shape.numel(), ErrorCode::ShapeMismatch,
            "archive array size mismatch: " + arr.name);
    list.push_back({{"name", arr.name},
                    {"shape", {arr.shape.n, arr.shape.c, arr.shape.h, arr.shape.w}},
                    {"trainable", arr.trainable}});
  }
  std::string manifest_text = manifest.dump();

  std::string blob;
  blob.reserve(16 + manifest_text.size());
  blob.append(kMagic, sizeof(kMagic));
  put_u32le(blob, static_cast<uint32_t>(manifest_text.size()));
  blob += manifest_text;
  for (const auto& arr : a.arrays)
    for (double v : arr.data) put_f64le(blob, v);

  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    require(f.good(), ErrorCode::Io, "cannot open for writing: " + tmp);
    f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    require(f.good(), ErrorCode::Io, "write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::Io, "cannot move archive into place: " + path);
}

Archive read_archive(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::Io, "cannot open: " + path);
  std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  require(blob.size() >= 12, ErrorCode::Corrupt, "archive truncated: " + path);
  require(std::memcmp(blob.data(), kMagic, sizeof(kMagic)) == 0, ErrorCode::Corrupt,
          "not a parameter archive: " + path);
  const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
  uint32_t mlen = get_u32le(p + 8);
  require(blob.size() >= 12 + static_cast<size_t>(mlen), ErrorCode::Corrupt,
          "archive manifest truncated: " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(blob.substr(12, mlen));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Corrupt, "archive manifest is not valid JSON: " + std::string(e.what()));
  }
  require(manifest.contains("arrays") && manifest["arrays"].is_array(), ErrorCode::Corrupt,
          "archive manifest missing array list");

  Archive out;
  out.meta = manifest.value("meta", nlohmann::json::object());
  size_t off = 12 + mlen;
  for (const auto& entry : manifest["arrays"]) {
    NamedArray arr;
    try {
      arr.name = entry.at("name").get<std::string>();
      auto sh = entry.at("shape");
      arr.shape = {sh.at(0).get<int>(), sh.at(1).get<int>(), sh.at(2).get<int>(),
                   sh.at(3).get<int>()};
      arr.trainable = entry.value("trainable", true);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Corrupt, "archive manifest entry malformed: " + std::string(e.what()));
    }
    int64_t n = arr.shape.numel();
    require(n >= 0 && off + static_cast<size_t>(n) * 8 <= blob.size(), ErrorCode::Corrupt,
            "archive truncated in array: " + arr.name);
    arr.data.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
      arr.data[static_cast<size_t>(i)] =
          get_f64le(reinterpret_cast<const unsigned char*>(blob.data()) + off + i * 8);
    off += static_cast<size_t>(n) * 8;
    out.arrays.push_back(std::move(arr));
  }
  require(off == blob.size(), ErrorCode::Corrupt, "archive has trailing bytes: " + path);
  return out;
}

void store_to_archive(const ParamStore& ps, const std::string& prefix, Archive& a) {
  for (const auto& e : ps.entries())
    a.arrays.push_back({prefix + e.name, e.tensor.shape(), e.trainable, e.tensor.data()});
}

void store_from_archive(ParamStore& ps, const std::string& prefix, const Archive& a) {
  size_t used = 0;
  for (auto& e : ps.entries()) {
    const NamedArray* arr = a.find(prefix + e.name);
    require(arr != nullptr, ErrorCode::Corrupt, "archive missing array: " + prefix + e.name);
    require(arr->shape == e.tensor.shape(), ErrorCode::ShapeMismatch,
            "archive array shape mismatch: " + prefix + e.name + " is " + arr->shape.str() +
                ", expected " + e.tensor.shape().str());
    e.tensor.data() = arr->data;
    ++used;
  }
  // reject arrays under this prefix that the store does not know
  for (const auto& arr : a.arrays) {
    if (arr.name.rfind(prefix, 0) != 0) continue;
    if (!ps.contains(arr.name.substr(prefix.size())))
      fail(ErrorCode::Corrupt, "archive has unexpected array: " + arr.name);
  }
  (void)used;
}

}  // namespace enlighten
