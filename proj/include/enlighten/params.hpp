#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "enlighten/tensor.hpp"

namespace enlighten {

// Ordered, named parameter set for one network. Running statistics live here
// too, flagged non-trainable so optimizers and gradient checks skip them.
struct ParamEntry {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t, bool trainable = true);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  size_t size() const { return entries_.size(); }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::vector<ParamEntry>& entries() { return entries_; }

  void zero_grad();
  void set_requires_grad(bool on);  // trainable entries only
  bool all_finite() const;
  int64_t trainable_count() const;

  // Deep value copy (no graph, no grads); used for snapshots and tests.
  ParamStore clone() const;
  // Overwrites values entry-by-entry; shapes must match.
  void copy_values_from(const ParamStore& other);

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// Flat container for named double arrays plus a JSON meta block. One format
// serves checkpoints, extractor weights and quality-model files:
//   magic "EGARCH01" | u32 LE manifest length | manifest JSON | raw arrays
// Arrays are IEEE-754 doubles, little-endian, in manifest order.
struct NamedArray {
  std::string name;
  Shape4 shape;
  bool trainable = true;
  std::vector<double> data;
};

struct Archive {
  nlohmann::json meta;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

void write_archive(const std::string& path, const Archive& a);  // atomic
Archive read_archive(const std::string& path);

// Bridges between stores and archives; `prefix` namespaces multiple networks
// inside one file. Loading is strict: missing, extra, or reshaped arrays
// under the prefix raise errors naming the offending array.
void store_to_archive(const ParamStore& ps, const std::string& prefix, Archive& a);
void store_from_archive(ParamStore& ps, const std::string& prefix, const Archive& a);

}  // namespace enlighten
