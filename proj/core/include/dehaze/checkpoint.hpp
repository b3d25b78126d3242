#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dehaze/error.hpp"
#include "dehaze/network.hpp"

namespace dehaze {

// Checkpoint file format (all integers little-endian):
//   magic "DHZ1"
//   u32   format version (currently 1)
//   u64   fingerprint of the generator architecture dump
//   repeated records until EOF:
//     u32 name length, name bytes,
//     u32 dim count, u32 dims[k],
//     f32 payload[prod(dims)]
// Records keep their write order, so save -> load -> save is byte-identical.

struct CheckpointRecord {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

struct Checkpoint {
  std::uint32_t format_version = 1;
  std::uint64_t fingerprint = 0;
  std::vector<CheckpointRecord> records;

  const CheckpointRecord* find(const std::string& name) const {
    for (const auto& r : records)
      if (r.name == name) return &r;
    return nullptr;
  }

  void add(std::string name, std::vector<std::uint32_t> dims, std::vector<float> data) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    ensure(n == data.size(), "checkpoint: record " + name + " payload/dims mismatch");
    records.push_back({std::move(name), std::move(dims), std::move(data)});
  }

  void add_scalar(std::string name, float v) { add(std::move(name), {1}, {v}); }

  float scalar(const std::string& name) const {
    const CheckpointRecord* r = find(name);
    ensure(r != nullptr, "checkpoint: missing record " + name);
    ensure(r->data.size() == 1, "checkpoint: record " + name + " is not a scalar");
    return r->data[0];
  }
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Parameters and buffers of a network, stored under <prefix><name>.
template <typename T>
void pack_network(Checkpoint& ckpt, const Network<T>& net, const std::string& prefix) {
  auto put = [&](const NamedTensor<T>& nt) {
    std::vector<std::uint32_t> dims;
    for (int d : nt.value.shape) dims.push_back(static_cast<std::uint32_t>(d));
    std::vector<float> data;
    data.reserve(nt.value.data.size());
    for (T v : nt.value.data) data.push_back(static_cast<float>(v));
    ckpt.add(prefix + nt.name, std::move(dims), std::move(data));
  };
  for (const auto& p : net.params()) put(p);
  for (const auto& b : net.buffers()) put(b);
}

template <typename T>
void unpack_network(const Checkpoint& ckpt, Network<T>& net, const std::string& prefix) {
  auto get = [&](NamedTensor<T>& nt) {
    const CheckpointRecord* r = ckpt.find(prefix + nt.name);
    ensure(r != nullptr, "checkpoint: missing record " + prefix + nt.name);
    ensure(r->data.size() == nt.value.data.size(),
           "checkpoint: record " + prefix + nt.name + " has wrong size");
    for (std::size_t i = 0; i < r->data.size(); ++i)
      nt.value.data[i] = static_cast<T>(r->data[i]);
  };
  for (auto& p : net.params()) get(p);
  for (auto& b : net.buffers()) get(b);
}

}  // namespace dehaze
