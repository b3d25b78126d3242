#include "dehaze/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace dehaze {
namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffull));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

bool try_u32(std::ifstream& in, std::uint32_t& v) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
  std::uint32_t v = 0;
  ensure(try_u32(in, v), path + ": truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  ensure(out.good(), path.string() + ": cannot open for writing");
  out.write("DHZ1", 4);
  put_u32(out, ckpt.format_version);
  put_u64(out, ckpt.fingerprint);
  for (const auto& r : ckpt.records) {
    put_u32(out, static_cast<std::uint32_t>(r.name.size()));
    out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put_u32(out, static_cast<std::uint32_t>(r.dims.size()));
    for (auto d : r.dims) put_u32(out, d);
    for (float v : r.data) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(out, bits);
    }
  }
  ensure(out.good(), path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string p = path.string();
  ensure(in.good(), p + ": cannot open checkpoint");
  char magic[4];
  in.read(magic, 4);
  ensure(in.gcount() == 4 && std::string(magic, 4) == "DHZ1",
         p + ": not a DHZ1 checkpoint (bad magic)");
  Checkpoint ckpt;
  ckpt.format_version = get_u32(in, p);
  ensure(ckpt.format_version == 1,
         p + ": unsupported checkpoint version " + std::to_string(ckpt.format_version));
  const std::uint32_t lo = get_u32(in, p);
  const std::uint32_t hi = get_u32(in, p);
  ckpt.fingerprint = static_cast<std::uint64_t>(lo) | (static_cast<std::uint64_t>(hi) << 32);

  std::uint32_t name_len = 0;
  while (try_u32(in, name_len)) {
    CheckpointRecord rec;
    rec.name.resize(name_len);
    in.read(rec.name.data(), name_len);
    ensure(in.gcount() == static_cast<std::streamsize>(name_len), p + ": truncated checkpoint");
    const std::uint32_t ndims = get_u32(in, p);
    ensure(ndims <= 8, p + ": implausible dim count in record " + rec.name);
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < ndims; ++i) {
      rec.dims.push_back(get_u32(in, p));
      count *= rec.dims.back();
    }
    rec.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t bits = get_u32(in, p);
      float v;
      std::memcpy(&v, &bits, 4);
      rec.data[i] = v;
    }
    ckpt.records.push_back(std::move(rec));
  }
  return ckpt;
}

}  // namespace dehaze
