#include "dehaze/image_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "dehaze/error.hpp"

namespace dehaze {
namespace {

// Netpbm header token: whitespace-separated, '#' starts a comment to EOL.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

int parse_int(std::istream& in, const std::string& path, const char* what) {
  const std::string tok = next_token(in);
  ensure(!tok.empty(), path + ": truncated header (" + what + ")");
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw Error(path + ": bad header value for " + what + ": '" + tok + "'");
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  ensure(in.good(), path.string() + ": cannot open for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  ensure(out.good(), path.string() + ": cannot open for writing");
  return out;
}

void put_u32le(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32le(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  ensure(in.gcount() == 4, path + ": truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

Image<float> load_ppm(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  const std::string p = path.string();
  ensure(next_token(in) == "P6", p + ": not a binary PPM (P6) file");
  const int w = parse_int(in, p, "width");
  const int h = parse_int(in, p, "height");
  const int maxval = parse_int(in, p, "maxval");
  ensure(w > 0 && h > 0, p + ": non-positive dimensions");
  ensure(maxval == 255, p + ": unsupported bit depth (maxval " + std::to_string(maxval) + ")");
  std::vector<unsigned char> raw(static_cast<std::size_t>(h) * w * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  ensure(in.gcount() == static_cast<std::streamsize>(raw.size()), p + ": truncated pixel data");
  Image<float> img(h, w);
  for (std::size_t i = 0; i < raw.size(); ++i)
    img.values[i] = static_cast<float>(raw[i]) / 255.0f;
  return img;
}

void save_ppm(const std::filesystem::path& path, const Image<float>& img) {
  validate_image(img, "save_ppm");
  std::ofstream out = open_out(path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.values.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<unsigned char>(std::lround(img.values[i] * 255.0f));
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  ensure(out.good(), path.string() + ": write failed");
}

Plane<float> load_pgm(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  const std::string p = path.string();
  ensure(next_token(in) == "P5", p + ": not a binary PGM (P5) file");
  const int w = parse_int(in, p, "width");
  const int h = parse_int(in, p, "height");
  const int maxval = parse_int(in, p, "maxval");
  ensure(w > 0 && h > 0, p + ": non-positive dimensions");
  ensure(maxval == 255 || maxval == 65535,
         p + ": unsupported bit depth (maxval " + std::to_string(maxval) + ")");
  Plane<float> out(h, w);
  if (maxval == 255) {
    std::vector<unsigned char> raw(static_cast<std::size_t>(h) * w);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    ensure(in.gcount() == static_cast<std::streamsize>(raw.size()), p + ": truncated pixel data");
    for (std::size_t i = 0; i < raw.size(); ++i) out.values[i] = static_cast<float>(raw[i]);
  } else {
    // 16-bit PGM samples are big-endian per the Netpbm convention.
    std::vector<unsigned char> raw(static_cast<std::size_t>(h) * w * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    ensure(in.gcount() == static_cast<std::streamsize>(raw.size()), p + ": truncated pixel data");
    for (std::size_t i = 0; i < out.values.size(); ++i)
      out.values[i] = static_cast<float>((static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1]);
  }
  return out;
}

void save_pgm16(const std::filesystem::path& path, const Plane<float>& raw_counts) {
  std::ofstream out = open_out(path);
  out << "P5\n" << raw_counts.width << " " << raw_counts.height << "\n65535\n";
  std::vector<unsigned char> raw(raw_counts.values.size() * 2);
  for (std::size_t i = 0; i < raw_counts.values.size(); ++i) {
    const float v = raw_counts.values[i];
    ensure(std::isfinite(v) && v >= 0.0f && v <= 65535.0f,
           path.string() + ": value out of 16-bit range");
    const auto q = static_cast<std::uint16_t>(std::lround(v));
    raw[2 * i] = static_cast<unsigned char>(q >> 8);
    raw[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  ensure(out.good(), path.string() + ": write failed");
}

Plane<float> load_depth_raw(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  const std::string p = path.string();
  char magic[4];
  in.read(magic, 4);
  ensure(in.gcount() == 4 && std::string(magic, 4) == "DPF1", p + ": not a DPF1 depth file");
  const auto h = static_cast<int>(get_u32le(in, p));
  const auto w = static_cast<int>(get_u32le(in, p));
  ensure(h > 0 && w > 0, p + ": non-positive dimensions");
  Plane<float> out(h, w);
  std::vector<unsigned char> raw(static_cast<std::size_t>(h) * w * 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  ensure(in.gcount() == static_cast<std::streamsize>(raw.size()), p + ": truncated file");
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * i]) |
                               (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
                               (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
                               (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
    float f;
    static_assert(sizeof(f) == 4);
    std::memcpy(&f, &bits, 4);
    out.values[i] = f;
  }
  return out;
}

void save_depth_raw(const std::filesystem::path& path, const Plane<float>& depth) {
  std::ofstream out = open_out(path);
  out.write("DPF1", 4);
  put_u32le(out, static_cast<std::uint32_t>(depth.height));
  put_u32le(out, static_cast<std::uint32_t>(depth.width));
  for (float v : depth.values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32le(out, bits);
  }
  ensure(out.good(), path.string() + ": write failed");
}

Plane<float> load_depth(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm") return load_pgm(path);
  if (ext == ".dpf") return load_depth_raw(path);
  throw Error(path.string() + ": unsupported depth format (expected .pgm or .dpf)");
}

}  // namespace dehaze
