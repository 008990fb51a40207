#include "deeppet/raster_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <zlib.h>

namespace deeppet {

namespace fs = std::filesystem;

fs::path sidecar_path(const fs::path& raster) {
  fs::path p = raster;
  p += ".json";
  return p;
}

namespace {

void put_le32(std::vector<char>& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float get_le32(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

std::vector<std::uint16_t> scale16(const Image& img, double& lo, double& hi) {
  lo = img.size() ? *std::min_element(img.values().begin(), img.values().end()) : 0.0;
  hi = img.size() ? *std::max_element(img.values().begin(), img.values().end()) : 0.0;
  const double span = hi > lo ? hi - lo : 1.0;
  std::vector<std::uint16_t> px(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    px[i] = static_cast<std::uint16_t>(std::clamp((img[i] - lo) / span, 0.0, 1.0) * 65535.0 + 0.5);
  }
  return px;
}

void png_chunk(std::ofstream& os, const char* type, const std::vector<unsigned char>& data) {
  auto be32 = [&](std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                static_cast<char>(v)};
    os.write(b.data(), 4);
  };
  be32(static_cast<std::uint32_t>(data.size()));
  os.write(type, 4);
  if (!data.empty()) os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  be32(static_cast<std::uint32_t>(crc));
}

}  // namespace

template <class Tag>
void write_raster(const fs::path& path, const Raster<Tag>& raster, nlohmann::json meta) {
  std::vector<char> bytes;
  bytes.reserve(raster.size() * 4);
  for (double v : raster.values()) put_le32(bytes, static_cast<float>(v));
  {
    auto os = open_out(path);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw DataError("short write to " + path.string());
  }
  if (meta.is_null()) meta = nlohmann::json::object();
  meta["shape"] = {raster.rows(), raster.cols()};
  meta["dtype"] = "float32";
  meta["byte_order"] = "little";
  write_json(sidecar_path(path), meta);
}

template <class Tag>
Raster<Tag> read_raster(const fs::path& path, nlohmann::json* meta) {
  const nlohmann::json side = read_json(sidecar_path(path));
  if (!side.contains("shape") || side["shape"].size() != 2) throw DataError("sidecar without shape: " + path.string());
  const int rows = side["shape"][0].get<int>();
  const int cols = side["shape"][1].get<int>();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (bytes.size() != count * 4) throw DataError("raster size does not match sidecar shape: " + path.string());
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = get_le32(bytes.data() + 4 * i);
  if (meta) *meta = side;
  return Raster<Tag>(rows, cols, std::move(values));
}

template void write_raster<ImageTag>(const fs::path&, const Image&, nlohmann::json);
template void write_raster<SinogramTag>(const fs::path&, const Sinogram&, nlohmann::json);
template Image read_raster<ImageTag>(const fs::path&, nlohmann::json*);
template Sinogram read_raster<SinogramTag>(const fs::path&, nlohmann::json*);

nlohmann::json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  auto os = open_out(path);
  os << doc.dump(2) << '\n';
  if (!os) throw DataError("short write to " + path.string());
}

std::pair<double, double> write_pgm16(const fs::path& path, const Image& img) {
  double lo = 0.0, hi = 0.0;
  const auto px = scale16(img, lo, hi);
  auto os = open_out(path);
  os << "P5\n" << img.cols() << ' ' << img.rows() << "\n65535\n";
  for (std::uint16_t v : px) {
    const char b[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    os.write(b, 2);
  }
  return {lo, hi};
}

std::pair<double, double> write_png16(const fs::path& path, const Image& img) {
  double lo = 0.0, hi = 0.0;
  const auto px = scale16(img, lo, hi);
  std::vector<unsigned char> raw;
  raw.reserve(px.size() * 2 + static_cast<std::size_t>(img.rows()));
  for (int r = 0; r < img.rows(); ++r) {
    raw.push_back(0);  // filter: none
    for (int c = 0; c < img.cols(); ++c) {
      const std::uint16_t v = px[static_cast<std::size_t>(r) * img.cols() + c];
      raw.push_back(static_cast<unsigned char>(v >> 8));
      raw.push_back(static_cast<unsigned char>(v & 0xff));
    }
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw DataError("zlib compression failed");
  }
  z.resize(zlen);

  auto os = open_out(path);
  const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  os.write(reinterpret_cast<const char*>(sig), 8);
  std::vector<unsigned char> ihdr;
  auto be = [&](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) ihdr.push_back(static_cast<unsigned char>(v >> s));
  };
  be(static_cast<std::uint32_t>(img.cols()));
  be(static_cast<std::uint32_t>(img.rows()));
  ihdr.insert(ihdr.end(), {16, 0, 0, 0, 0});  // 16-bit greyscale, deflate, no filter, no interlace
  png_chunk(os, "IHDR", ihdr);
  png_chunk(os, "IDAT", z);
  png_chunk(os, "IEND", {});
  return {lo, hi};
}

}  // namespace deeppet
