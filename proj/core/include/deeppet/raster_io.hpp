#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "deeppet/raster.hpp"

namespace deeppet {

/// Raised for unreadable, unwritable or malformed data files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sidecar file accompanying a raster: `<raster>.json`.
std::filesystem::path sidecar_path(const std::filesystem::path& raster);

/// Writes values as little-endian float32 (row-major) plus a JSON sidecar.
/// `meta` is merged into the sidecar; "shape", "dtype" and "byte_order" are
/// always set.
template <class Tag>
void write_raster(const std::filesystem::path& path, const Raster<Tag>& raster, nlohmann::json meta = {});

template <class Tag>
Raster<Tag> read_raster(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// Min-max scaled 16-bit greyscale exports. Returns the (min, max) used so
/// it can be recorded next to the image.
std::pair<double, double> write_pgm16(const std::filesystem::path& path, const Image& img);
std::pair<double, double> write_png16(const std::filesystem::path& path, const Image& img);

}  // namespace deeppet
