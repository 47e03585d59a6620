#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lowlight/grid.hpp"

namespace lowlight {

/// 8-bit interleaved pixels as stored on disk.
struct ByteImage {
  Index height = 0;
  Index width = 0;
  Index channels = 0;
  std::vector<std::uint8_t> data;
};

/// Reads an 8-bit PNG. Palette images are expanded to RGB, low bit-depth
/// gray is expanded to 8 bits, and any alpha channel is dropped, so the
/// result has 1 or 3 channels. 16-bit files are rejected.
ByteImage read_png_bytes(const std::filesystem::path& path);

/// Writes 1 (gray) or 3 (RGB) channel 8-bit data.
void write_png_bytes(const std::filesystem::path& path, const ByteImage& img);

template <typename Scalar = double>
ImageGrid<Scalar> read_png(const std::filesystem::path& path) {
  const ByteImage raw = read_png_bytes(path);
  return from_bytes<Scalar>(raw.data, raw.height, raw.width, raw.channels);
}

template <typename Scalar>
void write_png(const std::filesystem::path& path, const ImageGrid<Scalar>& img) {
  write_png_bytes(path, ByteImage{img.height(), img.width(), img.channels(), to_bytes(img)});
}

/// Gray PNG as a single-channel field (byte / 255).
template <typename Scalar = double>
Plane<Scalar> read_png_plane(const std::filesystem::path& path) {
  const ByteImage raw = read_png_bytes(path);
  if (raw.channels != 1) throw DimensionError("expected a single-channel PNG: " + path.string());
  return from_bytes<Scalar>(raw.data, raw.height, raw.width, 1).plane();
}

template <typename Scalar>
void write_png_plane(const std::filesystem::path& path, const Plane<Scalar>& plane) {
  write_png_bytes(path, ByteImage{plane.rows(), plane.cols(), 1, plane_to_bytes(plane)});
}

}  // namespace lowlight
