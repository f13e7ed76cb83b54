#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ubd/geometry.hpp"
#include "ubd/grid.hpp"

namespace ubd::io {

namespace fs = std::filesystem;

/// 16-bit binary PGM (P5, maxval 65535) holding millimeters; 0 = invalid. Returned grid is in meters.
[[nodiscard]] Grid<float> read_depth_pgm(const fs::path& path);
/// Writes meters as rounded millimeters; values outside (0, 65.535] m are written as 0.
void write_depth_pgm(const fs::path& path, const Grid<float>& meters);

/// Raw little-endian float32 meters with a sidecar "<path>.hdr" key-value file giving width and height.
[[nodiscard]] Grid<float> read_depth_raw(const fs::path& path);
void write_depth_raw(const fs::path& path, const Grid<float>& meters);

/// 8-bit binary PPM (P6).
[[nodiscard]] Grid<Rgb8> read_ppm(const fs::path& path);
void write_ppm(const fs::path& path, const Grid<Rgb8>& image);

/// Key-value text: one "key value" (or "key = value") pair per line, '#' starts a comment.
[[nodiscard]] CameraIntrinsics read_intrinsics(const fs::path& path);
void write_intrinsics(const fs::path& path, const CameraIntrinsics& k);

[[nodiscard]] std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);
[[nodiscard]] std::vector<std::uint8_t> read_bytes(const fs::path& path);
void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes);

/// A depth frame stored in a frame directory: depth_NNNNNN.pgm (or .raw) plus optional rgb_NNNNNN.ppm.
struct FrameFile {
  std::int64_t frame_id = 0;
  fs::path depth;
  fs::path rgb;  ///< empty when absent
};

/// Lists the frames in a directory sorted by frame id.
[[nodiscard]] std::vector<FrameFile> list_frames(const fs::path& dir);
[[nodiscard]] DepthFrame load_frame(const FrameFile& file, const CameraIntrinsics& k);
/// Writes depth_NNNNNN.pgm and, when present, rgb_NNNNNN.ppm.
void save_frame(const fs::path& dir, const DepthFrame& frame);
[[nodiscard]] std::string frame_stem(std::int64_t frame_id);

}  // namespace ubd::io
