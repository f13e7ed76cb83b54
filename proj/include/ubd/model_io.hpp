#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ubd/grid.hpp"
#include "ubd/template_training.hpp"

namespace ubd {

/// Little-endian byte stream writer for the versioned model containers.
class ByteWriter {
 public:
  void magic(std::string_view tag);  ///< exactly 8 bytes, zero padded
  void u32(std::uint32_t v);
  void i32(std::int32_t v);
  void f32(float v);
  void f64(double v);
  /// Row-major float32 grid; invalid pixels (mask 0) are stored as NaN.
  void grid(const Grid<double>& values, const Grid<std::uint8_t>* valid = nullptr);

  [[nodiscard]] const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  std::int32_t i32();
  float f32();
  double f64();
  /// Reads rows x cols float32 values; NaN entries come back as 0 with mask 0.
  void grid(int rows, int cols, Grid<double>& values, Grid<std::uint8_t>* valid = nullptr);
  void expect_end() const;

 private:
  const std::uint8_t* take(std::size_t n);

  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline constexpr std::uint32_t kContainerVersion = 1;

/// Binary template container ("UBDTPL") plus a JSON sidecar at "<path>.json".
/// Values and weights are stored as float32, so a save / load / save cycle is byte-identical.
void save_template_set(const std::filesystem::path& path, const TemplateSet& set);
[[nodiscard]] TemplateSet load_template_set(const std::filesystem::path& path);
[[nodiscard]] std::vector<std::uint8_t> encode_template_set(const TemplateSet& set);
[[nodiscard]] TemplateSet decode_template_set(std::vector<std::uint8_t> bytes);
[[nodiscard]] std::string template_set_metadata(const TemplateSet& set);

}  // namespace ubd
