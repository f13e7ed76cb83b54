#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ubd/grid.hpp"

namespace ubd {

struct GtBox {
  Rect box;
  bool ignore = false;  ///< matches to this box are neither TP nor FP
  bool operator==(const GtBox&) const = default;
};

struct GroundTruthFrame {
  std::int64_t frame_id = 0;
  std::vector<GtBox> boxes;
  bool operator==(const GroundTruthFrame&) const = default;
};

using GroundTruthSet = std::vector<GroundTruthFrame>;

/// One line per frame: {"frame_id": N, "boxes": [{"x","y","w","h","ignore"}]}.
[[nodiscard]] std::string ground_truth_to_jsonl(const GroundTruthSet& gt);
/// Throws FormatError on malformed lines, duplicate frame ids or non-positive boxes.
[[nodiscard]] GroundTruthSet ground_truth_from_jsonl(const std::string& text);

/// Parses an ETH-style .idl annotation file: lines of the form
///   "image_name": (x1, y1, x2, y2), (x1, y1, x2, y2);
/// Frame ids are assigned by line order starting at first_id. Boxes with a negative coordinate pair order are
/// normalized; boxes smaller than min_height pixels are flagged ignore.
[[nodiscard]] GroundTruthSet import_eth_idl(const std::string& text, std::int64_t first_id = 0, int min_height = 0);

}  // namespace ubd
