#include "ubd/ground_truth.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <regex>
#include <set>
#include <sstream>

#include "ubd/error.hpp"

namespace ubd {

std::string ground_truth_to_jsonl(const GroundTruthSet& gt) {
  std::string out;
  for (const auto& f : gt) {
    nlohmann::ordered_json j;
    j["frame_id"] = f.frame_id;
    auto boxes = nlohmann::ordered_json::array();
    for (const auto& b : f.boxes) {
      nlohmann::ordered_json jb;
      jb["x"] = b.box.x;
      jb["y"] = b.box.y;
      jb["w"] = b.box.w;
      jb["h"] = b.box.h;
      jb["ignore"] = b.ignore;
      boxes.push_back(jb);
    }
    j["boxes"] = boxes;
    out += j.dump();
    out += '\n';
  }
  return out;
}

GroundTruthSet ground_truth_from_jsonl(const std::string& text) {
  GroundTruthSet out;
  std::set<std::int64_t> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "ground truth line " + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      GroundTruthFrame f;
      f.frame_id = j.at("frame_id").get<std::int64_t>();
      if (!seen.insert(f.frame_id).second) {
        throw Error(ErrorCode::FormatError, where + ": duplicate frame id " + std::to_string(f.frame_id));
      }
      for (const auto& jb : j.at("boxes")) {
        GtBox b;
        b.box = {jb.at("x").get<int>(), jb.at("y").get<int>(), jb.at("w").get<int>(), jb.at("h").get<int>()};
        b.ignore = jb.value("ignore", false);
        if (b.box.empty()) throw Error(ErrorCode::FormatError, where + ": box with non-positive size");
        f.boxes.push_back(b);
      }
      out.push_back(std::move(f));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::FormatError, where + ": " + e.what());
    }
  }
  return out;
}

GroundTruthSet import_eth_idl(const std::string& text, std::int64_t first_id, int min_height) {
  static const std::regex box_re(R"(\(\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*\))");
  GroundTruthSet out;
  std::istringstream in(text);
  std::string line;
  std::int64_t id = first_id;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (line.find('"') == std::string::npos) continue;
    GroundTruthFrame f;
    f.frame_id = id++;
    if (colon != std::string::npos) {
      const std::string rest = line.substr(colon + 1);
      for (auto it = std::sregex_iterator(rest.begin(), rest.end(), box_re); it != std::sregex_iterator(); ++it) {
        const int x1 = std::stoi((*it)[1]), y1 = std::stoi((*it)[2]);
        const int x2 = std::stoi((*it)[3]), y2 = std::stoi((*it)[4]);
        GtBox b;
        b.box = {std::min(x1, x2), std::min(y1, y2), std::abs(x2 - x1), std::abs(y2 - y1)};
        if (b.box.empty()) continue;
        b.ignore = b.box.h < min_height;
        f.boxes.push_back(b);
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace ubd
