#include "ubd/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "ubd/error.hpp"

namespace ubd::io {

namespace {

[[noreturn]] void format_error(const fs::path& path, const std::string& what) {
  throw Error(ErrorCode::FormatError, path.string() + ": " + what);
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string netpbm_token(std::istream& in) {
  std::string tok;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

struct NetpbmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
};

NetpbmHeader read_header(std::istream& in, const fs::path& path, const char* magic) {
  if (netpbm_token(in) != magic) format_error(path, std::string("expected ") + magic + " header");
  NetpbmHeader h;
  try {
    h.width = std::stoi(netpbm_token(in));
    h.height = std::stoi(netpbm_token(in));
    h.maxval = std::stoi(netpbm_token(in));
  } catch (const std::exception&) {
    format_error(path, "malformed header");
  }
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535) format_error(path, "bad header values");
  return h;
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), '=', ' ');
    std::istringstream ls(line);
    std::string key, value;
    if (!(ls >> key)) continue;
    if (!(ls >> value)) format_error(path, "missing value for key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

double require_number(const std::map<std::string, std::string>& kv, const std::string& key, const fs::path& path) {
  auto it = kv.find(key);
  if (it == kv.end()) format_error(path, "missing key '" + key + "'");
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    format_error(path, "key '" + key + "' is not a number");
  }
}

}  // namespace

std::string read_text(const fs::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  const std::string s = read_text(path);
  return {s.begin(), s.end()};
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  auto out = open_out(path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

Grid<float> read_depth_pgm(const fs::path& path) {
  auto in = open_in(path);
  const auto h = read_header(in, path, "P5");
  Grid<float> depth(h.height, h.width, 0.0f);
  const bool wide = h.maxval > 255;
  std::vector<unsigned char> buf(static_cast<std::size_t>(h.width) * h.height * (wide ? 2 : 1));
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    format_error(path, "truncated pixel data");
  }
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const unsigned mm = wide ? (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1] : buf[i];
    depth.data()[i] = static_cast<float>(mm) * 0.001f;
  }
  return depth;
}

void write_depth_pgm(const fs::path& path, const Grid<float>& meters) {
  auto out = open_out(path);
  out << "P5\n" << meters.cols() << ' ' << meters.rows() << "\n65535\n";
  std::vector<unsigned char> buf(meters.size() * 2);
  for (std::size_t i = 0; i < meters.size(); ++i) {
    const float m = meters.data()[i];
    long mm = std::lround(static_cast<double>(m) * 1000.0);
    if (!(m > 0.0f) || mm > 65535) mm = 0;
    buf[2 * i] = static_cast<unsigned char>((mm >> 8) & 0xff);
    buf[2 * i + 1] = static_cast<unsigned char>(mm & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Grid<float> read_depth_raw(const fs::path& path) {
  fs::path hdr = path;
  hdr += ".hdr";
  const auto kv = read_key_values(hdr);
  const int w = static_cast<int>(require_number(kv, "width", hdr));
  const int h = static_cast<int>(require_number(kv, "height", hdr));
  if (w <= 0 || h <= 0) format_error(hdr, "bad dimensions");
  auto in = open_in(path);
  Grid<float> depth(h, w, 0.0f);
  std::vector<unsigned char> buf(depth.size() * 4);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    format_error(path, "truncated float data");
  }
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(buf[4 * i]) | (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                               (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                               (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
    float v = 0.0f;
    std::memcpy(&v, &bits, sizeof v);
    depth.data()[i] = std::isfinite(v) && v > 0.0f ? v : 0.0f;
  }
  return depth;
}

void write_depth_raw(const fs::path& path, const Grid<float>& meters) {
  std::vector<std::uint8_t> buf(meters.size() * 4);
  for (std::size_t i = 0; i < meters.size(); ++i) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &meters.data()[i], sizeof bits);
    for (int b = 0; b < 4; ++b) buf[4 * i + b] = static_cast<std::uint8_t>((bits >> (8 * b)) & 0xff);
  }
  write_bytes(path, buf);
  fs::path hdr = path;
  hdr += ".hdr";
  write_text(hdr, "width " + std::to_string(meters.cols()) + "\nheight " + std::to_string(meters.rows()) +
                      "\nformat float32_le_meters\n");
}

Grid<Rgb8> read_ppm(const fs::path& path) {
  auto in = open_in(path);
  const auto h = read_header(in, path, "P6");
  if (h.maxval > 255) format_error(path, "only 8-bit PPM is supported");
  Grid<Rgb8> img(h.height, h.width);
  std::vector<unsigned char> buf(img.size() * 3);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    format_error(path, "truncated pixel data");
  }
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = {buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]};
  return img;
}

void write_ppm(const fs::path& path, const Grid<Rgb8>& image) {
  auto out = open_out(path);
  out << "P6\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  std::vector<unsigned char> buf(image.size() * 3);
  for (std::size_t i = 0; i < image.size(); ++i) {
    buf[3 * i] = image.data()[i].r;
    buf[3 * i + 1] = image.data()[i].g;
    buf[3 * i + 2] = image.data()[i].b;
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

CameraIntrinsics read_intrinsics(const fs::path& path) {
  const auto kv = read_key_values(path);
  for (const auto& [key, value] : kv) {
    static const char* known[] = {"fx", "fy", "cx", "cy", "width", "height"};
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return key == k; })) {
      format_error(path, "unknown key '" + key + "'");
    }
  }
  CameraIntrinsics k;
  k.fx = require_number(kv, "fx", path);
  k.fy = require_number(kv, "fy", path);
  k.cx = require_number(kv, "cx", path);
  k.cy = require_number(kv, "cy", path);
  k.width = static_cast<int>(require_number(kv, "width", path));
  k.height = static_cast<int>(require_number(kv, "height", path));
  k.validate();
  return k;
}

void write_intrinsics(const fs::path& path, const CameraIntrinsics& k) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "fx " << k.fx << "\nfy " << k.fy << "\ncx " << k.cx << "\ncy " << k.cy << "\nwidth " << k.width
     << "\nheight " << k.height << "\n";
  write_text(path, ss.str());
}

std::string frame_stem(std::int64_t frame_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06lld", static_cast<long long>(frame_id));
  return buf;
}

std::vector<FrameFile> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  std::map<std::int64_t, FrameFile> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    const auto ext = entry.path().extension().string();
    if (name.rfind("depth_", 0) != 0 || (ext != ".pgm" && ext != ".raw")) continue;
    const std::string digits = entry.path().stem().string().substr(6);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) continue;
    const std::int64_t id = std::stoll(digits);
    auto& f = frames[id];
    f.frame_id = id;
    f.depth = entry.path();
    const auto rgb = dir / ("rgb_" + digits + ".ppm");
    if (fs::exists(rgb)) f.rgb = rgb;
  }
  std::vector<FrameFile> out;
  out.reserve(frames.size());
  for (auto& [id, f] : frames) out.push_back(f);
  return out;
}

DepthFrame load_frame(const FrameFile& file, const CameraIntrinsics& k) {
  DepthFrame frame;
  frame.intrinsics = k;
  frame.frame_id = file.frame_id;
  frame.depth = file.depth.extension() == ".raw" ? read_depth_raw(file.depth) : read_depth_pgm(file.depth);
  if (!file.rgb.empty()) frame.rgb = read_ppm(file.rgb);
  frame.validate();
  return frame;
}

void save_frame(const fs::path& dir, const DepthFrame& frame) {
  const auto stem = frame_stem(frame.frame_id);
  write_depth_pgm(dir / ("depth_" + stem + ".pgm"), frame.depth);
  if (frame.rgb) write_ppm(dir / ("rgb_" + stem + ".ppm"), *frame.rgb);
}

}  // namespace ubd::io
