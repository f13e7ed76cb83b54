#include "ubd/model_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <nlohmann/json.hpp>

#include "ubd/error.hpp"
#include "ubd/io.hpp"

namespace ubd {

static_assert(std::endian::native == std::endian::little, "container IO assumes a little-endian host");

namespace {

constexpr std::string_view kTemplateMagic = "UBDTPL";

template <typename T>
void append(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace

void ByteWriter::magic(std::string_view tag) {
  char buf[8] = {};
  std::memcpy(buf, tag.data(), std::min<std::size_t>(tag.size(), 8));
  bytes_.insert(bytes_.end(), buf, buf + 8);
}
void ByteWriter::u32(std::uint32_t v) { append(bytes_, v); }
void ByteWriter::i32(std::int32_t v) { append(bytes_, v); }
void ByteWriter::f32(float v) { append(bytes_, v); }
void ByteWriter::f64(double v) { append(bytes_, v); }

void ByteWriter::grid(const Grid<double>& values, const Grid<std::uint8_t>* valid) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const bool ok = valid == nullptr || valid->data()[i] != 0;
    f32(ok ? static_cast<float>(values.data()[i]) : std::numeric_limits<float>::quiet_NaN());
  }
}

const std::uint8_t* ByteReader::take(std::size_t n) {
  if (bytes_.size() - pos_ < n) throw Error(ErrorCode::FormatError, "container truncated");
  const auto* p = bytes_.data() + pos_;
  pos_ += n;
  return p;
}

void ByteReader::expect_magic(std::string_view tag) {
  char want[8] = {};
  std::memcpy(want, tag.data(), std::min<std::size_t>(tag.size(), 8));
  if (std::memcmp(take(8), want, 8) != 0) {
    throw Error(ErrorCode::FormatError, "bad container magic (expected " + std::string(tag) + ")");
  }
}

template <typename T>
static T read_as(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

std::uint32_t ByteReader::u32() { return read_as<std::uint32_t>(take(4)); }
std::int32_t ByteReader::i32() { return read_as<std::int32_t>(take(4)); }
float ByteReader::f32() { return read_as<float>(take(4)); }
double ByteReader::f64() { return read_as<double>(take(8)); }

void ByteReader::grid(int rows, int cols, Grid<double>& values, Grid<std::uint8_t>* valid) {
  values = Grid<double>(rows, cols, 0.0);
  if (valid != nullptr) *valid = Grid<std::uint8_t>(rows, cols, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = f32();
    if (std::isnan(v)) {
      if (valid == nullptr) throw Error(ErrorCode::FormatError, "unexpected NaN in container grid");
      continue;
    }
    values.data()[i] = v;
    if (valid != nullptr) valid->data()[i] = 1;
  }
}

void ByteReader::expect_end() const {
  if (pos_ != bytes_.size()) throw Error(ErrorCode::FormatError, "trailing bytes in container");
}

// Layout: magic[8] version kind K rows cols n_ranges {lo hi}*n_ranges {n_train values[] weights[]}*K
std::vector<std::uint8_t> encode_template_set(const TemplateSet& set) {
  set.validate();
  ByteWriter w;
  w.magic(kTemplateMagic);
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(set.kind));
  w.u32(static_cast<std::uint32_t>(set.members.size()));
  w.u32(static_cast<std::uint32_t>(set.members[0].tmpl.values.rows()));
  w.u32(static_cast<std::uint32_t>(set.members[0].tmpl.values.cols()));
  w.u32(static_cast<std::uint32_t>(set.ranges.size()));
  for (const auto& r : set.ranges) {
    w.f64(r.lo);
    w.f64(r.hi);
  }
  for (const auto& m : set.members) {
    w.i32(m.tmpl.n_train);
    w.grid(m.tmpl.values, &m.tmpl.valid);
    w.grid(m.weights);
  }
  return w.bytes();
}

TemplateSet decode_template_set(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  r.expect_magic(kTemplateMagic);
  if (const auto v = r.u32(); v != kContainerVersion) {
    throw Error(ErrorCode::FormatError, "unsupported template container version " + std::to_string(v));
  }
  TemplateSet set;
  const auto kind = r.u32();
  if (kind > 2) throw Error(ErrorCode::FormatError, "unknown template kind " + std::to_string(kind));
  set.kind = static_cast<TemplateKind>(kind);
  const auto k = r.u32();
  const auto rows = static_cast<int>(r.u32());
  const auto cols = static_cast<int>(r.u32());
  const auto n_ranges = r.u32();
  if (k == 0 || k > 1024 || rows <= 0 || cols <= 0 || rows > 4096 || cols > 4096 || n_ranges > 1024) {
    throw Error(ErrorCode::FormatError, "implausible template container header");
  }
  for (std::uint32_t i = 0; i < n_ranges; ++i) {
    DistanceRange range;
    range.lo = r.f64();
    range.hi = r.f64();
    set.ranges.push_back(range);
  }
  for (std::uint32_t i = 0; i < k; ++i) {
    WeightedTemplate m;
    m.tmpl.n_train = r.i32();
    r.grid(rows, cols, m.tmpl.values, &m.tmpl.valid);
    r.grid(rows, cols, m.weights);
    set.members.push_back(std::move(m));
  }
  r.expect_end();
  try {
    set.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::FormatError, std::string("invalid template container: ") + e.what());
  }
  return set;
}

std::string template_set_metadata(const TemplateSet& set) {
  nlohmann::ordered_json j;
  j["format"] = "ubd-templates";
  j["version"] = kContainerVersion;
  j["kind"] = template_kind_name(set.kind);
  j["k"] = set.members.size();
  j["rows"] = set.members.empty() ? 0 : set.members[0].tmpl.values.rows();
  j["cols"] = set.members.empty() ? 0 : set.members[0].tmpl.values.cols();
  auto ranges = nlohmann::ordered_json::array();
  for (const auto& r : set.ranges) {
    ranges.push_back({r.lo, std::isinf(r.hi) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(r.hi)});
  }
  j["ranges"] = ranges;
  auto n_train = nlohmann::ordered_json::array();
  for (const auto& m : set.members) n_train.push_back(m.tmpl.n_train);
  j["n_train"] = n_train;
  return j.dump(2) + "\n";
}

void save_template_set(const std::filesystem::path& path, const TemplateSet& set) {
  io::write_bytes(path, encode_template_set(set));
  io::write_text(path.string() + ".json", template_set_metadata(set));
}

TemplateSet load_template_set(const std::filesystem::path& path) { return decode_template_set(io::read_bytes(path)); }

}  // namespace ubd
