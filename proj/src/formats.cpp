#include "sgldreg/formats.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "sgldreg/errors.hpp"

namespace sgldreg {
namespace {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void crc() { u32(checksum(bytes_.data(), bytes_.size())); }

  static std::uint32_t checksum(const std::uint8_t* data, std::size_t n) {
    return std::uint32_t(crc32(crc32(0L, Z_NULL, 0), data, uInt(n)));
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, const char* what) : bytes_(bytes), what_(what) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string(what_) + ": truncated at offset " + std::to_string(pos_) + " (needed " +
                        std::to_string(n) + " more bytes, " + std::to_string(bytes_.size() - pos_) + " left)");
    }
  }

  // Reads the trailing CRC and compares it with everything before it.
  void verify_crc() {
    const std::size_t body = pos_;
    const std::uint32_t stored = u32();
    if (remaining() != 0) {
      throw FormatError(std::string(what_) + ": trailing bytes at offset " + std::to_string(pos_));
    }
    if (ByteWriter::checksum(bytes_.data(), body) != stored) {
      throw FormatError(std::string(what_) + ": checksum mismatch at offset " + std::to_string(body));
    }
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

void expect_magic(ByteReader& r, const char* magic, const char* what) {
  if (r.str(4) != magic) throw FormatError(std::string(what) + ": bad magic at offset 0");
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw FormatError("write to '" + path + "' failed");
}

void write_text(const std::string& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<std::uint8_t> encode_checkpoint(const std::vector<WeightSnapshot>& snapshots) {
  ByteWriter w;
  w.raw("ASGL", 4);
  w.u32(kCheckpointVersion);
  w.u64(snapshots.size());
  for (const auto& snap : snapshots) {
    w.u64(snap.iteration);
    w.u64(snap.parameters.size());
    for (const auto& p : snap.parameters) {
      w.u32(std::uint32_t(p.id.size()));
      w.raw(p.id.data(), p.id.size());
      w.u32(std::uint32_t(p.value.rank()));
      for (std::size_t e : p.value.shape()) w.u64(e);
      for (float v : p.value.values()) w.f64(double(v));
    }
  }
  w.crc();
  return w.take();
}

std::vector<WeightSnapshot> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "checkpoint");
  expect_magic(r, "ASGL", "checkpoint");
  const std::size_t version_offset = r.offset();
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " at offset " +
                      std::to_string(version_offset));
  }
  const std::uint64_t count = r.u64();
  std::vector<WeightSnapshot> out;
  for (std::uint64_t s = 0; s < count; ++s) {
    WeightSnapshot snap;
    snap.iteration = r.u64();
    const std::uint64_t params = r.u64();
    for (std::uint64_t p = 0; p < params; ++p) {
      const std::string id = r.str(r.u32());
      const std::uint32_t rank = r.u32();
      Shape shape;
      for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(std::size_t(r.u64()));
      const std::size_t n = element_count(shape);
      r.need(n * 8);
      std::vector<float> data(n);
      for (auto& v : data) v = float(r.f64());
      snap.parameters.add(id, Tensor(std::move(shape), std::move(data)));
    }
    out.push_back(std::move(snap));
  }
  r.verify_crc();
  return out;
}

void checkpoint_save(const std::vector<WeightSnapshot>& snapshots, const std::string& path) {
  write_file(path, encode_checkpoint(snapshots));
}

std::vector<WeightSnapshot> checkpoint_load(const std::string& path) { return decode_checkpoint(read_file(path)); }

std::vector<std::uint8_t> encode_pairs(const std::vector<ImagePair>& pairs) {
  std::uint32_t flags = 0;
  std::size_t h = 0, w = 0;
  if (!pairs.empty()) {
    h = pairs[0].height();
    w = pairs[0].width();
    flags = (pairs[0].moving_labels ? 1u : 0u) | (pairs[0].true_field ? 2u : 0u);
  }
  ByteWriter out;
  out.raw("SGPR", 4);
  out.u32(1);
  out.u64(pairs.size());
  out.u32(std::uint32_t(h));
  out.u32(std::uint32_t(w));
  out.u32(flags);
  for (const auto& p : pairs) {
    if (p.height() != h || p.width() != w) throw DimensionError("encode_pairs: pairs differ in extents");
    const std::uint32_t pf = (p.moving_labels && p.fixed_labels ? 1u : 0u) | (p.true_field ? 2u : 0u);
    if (pf != flags) throw DimensionError("encode_pairs: pairs differ in optional fields");
    for (float v : p.moving.values()) out.f32(v);
    for (float v : p.fixed.values()) out.f32(v);
    if (flags & 1u) {
      for (auto v : p.moving_labels->labels) out.u32(std::uint32_t(v));
      for (auto v : p.fixed_labels->labels) out.u32(std::uint32_t(v));
    }
    if (flags & 2u) {
      for (float v : p.true_field->tensor().values()) out.f32(v);
    }
  }
  out.crc();
  return out.take();
}

std::vector<ImagePair> decode_pairs(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "pair file");
  expect_magic(r, "SGPR", "pair file");
  if (r.u32() != 1) throw FormatError("pair file: unsupported version at offset 4");
  const std::uint64_t count = r.u64();
  const std::size_t h = r.u32(), w = r.u32();
  const std::uint32_t flags = r.u32();
  std::vector<ImagePair> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    ImagePair p;
    p.moving = Tensor(Shape{1, 1, h, w});
    p.fixed = Tensor(Shape{1, 1, h, w});
    for (auto& v : p.moving.values()) v = r.f32();
    for (auto& v : p.fixed.values()) v = r.f32();
    if (flags & 1u) {
      LabelMap m(h, w), f(h, w);
      for (auto& v : m.labels) v = std::int32_t(r.u32());
      for (auto& v : f.labels) v = std::int32_t(r.u32());
      p.moving_labels = std::move(m);
      p.fixed_labels = std::move(f);
    }
    if (flags & 2u) {
      Tensor t(Shape{2, h, w});
      for (auto& v : t.values()) v = r.f32();
      p.true_field = DeformationField(std::move(t));
    }
    p.moving_source = p.fixed_source = std::size_t(i);
    out.push_back(std::move(p));
  }
  r.verify_crc();
  return out;
}

void save_pairs(const std::vector<ImagePair>& pairs, const std::string& path) { write_file(path, encode_pairs(pairs)); }

std::vector<ImagePair> load_pairs(const std::string& path) { return decode_pairs(read_file(path)); }

void write_pgm(const std::string& path, const Tensor& image) {
  if (image.rank() < 2) throw DimensionError("write_pgm: need at least two dimensions");
  const std::size_t h = image.dim(image.rank() - 2), w = image.dim(image.rank() - 1);
  if (h * w != image.size()) throw DimensionError("write_pgm: expected a single-channel image");
  const std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (float v : image.values()) {
    const double c = std::isfinite(v) ? std::clamp(double(v), 0.0, 1.0) : 0.0;
    bytes.push_back(std::uint8_t(std::lround(c * 255.0)));
  }
  write_file(path, bytes);
}

Tensor read_pgm(const std::string& path) {
  const auto bytes = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(char(bytes[pos++]));
    if (t.empty()) throw FormatError("PGM '" + path + "': truncated header at offset " + std::to_string(pos));
    return t;
  };
  if (token() != "P5") throw FormatError("PGM '" + path + "': bad magic at offset 0 (expected P5)");
  const long w = std::stol(token()), h = std::stol(token()), maxval = std::stol(token());
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw FormatError("PGM '" + path + "': unsupported header (only 8-bit P5)");
  }
  ++pos;  // single whitespace after maxval
  if (bytes.size() < pos + std::size_t(w * h)) {
    throw FormatError("PGM '" + path + "': truncated raster at offset " + std::to_string(bytes.size()));
  }
  Tensor img(Shape{1, 1, std::size_t(h), std::size_t(w)});
  for (long i = 0; i < w * h; ++i) img[std::size_t(i)] = float(bytes[pos + std::size_t(i)]) / float(maxval);
  return img;
}

Tensor normalize_signed(const Tensor& values) {
  float bound = 0.0f;
  for (float v : values.values()) bound = std::max(bound, std::abs(v));
  Tensor out(values.shape());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = bound > 0.0f ? 0.5f + 0.5f * values[i] / bound : 0.5f;
  }
  return out;
}

Tensor normalize_unsigned(const Tensor& values) {
  float top = 0.0f;
  for (float v : values.values()) top = std::max(top, v);
  Tensor out(values.shape());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = top > 0.0f ? values[i] / top : 0.0f;
  return out;
}

void write_raw_f32(const std::string& path, const Tensor& values) {
  ByteWriter w;
  for (float v : values.values()) w.f32(v);
  write_file(path, w.take());
}

std::vector<float> read_raw_f32(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() % 4 != 0) throw FormatError("raw float file '" + path + "' has a partial value");
  ByteReader r(bytes, "raw float file");
  std::vector<float> out(bytes.size() / 4);
  for (auto& v : out) v = r.f32();
  return out;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& text) {
  if (text == "nan") return std::nan("");
  if (text == "inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw FormatError("not a number: '" + text + "'");
  }
  return value;
}

}  // namespace sgldreg
