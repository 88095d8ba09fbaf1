#include "aiqn/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "aiqn/errors.hpp"

namespace aiqn {

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::raw(std::span<const std::uint8_t> data) {
  bytes_.insert(bytes_.end(), data.begin(), data.end());
}

void ByteWriter::text(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

void ByteReader::need(std::size_t count, const char* what) {
  if (remaining() < count) throw FormatError(std::string("truncated input reading ") + what, pos_);
}

std::uint8_t ByteReader::u8() {
  need(1, "u8");
  return data_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4, "u32");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8, "u64");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::text(std::size_t length) {
  need(length, "text");
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), length);
  pos_ += length;
  return s;
}

void ByteReader::expect_magic(const char (&magic)[5]) {
  const std::size_t at = pos_;
  need(4, "magic");
  if (std::memcmp(data_.data() + pos_, magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected \"") + magic + "\"", at);
  }
  pos_ += 4;
}

void write_tensor_body(ByteWriter& w, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u64(d);
  for (double v : t.values()) w.f64(v);
}

Tensor read_tensor_body(ByteReader& r) {
  const std::size_t at = r.offset();
  const std::uint32_t rank = r.u32();
  if (rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank), at);
  std::vector<std::size_t> shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = r.u64();
    if (d != 0 && count > r.remaining() / d) throw FormatError("tensor larger than input", r.offset());
    count *= d;
  }
  if (r.remaining() / 8 < count) throw FormatError("truncated tensor payload", r.offset());
  std::vector<double> data(count);
  for (auto& v : data) v = r.f64();
  return Tensor(std::move(shape), std::move(data));
}

std::vector<std::uint8_t> encode_tensor_file(const Tensor& t) {
  ByteWriter w;
  w.text("AIQT");
  w.u32(kTensorFileVersion);
  write_tensor_body(w, t);
  return w.take();
}

Tensor decode_tensor_file(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("AIQT");
  const std::size_t at = r.offset();
  const std::uint32_t version = r.u32();
  if (version != kTensorFileVersion) {
    throw FormatError("unsupported tensor file version " + std::to_string(version), at);
  }
  Tensor t = read_tensor_body(r);
  if (r.remaining() != 0) throw FormatError("trailing bytes after tensor", r.offset());
  return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_tensor_file(const std::filesystem::path& path, const Tensor& t) {
  write_file_bytes(path, encode_tensor_file(t));
}

Tensor read_tensor_file(const std::filesystem::path& path) {
  return decode_tensor_file(read_file_bytes(path));
}

Tensor decode_idx(std::span<const std::uint8_t> bytes) {
  auto need = [&](std::size_t end, const char* what) {
    if (bytes.size() < end) {
      throw FormatError(std::string("IDX truncated in ") + what, bytes.size());
    }
  };
  need(4, "magic");
  if (bytes[0] != 0 || bytes[1] != 0) throw FormatError("IDX magic must start with two zero bytes", 0);
  if (bytes[2] != 0x08) throw FormatError("IDX type must be 0x08 (unsigned byte)", 2);
  const std::size_t rank = bytes[3];
  if (rank == 0) throw FormatError("IDX rank must be >= 1", 3);
  need(4 + 4 * rank, "dimension table");
  std::vector<std::size_t> dims(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t o = 4 + 4 * k;
    dims[k] = (std::size_t{bytes[o]} << 24) | (std::size_t{bytes[o + 1]} << 16) |
              (std::size_t{bytes[o + 2]} << 8) | std::size_t{bytes[o + 3]};
  }
  std::size_t per_item = 1;
  for (std::size_t k = 1; k < rank; ++k) per_item *= dims[k];
  const std::size_t header = 4 + 4 * rank;
  const std::size_t total = dims[0] * per_item;
  need(header + total, "payload");
  if (bytes.size() != header + total) throw FormatError("IDX has trailing bytes", header + total);
  Tensor out({dims[0], per_item});
  for (std::size_t i = 0; i < total; ++i) out[i] = bytes[header + i] / 255.0;
  return out;
}

Tensor read_idx(const std::filesystem::path& path) { return decode_idx(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_pgm(std::span<const double> pixels, std::size_t rows, std::size_t cols) {
  if (pixels.size() != rows * cols) throw DomainError("encode_pgm: pixel count does not match size");
  ByteWriter w;
  w.text("P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n");
  for (double v : pixels) {
    const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    w.u8(static_cast<std::uint8_t>(std::lround(c * 255.0)));
  }
  return w.take();
}

void write_pgm(const std::filesystem::path& path, std::span<const double> pixels, std::size_t rows,
               std::size_t cols) {
  write_file_bytes(path, encode_pgm(pixels, rows, cols));
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace aiqn
