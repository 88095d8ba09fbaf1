#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aiqn/tensor.hpp"

namespace aiqn {

inline constexpr std::uint32_t kTensorFileVersion = 1;

/// Little-endian binary writer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void raw(std::span<const std::uint8_t> data);
  void text(const std::string& s);  // bytes only, no prefix

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Little-endian binary reader; throws FormatError with the current offset
/// when the input runs short.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string text(std::size_t length);
  void expect_magic(const char (&magic)[5]);

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  void need(std::size_t count, const char* what);

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

/// u32 rank, u64 dims, f64 payload.
void write_tensor_body(ByteWriter& w, const Tensor& t);
Tensor read_tensor_body(ByteReader& r);

/// "AIQT" container: magic, u32 version, then the tensor body.
std::vector<std::uint8_t> encode_tensor_file(const Tensor& t);
Tensor decode_tensor_file(std::span<const std::uint8_t> bytes);
void write_tensor_file(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// IDX unsigned-byte file (2 zero bytes, 0x08, rank, big-endian u32 dims,
/// payload). Returns [count, product(remaining dims)] scaled by 1/255.
Tensor decode_idx(std::span<const std::uint8_t> bytes);
Tensor read_idx(const std::filesystem::path& path);

/// Binary "P5" greymap; pixel = round(clamp(v,0,1) * 255).
std::vector<std::uint8_t> encode_pgm(std::span<const double> pixels, std::size_t rows,
                                     std::size_t cols);
void write_pgm(const std::filesystem::path& path, std::span<const double> pixels, std::size_t rows,
               std::size_t cols);

/// Shortest decimal form that round-trips a double exactly.
std::string format_double(double v);

}  // namespace aiqn
