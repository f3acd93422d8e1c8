#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace vda {

/// Little-endian byte sink for the binary file formats.
class ByteWriter {
 public:
  void bytes(const char* data, std::size_t n) { out_.append(data, n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void f32(float v);

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

/// Bounds-checked little-endian reader; truncation raises FormatError.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

  void expect_magic(std::string_view magic);
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  float f32();
  std::string string(std::size_t n);
  void expect_end() const;
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  const unsigned char* take(std::size_t n);

  std::string_view data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and renames it into place.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace vda
