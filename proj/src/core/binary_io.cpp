#include "vda/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vda/error.hpp"

namespace vda {

void ByteWriter::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v & 0xff));
  u8(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

const unsigned char* ByteReader::take(std::size_t n) {
  if (data_.size() - pos_ < n) {
    throw FormatError(what_ + ": truncated at byte " + std::to_string(pos_));
  }
  const auto* p = reinterpret_cast<const unsigned char*>(data_.data() + pos_);
  pos_ += n;
  return p;
}

void ByteReader::expect_magic(std::string_view magic) {
  const unsigned char* p = take(magic.size());
  if (std::memcmp(p, magic.data(), magic.size()) != 0) {
    throw FormatError(what_ + ": bad magic, expected \"" + std::string(magic) + "\"");
  }
}

std::uint8_t ByteReader::u8() { return *take(1); }

std::uint16_t ByteReader::u16() {
  const unsigned char* p = take(2);
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t ByteReader::u32() {
  const unsigned char* p = take(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::string ByteReader::string(std::size_t n) {
  const unsigned char* p = take(n);
  return std::string(reinterpret_cast<const char*>(p), n);
}

void ByteReader::expect_end() const {
  if (pos_ != data_.size()) {
    throw FormatError(what_ + ": " + std::to_string(data_.size() - pos_) + " trailing bytes");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace vda
