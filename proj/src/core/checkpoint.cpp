#include "vda/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vda/binary_io.hpp"
#include "vda/error.hpp"
#include "vda/rng.hpp"

namespace vda {
namespace {
constexpr char kMagic[] = "VDNPAR01";
}

std::string serialize_checkpoint(std::span<const Parameter> params) {
  ByteWriter w;
  w.bytes(kMagic, 8);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const Parameter& p : params) {
    if (p.name.size() > 0xffff) throw ConfigError("checkpoint: parameter name too long");
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.u8(static_cast<std::uint8_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : p.value.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

std::vector<NamedTensor> deserialize_checkpoint(const std::string& bytes) {
  ByteReader r(bytes, "checkpoint");
  r.expect_magic(kMagic);
  const std::uint32_t count = r.u32();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor e;
    e.name = r.string(r.u16());
    const std::uint8_t rank = r.u8();
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = r.f32();
    e.value = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(e));
  }
  r.expect_end();
  return out;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const Parameter> params) {
  write_file(path, serialize_checkpoint(params));
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

void assign_checkpoint(std::span<Parameter> params, const std::vector<NamedTensor>& entries) {
  for (Parameter& p : params) {
    const NamedTensor* match = nullptr;
    for (const auto& e : entries) {
      if (e.name == p.name) {
        match = &e;
        break;
      }
    }
    if (!match) throw ShapeError("checkpoint: missing parameter for layer '" + p.name + "'");
    if (match->value.shape() != p.value.shape()) {
      throw ShapeError("checkpoint: layer '" + p.name + "' expects " + shape_string(p.value.shape()) +
                       ", checkpoint has " + shape_string(match->value.shape()));
    }
    p.value = match->value;
  }
}

std::uint64_t parameter_checksum(std::span<const Parameter> params) {
  std::string bytes;
  for (const Parameter& p : params) {
    bytes += p.name;
    for (double v : p.value.data()) {
      char buf[8];
      std::memcpy(buf, &v, 8);
      bytes.append(buf, 8);
    }
  }
  return fnv1a64(bytes);
}

}  // namespace vda
