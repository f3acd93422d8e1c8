#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vda/graph.hpp"
#include "vda/tensor.hpp"

namespace vda {

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Parameter checkpoint ("VDNPAR01"): u32 entry count, then per entry a u16
/// name length, the UTF-8 name, u8 rank, u32 dims and f32 little-endian data.
std::string serialize_checkpoint(std::span<const Parameter> params);
std::vector<NamedTensor> deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, std::span<const Parameter> params);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into matching parameters. Every parameter must be
/// present with the same shape; the error names the offending layer.
void assign_checkpoint(std::span<Parameter> params, const std::vector<NamedTensor>& entries);

/// Order-sensitive FNV-1a digest of the exact parameter values.
std::uint64_t parameter_checksum(std::span<const Parameter> params);

}  // namespace vda
