#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vda/models.hpp"

namespace vda::pipeline {

/// Record written next to the artifacts of every command.
struct RunManifest {
  std::string command;
  std::string config_hash;  // 16 hex digits
  std::uint64_t seed = 0;
  std::string git_describe;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;

  std::string to_json() const;
  void write(const std::filesystem::path& path) const;
};

/// FNV-1a of the canonical (sorted-key, compact) serialization of `json`.
std::string config_hash(std::string_view json);
std::string git_describe();

/// Where the manifest of a command writing `out` goes: `<dir>/run_manifest.json`
/// for directories, `<file>.run_manifest.json` otherwise.
std::filesystem::path manifest_path(const std::filesystem::path& out, bool out_is_dir);

struct CommandResult {
  std::string summary;  // JSON object
  std::vector<std::string> outputs;
  std::filesystem::path manifest;
};

/// Runs one command. Options are a JSON object whose keys mirror the command
/// line flags (e.g. {"config": "...", "out": "..."}). Writes the artifacts
/// and the run manifest.
CommandResult run(std::string_view command, std::string_view options_json);

/// gen-toy, pretrain, train, eval, rank-frames, degrade, baseline, extract, ablation
const std::vector<std::string>& command_names();

/// Network config from a JSON file; the toy config when `path` is empty.
NetworkConfig load_network_config(const std::optional<std::filesystem::path>& path);

/// Embedding network from a parameter checkpoint. Without an explicit
/// network file, a `network.json` beside the checkpoint is used when present.
EmbeddingNet load_network(const std::filesystem::path& ckpt,
                          const std::optional<std::filesystem::path>& network = std::nullopt);

/// Discriminator whose layer sizes are read off the checkpoint shapes.
Discriminator load_discriminator_file(const std::filesystem::path& ckpt);

}  // namespace vda::pipeline
