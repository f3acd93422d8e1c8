#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vda/image.hpp"
#include "vda/tensor.hpp"

namespace vda {

// --- images -----------------------------------------------------------------

/// Binary 8-bit PGM ("P5"). Values are rounded to the nearest k/255.
std::string encode_pgm(const Image& img);
Image decode_pgm(std::string_view bytes, const std::string& what = "pgm");
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& img);

/// Rounds every pixel to the nearest multiple of 1/255.
Image quantize8(const Image& img);

// --- feature files ----------------------------------------------------------

/// "VDNFEAT1", u32 count, u32 dim, f32 row-major data.
std::string serialize_features(const Tensor& features);
Tensor deserialize_features(std::string_view bytes, const std::string& what = "features");
void save_features(const std::filesystem::path& path, const Tensor& features);
Tensor load_features(const std::filesystem::path& path);

// --- manifests ----------------------------------------------------------------

/// Parses JSON Lines; blank lines are skipped. Errors carry the line number.
std::vector<std::string> read_jsonl_lines(const std::filesystem::path& path);

struct ImageEntry {
  std::string path;  // relative to the manifest directory
  int identity = 0;
};

struct VideoEntry {
  std::string video_id;
  std::vector<std::string> frames;
};

std::vector<ImageEntry> read_image_manifest(const std::filesystem::path& path);
void write_image_manifest(const std::filesystem::path& path, const std::vector<ImageEntry>& entries);
std::vector<VideoEntry> read_video_manifest(const std::filesystem::path& path);
void write_video_manifest(const std::filesystem::path& path, const std::vector<VideoEntry>& entries);

struct LabeledImages {
  std::vector<Image> images;
  std::vector<int> identities;
  std::size_t size() const { return images.size(); }
  std::size_t identity_count() const;
};

/// Video as seen by the trainer: frames only, no identity or quality fields.
struct UnlabeledVideo {
  std::string video_id;
  std::vector<Image> frames;
};

/// Hidden ground truth for a toy video, kept in a separate sidecar file.
struct VideoTruth {
  std::string video_id;
  int identity = 0;
  std::vector<double> severity;  // one value per frame, in [0,1]
};

struct VideoPair {
  std::string a;
  std::string b;
  bool same = false;
  int fold = 0;
};

LabeledImages load_labeled_images(const std::filesystem::path& manifest);
std::vector<UnlabeledVideo> load_unlabeled_videos(const std::filesystem::path& manifest);
/// Loads a single manifest row by video id.
UnlabeledVideo load_unlabeled_video(const std::filesystem::path& manifest, const std::string& video_id);

std::vector<VideoTruth> read_truth(const std::filesystem::path& path);
void write_truth(const std::filesystem::path& path, const std::vector<VideoTruth>& truth);
std::vector<VideoPair> read_pairs(const std::filesystem::path& path);
void write_pairs(const std::filesystem::path& path, const std::vector<VideoPair>& pairs);

// --- toy generator ------------------------------------------------------------

struct ToyGenConfig {
  std::size_t n_identities = 40;
  std::size_t images_per_identity = 8;
  std::size_t holdout_per_identity = 2;
  std::size_t n_videos = 60;  // unlabeled training videos
  std::size_t frames_per_video = 20;
  std::size_t eval_videos_per_identity = 3;
  std::size_t n_folds = 10;
  std::size_t image_size = 32;
  double gap_strength = 1.0;
  double high_severity_fraction = 0.4;  // frames drawn from the [0.8, 1] band
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json() const;
  static ToyGenConfig from_json(std::string_view json);
};

struct ToyCorpus {
  ToyGenConfig config;
  LabeledImages images;
  LabeledImages holdout;
  std::vector<UnlabeledVideo> videos;
  std::vector<VideoTruth> video_truth;
  std::vector<UnlabeledVideo> eval_videos;
  std::vector<VideoTruth> eval_truth;
  std::vector<VideoPair> pairs;
};

/// Procedural two-domain corpus. Identities are smooth random templates;
/// stills are jittered copies; video frames add a per-frame degradation whose
/// severity scales with gap_strength. All pixels are quantized to 8 bits.
ToyCorpus generate_toy(const ToyGenConfig& cfg);

/// Writes images/, videos/, eval_videos/, the manifests, pairs.jsonl,
/// truth.jsonl and toy_config.json under `dir`.
void write_toy(const ToyCorpus& corpus, const std::filesystem::path& dir);

/// File names used by write_toy.
namespace toy_files {
inline constexpr const char* images = "images.jsonl";
inline constexpr const char* holdout = "holdout.jsonl";
inline constexpr const char* videos = "videos.jsonl";
inline constexpr const char* eval_videos = "eval_videos.jsonl";
inline constexpr const char* pairs = "pairs.jsonl";
inline constexpr const char* truth = "truth.jsonl";
inline constexpr const char* config = "toy_config.json";
}  // namespace toy_files

/// Reads a directory written by write_toy back into memory (including the
/// sidecar truth, so this is not a trainer-facing loader).
ToyCorpus read_toy(const std::filesystem::path& dir);

}  // namespace vda
