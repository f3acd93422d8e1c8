#include "vda/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <map>
#include <numbers>
#include <sstream>

#include "vda/binary_io.hpp"
#include "vda/degrade.hpp"
#include "vda/error.hpp"
#include "vda/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vda {
namespace {

constexpr std::string_view kFeatureMagic = "VDNFEAT1";

std::string jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const json& r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

json parse_row(const std::string& line, const fs::path& path, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
  }
}

template <class F>
void for_each_row(const fs::path& path, F&& f) {
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json row = parse_row(line, path, lineno);
    try {
      f(row);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

fs::path resolve(const fs::path& manifest, const std::string& rel) {
  const fs::path p(rel);
  return p.is_absolute() ? p : manifest.parent_path() / p;
}

// toy generator pieces

enum Stream : std::uint64_t { kTemplate = 1, kStill = 2, kHoldout = 3, kVideo = 4, kEvalVideo = 5, kPairs = 6, kBase = 7 };

Rng item_rng(std::uint64_t seed, Stream kind, std::uint64_t index) {
  return Rng::stream(seed, (static_cast<std::uint64_t>(kind) << 40) | index);
}

void add_waves(std::vector<double>& f, std::size_t n, Rng& rng, int count, int fmin, int fmax, double amin, double amax) {
  const double N = static_cast<double>(n);
  for (int k = 0; k < count; ++k) {
    int u = 0, v = 0;
    while (std::max(std::abs(u), std::abs(v)) < fmin) {
      u = static_cast<int>(rng.uniform_int(-fmax, fmax));
      v = static_cast<int>(rng.uniform_int(0, fmax));
    }
    const double amp = rng.uniform(amin, amax);
    const double phase = rng.uniform(0.0, 2 * std::numbers::pi);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c)
        f[r * n + c] += amp * std::cos(2 * std::numbers::pi * (u * static_cast<double>(c) + v * static_cast<double>(r)) / N + phase);
  }
}

void add_blobs(std::vector<double>& f, std::size_t n, Rng& rng, int count, double smin, double smax, double amp) {
  const double N = static_cast<double>(n);
  for (int b = 0; b < count; ++b) {
    const double cx = rng.uniform(0.15 * N, 0.85 * N), cy = rng.uniform(0.15 * N, 0.85 * N);
    const double sigma = rng.uniform(smin, smax);
    const double a = rng.uniform(-amp, amp);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        const double dx = static_cast<double>(c) - cx, dy = static_cast<double>(r) - cy;
        f[r * n + c] += a * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      }
  }
}

void standardize(std::vector<double>& f, double sd_target) {
  double mean = 0.0, var = 0.0;
  for (double v : f) mean += v;
  mean /= static_cast<double>(f.size());
  for (double v : f) var += (v - mean) * (v - mean);
  const double sd = std::max(std::sqrt(var / static_cast<double>(f.size())), 1e-12);
  for (double& v : f) v = sd_target * (v - mean) / sd;
}

/// Coarse structure shared by every identity.
std::vector<double> shared_base(std::size_t n, Rng& rng) {
  std::vector<double> f(n * n, 0.0);
  add_waves(f, n, rng, 3, 1, 1, 0.5, 1.0);
  add_blobs(f, n, rng, 3, n / 6.0, n / 4.0, 1.0);
  standardize(f, 0.12);
  return f;
}

/// Shared base plus an identity-specific low-frequency field and blob layout,
/// plus mid-frequency detail that heavy blur and downscaling wipe out.
Image identity_template(const std::vector<double>& base, std::size_t n, Rng& rng) {
  std::vector<double> detail(n * n, 0.0), coarse(n * n, 0.0);
  add_waves(detail, n, rng, 8, 2, 5, 0.5, 1.0);
  add_blobs(detail, n, rng, 6, 1.2, 2.5, 1.5);
  standardize(detail, 0.08);
  add_waves(coarse, n, rng, 6, 1, 2, 0.5, 1.0);
  add_blobs(coarse, n, rng, 4, 3.0, 6.0, 1.0);
  standardize(coarse, 0.10);
  std::vector<double> f(n * n);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::clamp(0.5 + base[i] + coarse[i] + detail[i], 0.0, 1.0);
  return Image(n, n, std::move(f));
}

double sample_bilinear(const Image& img, double y, double x) {
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  const auto y0 = static_cast<std::size_t>(y), x0 = static_cast<std::size_t>(x);
  const std::size_t y1 = std::min(y0 + 1, img.height() - 1), x1 = std::min(x0 + 1, img.width() - 1);
  const double wy = y - static_cast<double>(y0), wx = x - static_cast<double>(x0);
  return (1 - wy) * ((1 - wx) * img.at(y0, x0) + wx * img.at(y0, x1)) +
         wy * ((1 - wx) * img.at(y1, x0) + wx * img.at(y1, x1));
}

/// Small shift, contrast, brightness and sensor noise shared by both domains.
Image jitter(const Image& tmpl, Rng& rng) {
  const double dx = rng.uniform(-1.0, 1.0), dy = rng.uniform(-1.0, 1.0);
  const double contrast = rng.uniform(0.9, 1.1), brightness = rng.uniform(-0.05, 0.05);
  Image out(tmpl.width(), tmpl.height());
  for (std::size_t r = 0; r < out.height(); ++r)
    for (std::size_t c = 0; c < out.width(); ++c) {
      const double v = sample_bilinear(tmpl, static_cast<double>(r) + dy, static_cast<double>(c) + dx);
      out.at(r, c) = 0.5 + contrast * (v - 0.5) + brightness + 0.02 * rng.normal();
    }
  out.clamp_unit();
  return out;
}

double draw_severity(Rng& rng, double high_fraction) {
  const bool high = rng.bernoulli(high_fraction);
  const double u = rng.uniform();
  return high ? 0.8 + 0.2 * u : 0.6 * u;
}

/// Video-domain frame at effective severity e in [0,1].
Image video_frame(const Image& tmpl, double e, Rng& rng) {
  Image x = jitter(tmpl, rng);
  const double angle = rng.uniform(0.0, 180.0);
  Rng noise = Rng(rng.next_u64());
  if (e <= 0.0) return x;
  degrade::DegradationSpec spec;
  const int length = 1 + static_cast<int>(std::lround(14.0 * e));
  if (length >= 2) spec.blur = degrade::MotionBlur{length, angle};
  if (e > 0.02) spec.scale = degrade::ScaleChange{1.0 / (1.0 + 5.0 * e)};
  spec.compression = degrade::Compression{static_cast<int>(std::lround(95.0 - 65.0 * e))};
  x = degrade::apply(spec, x);
  const double contrast = 1.0 - 0.35 * e;
  for (double& v : x.pixels()) v = 0.5 + contrast * (v - 0.5) + 0.04 * e * noise.normal();
  x.clamp_unit();
  return x;
}

std::string video_name(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%04zu", prefix, i);
  return buf;
}

}  // namespace

// --- images -----------------------------------------------------------------

std::string encode_pgm(const Image& img) {
  std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.size());
  for (double v : img.pixels()) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  return out;
}

Image decode_pgm(std::string_view bytes, const std::string& what) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> std::size_t {
    skip_space();
    std::size_t v = 0, digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
      if (++digits > 9) throw FormatError(what + ": header value too large");
    }
    if (digits == 0) throw FormatError(what + ": malformed PGM header");
    return v;
  };
  if (bytes.substr(0, 2) != "P5") throw FormatError(what + ": not a binary PGM (expected P5)");
  pos = 2;
  const std::size_t w = number(), h = number(), maxval = number();
  if (w == 0 || h == 0) throw FormatError(what + ": empty image");
  if (maxval == 0 || maxval > 255) throw FormatError(what + ": only 8-bit PGM is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError(what + ": malformed PGM header");
  }
  ++pos;
  if (bytes.size() - pos < w * h) throw FormatError(what + ": truncated pixel data");
  std::vector<double> px(w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    px[i] = static_cast<double>(static_cast<unsigned char>(bytes[pos + i])) / static_cast<double>(maxval);
  }
  return Image(w, h, std::move(px));
}

Image read_pgm(const fs::path& path) { return decode_pgm(read_file(path), path.string()); }

void write_pgm(const fs::path& path, const Image& img) { write_file(path, encode_pgm(img)); }

Image quantize8(const Image& img) {
  Image out = img;
  for (double& v : out.pixels()) v = static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0;
  return out;
}

// --- feature files ----------------------------------------------------------

std::string serialize_features(const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("features must be [count, dim], got " + shape_string(features.shape()));
  ByteWriter w;
  w.bytes(kFeatureMagic.data(), kFeatureMagic.size());
  w.u32(static_cast<std::uint32_t>(features.dim(0)));
  w.u32(static_cast<std::uint32_t>(features.dim(1)));
  for (double v : features.data()) w.f32(static_cast<float>(v));
  return w.take();
}

Tensor deserialize_features(std::string_view bytes, const std::string& what) {
  ByteReader r(bytes, what);
  r.expect_magic(kFeatureMagic);
  const std::size_t count = r.u32(), dim = r.u32();
  if (r.remaining() != count * dim * 4) {
    throw FormatError(what + ": expected " + std::to_string(count * dim * 4) + " data bytes, found " +
                      std::to_string(r.remaining()));
  }
  Tensor t(Shape{count, dim});
  for (double& v : t.data()) v = r.f32();
  r.expect_end();
  return t;
}

void save_features(const fs::path& path, const Tensor& features) { write_file(path, serialize_features(features)); }

Tensor load_features(const fs::path& path) { return deserialize_features(read_file(path), path.string()); }

// --- manifests ----------------------------------------------------------------

std::vector<std::string> read_jsonl_lines(const fs::path& path) {
  std::vector<std::string> rows;
  for_each_row(path, [&](const json& row) { rows.push_back(row.dump()); });
  return rows;
}

std::vector<ImageEntry> read_image_manifest(const fs::path& path) {
  std::vector<ImageEntry> out;
  for_each_row(path, [&](const json& row) {
    out.push_back({row.at("path").get<std::string>(), row.at("identity").get<int>()});
  });
  return out;
}

void write_image_manifest(const fs::path& path, const std::vector<ImageEntry>& entries) {
  std::vector<json> rows;
  for (const ImageEntry& e : entries) rows.push_back({{"path", e.path}, {"identity", e.identity}});
  write_file(path, jsonl(rows));
}

std::vector<VideoEntry> read_video_manifest(const fs::path& path) {
  std::vector<VideoEntry> out;
  for_each_row(path, [&](const json& row) {
    VideoEntry e{row.at("video_id").get<std::string>(), row.at("frames").get<std::vector<std::string>>()};
    if (e.frames.empty()) throw FormatError(path.string() + ": video '" + e.video_id + "' has no frames");
    out.push_back(std::move(e));
  });
  return out;
}

void write_video_manifest(const fs::path& path, const std::vector<VideoEntry>& entries) {
  std::vector<json> rows;
  for (const VideoEntry& e : entries) rows.push_back({{"video_id", e.video_id}, {"frames", e.frames}});
  write_file(path, jsonl(rows));
}

std::size_t LabeledImages::identity_count() const {
  std::vector<int> ids = identities;
  std::sort(ids.begin(), ids.end());
  return static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
}

LabeledImages load_labeled_images(const fs::path& manifest) {
  LabeledImages out;
  for (const ImageEntry& e : read_image_manifest(manifest)) {
    if (e.identity < 0) throw FormatError(manifest.string() + ": negative identity id");
    out.images.push_back(read_pgm(resolve(manifest, e.path)));
    out.identities.push_back(e.identity);
  }
  return out;
}

std::vector<UnlabeledVideo> load_unlabeled_videos(const fs::path& manifest) {
  std::vector<UnlabeledVideo> out;
  for (const VideoEntry& e : read_video_manifest(manifest)) {
    UnlabeledVideo v{e.video_id, {}};
    for (const std::string& f : e.frames) v.frames.push_back(read_pgm(resolve(manifest, f)));
    out.push_back(std::move(v));
  }
  return out;
}

UnlabeledVideo load_unlabeled_video(const fs::path& manifest, const std::string& video_id) {
  for (const VideoEntry& e : read_video_manifest(manifest)) {
    if (e.video_id != video_id) continue;
    UnlabeledVideo v{e.video_id, {}};
    for (const std::string& f : e.frames) v.frames.push_back(read_pgm(resolve(manifest, f)));
    return v;
  }
  throw FormatError(manifest.string() + ": no video with id '" + video_id + "'");
}

std::vector<VideoTruth> read_truth(const fs::path& path) {
  std::vector<VideoTruth> out;
  for_each_row(path, [&](const json& row) {
    out.push_back({row.at("video_id").get<std::string>(), row.at("identity").get<int>(),
                   row.at("severity").get<std::vector<double>>()});
  });
  return out;
}

void write_truth(const fs::path& path, const std::vector<VideoTruth>& truth) {
  std::vector<json> rows;
  for (const VideoTruth& t : truth) {
    rows.push_back({{"video_id", t.video_id}, {"identity", t.identity}, {"severity", t.severity}});
  }
  write_file(path, jsonl(rows));
}

std::vector<VideoPair> read_pairs(const fs::path& path) {
  std::vector<VideoPair> out;
  for_each_row(path, [&](const json& row) {
    out.push_back({row.at("a").get<std::string>(), row.at("b").get<std::string>(), row.at("same").get<bool>(),
                   row.value("fold", 0)});
  });
  return out;
}

void write_pairs(const fs::path& path, const std::vector<VideoPair>& pairs) {
  std::vector<json> rows;
  for (const VideoPair& p : pairs) rows.push_back({{"a", p.a}, {"b", p.b}, {"same", p.same}, {"fold", p.fold}});
  write_file(path, jsonl(rows));
}

// --- toy generator ------------------------------------------------------------

void ToyGenConfig::validate() const {
  if (n_identities < 2) throw ConfigError("toy: n_identities must be at least 2");
  if (images_per_identity < 2) throw ConfigError("toy: images_per_identity must be at least 2");
  if (n_videos < 1 || frames_per_video < 1 || eval_videos_per_identity < 1) {
    throw ConfigError("toy: video counts must be at least 1");
  }
  if (n_folds < 2 || n_folds > n_identities) throw ConfigError("toy: n_folds must be in [2, n_identities]");
  if (image_size < 8) throw ConfigError("toy: image_size must be at least 8");
  if (!(gap_strength >= 0.0 && gap_strength <= 1.0)) throw ConfigError("toy: gap_strength must be in [0,1]");
  if (!(high_severity_fraction >= 0.0 && high_severity_fraction <= 1.0)) {
    throw ConfigError("toy: high_severity_fraction must be in [0,1]");
  }
}

std::string ToyGenConfig::to_json() const {
  return json{{"n_identities", n_identities},
              {"images_per_identity", images_per_identity},
              {"holdout_per_identity", holdout_per_identity},
              {"n_videos", n_videos},
              {"frames_per_video", frames_per_video},
              {"eval_videos_per_identity", eval_videos_per_identity},
              {"n_folds", n_folds},
              {"image_size", image_size},
              {"gap_strength", gap_strength},
              {"high_severity_fraction", high_severity_fraction},
              {"seed", seed}}
      .dump();
}

ToyGenConfig ToyGenConfig::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("toy config must be a JSON object");
    static const char* known[] = {"n_identities", "images_per_identity", "holdout_per_identity", "n_videos",
                                  "frames_per_video", "eval_videos_per_identity", "n_folds", "image_size",
                                  "gap_strength", "high_severity_fraction", "seed"};
    for (const auto& [key, _] : j.items()) {
      if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
        throw ConfigError("toy config: unknown key '" + key + "'");
      }
    }
    ToyGenConfig c;
    c.n_identities = j.value("n_identities", c.n_identities);
    c.images_per_identity = j.value("images_per_identity", c.images_per_identity);
    c.holdout_per_identity = j.value("holdout_per_identity", c.holdout_per_identity);
    c.n_videos = j.value("n_videos", c.n_videos);
    c.frames_per_video = j.value("frames_per_video", c.frames_per_video);
    c.eval_videos_per_identity = j.value("eval_videos_per_identity", c.eval_videos_per_identity);
    c.n_folds = j.value("n_folds", c.n_folds);
    c.image_size = j.value("image_size", c.image_size);
    c.gap_strength = j.value("gap_strength", c.gap_strength);
    c.high_severity_fraction = j.value("high_severity_fraction", c.high_severity_fraction);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("toy config: ") + e.what());
  }
}

ToyCorpus generate_toy(const ToyGenConfig& cfg) {
  cfg.validate();
  ToyCorpus out;
  out.config = cfg;
  const std::size_t n = cfg.image_size;

  Rng base_rng = item_rng(cfg.seed, kBase, 0);
  const std::vector<double> base = shared_base(n, base_rng);
  std::vector<Image> templates;
  for (std::size_t id = 0; id < cfg.n_identities; ++id) {
    Rng rng = item_rng(cfg.seed, kTemplate, id);
    templates.push_back(identity_template(base, n, rng));
  }

  for (std::size_t id = 0; id < cfg.n_identities; ++id) {
    Rng still = item_rng(cfg.seed, kStill, id);
    for (std::size_t k = 0; k < cfg.images_per_identity; ++k) {
      out.images.images.push_back(quantize8(jitter(templates[id], still)));
      out.images.identities.push_back(static_cast<int>(id));
    }
    Rng held = item_rng(cfg.seed, kHoldout, id);
    for (std::size_t k = 0; k < cfg.holdout_per_identity; ++k) {
      out.holdout.images.push_back(quantize8(jitter(templates[id], held)));
      out.holdout.identities.push_back(static_cast<int>(id));
    }
  }

  auto make_video = [&](Rng& rng, std::size_t identity, const std::string& vid, std::vector<UnlabeledVideo>& videos,
                        std::vector<VideoTruth>& truth) {
    UnlabeledVideo v{vid, {}};
    VideoTruth t{vid, static_cast<int>(identity), {}};
    for (std::size_t f = 0; f < cfg.frames_per_video; ++f) {
      const double e = cfg.gap_strength * draw_severity(rng, cfg.high_severity_fraction);
      v.frames.push_back(quantize8(video_frame(templates[identity], e, rng)));
      t.severity.push_back(e);
    }
    videos.push_back(std::move(v));
    truth.push_back(std::move(t));
  };

  for (std::size_t i = 0; i < cfg.n_videos; ++i) {
    Rng rng = item_rng(cfg.seed, kVideo, i);
    make_video(rng, i % cfg.n_identities, video_name('v', i), out.videos, out.video_truth);
  }

  const std::size_t per = cfg.eval_videos_per_identity;
  for (std::size_t id = 0; id < cfg.n_identities; ++id)
    for (std::size_t k = 0; k < per; ++k) {
      const std::size_t i = id * per + k;
      Rng rng = item_rng(cfg.seed, kEvalVideo, i);
      make_video(rng, id, video_name('e', i), out.eval_videos, out.eval_truth);
    }

  // Identities are dealt round-robin into folds, so folds share no identity.
  Rng pair_rng = item_rng(cfg.seed, kPairs, 0);
  for (std::size_t fold = 0; fold < cfg.n_folds; ++fold) {
    std::vector<std::size_t> ids;
    for (std::size_t id = fold; id < cfg.n_identities; id += cfg.n_folds) ids.push_back(id);
    std::vector<VideoPair> pos, neg;
    for (std::size_t id : ids)
      for (std::size_t a = 0; a < per; ++a)
        for (std::size_t b = a + 1; b < per; ++b)
          pos.push_back({video_name('e', id * per + a), video_name('e', id * per + b), true, static_cast<int>(fold)});
    for (std::size_t x = 0; x < ids.size(); ++x)
      for (std::size_t y = x + 1; y < ids.size(); ++y)
        for (std::size_t a = 0; a < per; ++a)
          for (std::size_t b = 0; b < per; ++b)
            neg.push_back({video_name('e', ids[x] * per + a), video_name('e', ids[y] * per + b), false,
                           static_cast<int>(fold)});
    for (std::size_t i = neg.size(); i > 1; --i) {
      std::swap(neg[i - 1], neg[static_cast<std::size_t>(pair_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    const std::size_t n_pairs = std::min(pos.size(), neg.size());
    for (std::size_t i = 0; i < n_pairs; ++i) {
      out.pairs.push_back(pos[i]);
      out.pairs.push_back(neg[i]);
    }
  }
  return out;
}

void write_toy(const ToyCorpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  auto still_entries = [&](const LabeledImages& set, const std::string& sub) {
    std::vector<ImageEntry> entries;
    std::map<int, int> counter;
    for (std::size_t i = 0; i < set.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "%s/id%03d_%02d.pgm", sub.c_str(), set.identities[i],
                    counter[set.identities[i]]++);
      write_pgm(dir / name, set.images[i]);
      entries.push_back({name, set.identities[i]});
    }
    return entries;
  };
  write_image_manifest(dir / toy_files::images, still_entries(corpus.images, "images"));
  write_image_manifest(dir / toy_files::holdout, still_entries(corpus.holdout, "holdout"));

  auto video_entries = [&](const std::vector<UnlabeledVideo>& videos, const std::string& sub) {
    std::vector<VideoEntry> entries;
    for (const UnlabeledVideo& v : videos) {
      VideoEntry e{v.video_id, {}};
      for (std::size_t f = 0; f < v.frames.size(); ++f) {
        char name[96];
        std::snprintf(name, sizeof name, "%s/%s/f%03zu.pgm", sub.c_str(), v.video_id.c_str(), f);
        write_pgm(dir / name, v.frames[f]);
        e.frames.push_back(name);
      }
      entries.push_back(std::move(e));
    }
    return entries;
  };
  write_video_manifest(dir / toy_files::videos, video_entries(corpus.videos, "videos"));
  write_video_manifest(dir / toy_files::eval_videos, video_entries(corpus.eval_videos, "eval_videos"));
  write_pairs(dir / toy_files::pairs, corpus.pairs);

  std::vector<VideoTruth> truth = corpus.video_truth;
  truth.insert(truth.end(), corpus.eval_truth.begin(), corpus.eval_truth.end());
  write_truth(dir / toy_files::truth, truth);
  write_file(dir / toy_files::config, json::parse(corpus.config.to_json()).dump(2) + "\n");
}

ToyCorpus read_toy(const fs::path& dir) {
  ToyCorpus c;
  c.config = ToyGenConfig::from_json(read_file(dir / toy_files::config));
  c.images = load_labeled_images(dir / toy_files::images);
  c.holdout = load_labeled_images(dir / toy_files::holdout);
  c.videos = load_unlabeled_videos(dir / toy_files::videos);
  c.eval_videos = load_unlabeled_videos(dir / toy_files::eval_videos);
  c.pairs = read_pairs(dir / toy_files::pairs);
  std::map<std::string, VideoTruth> truth;
  for (VideoTruth& t : read_truth(dir / toy_files::truth)) truth[t.video_id] = std::move(t);
  for (const UnlabeledVideo& v : c.videos)
    if (truth.count(v.video_id)) c.video_truth.push_back(truth[v.video_id]);
  for (const UnlabeledVideo& v : c.eval_videos)
    if (truth.count(v.video_id)) c.eval_truth.push_back(truth[v.video_id]);
  return c;
}

}  // namespace vda
