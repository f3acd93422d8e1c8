#include "vda/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <json.hpp>
#include <map>

#include "vda/ablation.hpp"
#include "vda/baselines.hpp"
#include "vda/binary_io.hpp"
#include "vda/checkpoint.hpp"
#include "vda/data_io.hpp"
#include "vda/degrade.hpp"
#include "vda/error.hpp"
#include "vda/evaluation.hpp"
#include "vda/fusion.hpp"
#include "vda/rng.hpp"
#include "vda/trainer.hpp"

#ifndef VDA_GIT_DESCRIBE
#define VDA_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace vda::pipeline {
namespace {

/// Typed access to the options object with uniform error messages.
class Options {
 public:
  Options(std::string command, json j) : command_(std::move(command)), j_(std::move(j)) {}

  bool has(const std::string& key) const { return j_.contains(key) && !j_[key].is_null(); }

  std::string str(const std::string& key) const {
    require(key);
    if (!j_[key].is_string()) throw ConfigError(command_ + ": --" + key + " must be a string");
    return j_[key].get<std::string>();
  }
  std::string str_or(const std::string& key, const std::string& fallback) const { return has(key) ? str(key) : fallback; }
  fs::path path(const std::string& key) const { return fs::path(str(key)); }
  std::optional<fs::path> opt_path(const std::string& key) const {
    return has(key) ? std::optional<fs::path>(path(key)) : std::nullopt;
  }

  std::uint64_t u64_or(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_[key];
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      std::size_t pos = 0;
      try {
        const unsigned long long x = std::stoull(s, &pos);
        if (pos == s.size() && s.find('-') == std::string::npos) return x;
      } catch (const std::exception&) {
      }
    }
    throw ConfigError(command_ + ": --" + key + " must be a non-negative integer");
  }
  std::optional<double> opt_double(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    if (!j_[key].is_number()) throw ConfigError(command_ + ": --" + key + " must be a number");
    return j_[key].get<double>();
  }
  bool flag(const std::string& key) const { return has(key) && j_[key].get<bool>(); }

  const json& raw() const { return j_; }

 private:
  void require(const std::string& key) const {
    if (!has(key)) throw ConfigError(command_ + ": missing required option --" + key);
  }

  std::string command_;
  json j_;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json parse_object(std::string_view text, const std::string& what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  return j;
}

std::string read_text(const fs::path& p) { return read_file(p); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

/// What a command produced, before the manifest is added.
struct Produced {
  json summary = json::object();
  std::vector<std::string> outputs;
  fs::path out;
  bool out_is_dir = false;
  std::uint64_t seed = 0;
  json config = json::object();  // effective configuration hashed into the manifest
};

EmbeddingNet pretrain_from(const LabeledImages& images, std::uint64_t seed, const NetworkConfig& net) {
  PretrainConfig pc;
  pc.seed = seed;
  pc.network = net;
  return pretrain_rfnet(images, pc);
}

// --- commands -----------------------------------------------------------------

Produced cmd_gen_toy(const Options& o) {
  ToyGenConfig cfg = o.has("config") ? ToyGenConfig::from_json(read_text(o.path("config"))) : ToyGenConfig{};
  cfg.seed = o.u64_or("seed", cfg.seed);
  cfg.validate();
  const fs::path out = o.path("out");
  const ToyCorpus corpus = generate_toy(cfg);
  write_toy(corpus, out);
  Produced p;
  p.out = out;
  p.out_is_dir = true;
  p.seed = cfg.seed;
  p.config = json::parse(cfg.to_json());
  for (const char* f : {toy_files::images, toy_files::holdout, toy_files::videos, toy_files::eval_videos,
                        toy_files::pairs, toy_files::truth, toy_files::config})
    p.outputs.push_back((out / f).string());
  p.summary = {{"identities", cfg.n_identities},
               {"images", corpus.images.size()},
               {"videos", corpus.videos.size()},
               {"eval_videos", corpus.eval_videos.size()},
               {"pairs", corpus.pairs.size()}};
  return p;
}

Produced cmd_pretrain(const Options& o) {
  PretrainConfig cfg = o.has("config") ? PretrainConfig::from_json(read_text(o.path("config"))) : PretrainConfig{};
  cfg.seed = o.u64_or("seed", cfg.seed);
  if (o.has("network")) cfg.network = load_network_config(o.path("network"));
  cfg.validate();
  const LabeledImages images = load_labeled_images(o.path("images"));
  const fs::path out = o.path("out");
  ensure_dir(out);
  const EmbeddingNet rf = pretrain_rfnet(images, cfg);
  save_checkpoint(out / "rfnet.ckpt", rf.parameters());
  write_file(out / "network.json", rf.config().to_json());
  Produced p;
  p.out = out;
  p.out_is_dir = true;
  p.seed = cfg.seed;
  p.config = json::parse(cfg.to_json());
  p.outputs = {(out / "rfnet.ckpt").string(), (out / "network.json").string()};
  p.summary = {{"images", images.size()}, {"identities", images.identity_count()}};
  if (o.has("holdout")) {
    const LabeledImages held = load_labeled_images(o.path("holdout"));
    const eval::VerificationResult r = eval::image_verification(rf, held, 10, cfg.seed);
    p.summary["holdout_accuracy"] = r.mean;
    p.summary["holdout_std_error"] = r.std_error;
  }
  return p;
}

Produced cmd_train(const Options& o) {
  TrainConfig cfg = TrainConfig::from_json(read_text(o.path("config")));
  cfg.seed = o.u64_or("seed", cfg.seed);
  cfg.validate();
  const LabeledImages images = load_labeled_images(o.path("images"));
  const std::vector<UnlabeledVideo> videos = load_unlabeled_videos(o.path("videos"));
  const fs::path out = o.path("out");
  ensure_dir(out);
  Produced p;
  p.out = out;
  p.out_is_dir = true;
  p.seed = cfg.seed;
  p.config = json::parse(cfg.to_json());

  std::optional<EmbeddingNet> rf;
  if (o.has("rfnet")) {
    rf = load_network(o.path("rfnet"), o.opt_path("network"));
    for (Parameter& prm : rf->parameters()) prm.trainable = false;
    p.config["rfnet_checksum"] = hex64(parameter_checksum(rf->parameters()));
  } else {
    rf = pretrain_from(images, cfg.seed, load_network_config(o.opt_path("network")));
    save_checkpoint(out / "rfnet.ckpt", rf->parameters());
    p.outputs.push_back((out / "rfnet.ckpt").string());
  }

  const TrainResult r = train(cfg, *rf, images, videos);
  write_file(out / "history.jsonl", r.history.to_jsonl());
  save_checkpoint(out / "vdnet.ckpt", r.vdnet.parameters());
  write_file(out / "network.json", r.vdnet.config().to_json());
  write_file(out / "train_config.json", json::parse(cfg.to_json()).dump(2) + "\n");
  p.outputs.push_back((out / "history.jsonl").string());
  p.outputs.push_back((out / "vdnet.ckpt").string());
  p.outputs.push_back((out / "network.json").string());
  p.outputs.push_back((out / "train_config.json").string());
  if (r.disc) {
    save_checkpoint(out / "disc.ckpt", r.disc->parameters());
    p.outputs.push_back((out / "disc.ckpt").string());
  }
  p.summary = {{"iterations", cfg.iterations}, {"discriminator", r.disc.has_value()}};
  if (!r.history.records.empty()) p.summary["final_total_loss"] = r.history.records.back().total;
  p.summary["wall_seconds"] = r.wall_seconds;
  return p;
}

std::optional<Discriminator> optional_disc(const Options& o) {
  if (!o.has("disc")) return std::nullopt;
  return load_discriminator_file(o.path("disc"));
}

Produced cmd_eval(const Options& o) {
  const std::string protocol = o.str_or("protocol", "verification");
  if (protocol != "verification" && protocol != "set")
    throw ConfigError("eval: --protocol must be verification or set");
  eval::EvalOptions opt;
  opt.frames = eval::parse_frames(o.str_or("frames", "all"));
  opt.fusion = fusion::parse_fusion(o.str_or("fusion", "uniform"));
  opt.seed = o.u64_or("seed", 0);
  opt.renormalize = o.flag("renormalize");
  const std::optional<Discriminator> disc = optional_disc(o);
  if (opt.fusion == fusion::FusionMode::weighted && !disc)
    throw ConfigError("eval: weighted fusion needs a discriminator checkpoint");
  const EmbeddingNet net = load_network(o.path("ckpt"), o.opt_path("network"));
  const std::vector<UnlabeledVideo> videos = load_unlabeled_videos(o.path("videos"));
  const std::vector<VideoPair> pairs = read_pairs(o.path("pairs"));
  eval::FeatureBank bank = eval::extract_bank(net, disc ? &*disc : nullptr, videos);
  if (o.has("transform")) bank = eval::transform_bank(bank, baselines::load_transform(o.path("transform")));

  eval::EvalReport report;
  if (protocol == "set") {
    const std::vector<VideoTruth> truth = read_truth(o.path("truth"));
    report = eval::evaluate_set(bank, pairs, truth, opt);
  } else {
    report = eval::evaluate_verification(bank, pairs, opt);
  }
  const fs::path out = o.path("out");
  ensure_parent(out);
  write_file(out, report.to_json() + "\n");

  Produced p;
  p.out = out;
  p.seed = opt.seed;
  p.config = o.raw();
  p.outputs = {out.string()};
  p.summary = {{"protocol", protocol}, {"pairs", report.pairs}};
  if (!report.verification.folds.empty()) {
    p.summary["mean_accuracy"] = report.verification.mean;
    p.summary["std_error"] = report.verification.std_error;
  }
  return p;
}

std::string weight4(double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", w);
  return buf;
}

Produced cmd_rank_frames(const Options& o) {
  const EmbeddingNet net = load_network(o.path("ckpt"), o.opt_path("network"));
  const Discriminator disc = load_discriminator_file(o.path("disc"));
  const fs::path manifest = o.path("video");
  std::vector<UnlabeledVideo> videos;
  if (o.has("id")) {
    videos.push_back(load_unlabeled_video(manifest, o.str("id")));
  } else {
    videos = load_unlabeled_videos(manifest);
  }
  const bool tag = videos.size() > 1;
  std::string out_text;
  for (const UnlabeledVideo& v : videos) {
    const fusion::VideoFeatureSet set = fusion::extract_video(net, &disc, v);
    for (const fusion::RankedFrame& r : fusion::rank_frames(set)) {
      std::string row = "{";
      if (tag) row += "\"video_id\":" + json(v.video_id).dump() + ",";
      row += "\"frame\":" + std::to_string(r.frame) + ",\"weight\":" + weight4(r.weight) + "}\n";
      out_text += row;
    }
  }
  const fs::path out = o.path("out");
  ensure_parent(out);
  write_file(out, out_text);
  Produced p;
  p.out = out;
  p.config = o.raw();
  p.outputs = {out.string()};
  p.summary = {{"videos", videos.size()}};
  return p;
}

Produced cmd_degrade(const Options& o) {
  const std::uint64_t seed = o.u64_or("seed", 0);
  const Image in = read_pgm(o.path("in"));
  degrade::DegradationSpec spec;
  if (o.has("spec")) {
    spec = degrade::spec_from_json(read_text(o.path("spec")));
  } else {
    degrade::SamplingRanges ranges = o.flag("wide_angle") ? degrade::SamplingRanges::wide_angle() : degrade::SamplingRanges{};
    if (o.has("transforms")) ranges.enabled = degrade::TransformSet::parse(o.str("transforms"));
    Rng rng(seed);
    spec = degrade::sample_spec(rng, ranges);
  }
  const Image out_img = degrade::apply(spec, in);
  const fs::path out = o.path("out");
  ensure_parent(out);
  write_pgm(out, out_img);
  Produced p;
  p.out = out;
  p.seed = seed;
  p.config = o.raw();
  p.outputs = {out.string()};
  p.summary = {{"spec", json::parse(degrade::spec_to_json(spec))}};
  return p;
}

Produced cmd_extract(const Options& o) {
  const EmbeddingNet net = load_network(o.path("ckpt"), o.opt_path("network"));
  Tensor features;
  std::size_t items = 0;
  if (o.has("images") == o.has("videos")) throw ConfigError("extract: give exactly one of --images or --videos");
  if (o.has("images")) {
    const LabeledImages images = load_labeled_images(o.path("images"));
    features = fusion::frame_features(net, images.images);
    items = images.size();
  } else {
    const std::vector<UnlabeledVideo> videos = load_unlabeled_videos(o.path("videos"));
    std::vector<Image> frames;
    for (const UnlabeledVideo& v : videos) frames.insert(frames.end(), v.frames.begin(), v.frames.end());
    features = fusion::frame_features(net, frames);
    items = videos.size();
  }
  const fs::path out = o.path("out");
  ensure_parent(out);
  save_features(out, features);
  Produced p;
  p.out = out;
  p.config = o.raw();
  p.outputs = {out.string()};
  p.summary = {{"items", items}, {"rows", features.dim(0)}, {"dim", features.dim(1)}};
  return p;
}

Produced cmd_baseline(const Options& o) {
  const std::string method = o.str("method");
  const Tensor images = load_features(o.path("train_images"));
  const Tensor videos = load_features(o.path("train_videos"));
  baselines::AffineTransform t;
  json summary = {{"method", method}};
  if (method == "coral") {
    t = baselines::coral_transform(baselines::fit_stats(videos), baselines::fit_stats(images), o.opt_double("lambda"));
  } else if (method == "pca") {
    if (images.dim(1) != videos.dim(1)) throw ShapeError("baseline: feature dimensions differ");
    Tensor combined({images.dim(0) + videos.dim(0), images.dim(1)});
    std::copy(images.data().begin(), images.data().end(), combined.data().begin());
    std::copy(videos.data().begin(), videos.data().end(),
              combined.data().begin() + static_cast<std::ptrdiff_t>(images.size()));
    const baselines::PcaModel m = baselines::pca_transform(combined, o.opt_double("retain").value_or(0.9));
    t = m.projection;
    summary["components"] = m.components;
  } else {
    throw ConfigError("baseline: --method must be pca or coral");
  }
  const fs::path out = o.path("out");
  ensure_parent(out);
  baselines::save_transform(out, t);
  summary["input_dim"] = t.input_dim();
  summary["output_dim"] = t.output_dim();
  Produced p;
  p.out = out;
  p.config = o.raw();
  p.outputs = {out.string()};
  p.summary = summary;
  return p;
}

Produced cmd_ablation(const Options& o) {
  const std::string preset = o.str_or("preset", "table1");
  if (preset != "table1") throw ConfigError("ablation: unknown preset '" + preset + "' (expected table1)");
  const std::uint64_t seed = o.u64_or("seed", 0);
  std::optional<std::size_t> iterations;
  if (o.has("iterations")) iterations = o.u64_or("iterations", 0);
  const fusion::FusionMode mode = fusion::parse_fusion(o.str_or("fusion", "weighted"));
  const ToyCorpus corpus = read_toy(o.path("toy"));
  const EmbeddingNet rf = o.has("rfnet") ? load_network(o.path("rfnet"), o.opt_path("network"))
                                         : pretrain_from(corpus.images, seed, load_network_config(o.opt_path("network")));
  eval::AblationData data{&rf, &corpus.images, &corpus.videos, &corpus.eval_videos, &corpus.pairs};
  const eval::AblationTable table = eval::run_ablation(eval::table1_models(seed, iterations), data, mode, seed);
  const fs::path out = o.path("out");
  ensure_parent(out);
  write_file(out, table.to_json() + "\n");
  Produced p;
  p.out = out;
  p.seed = seed;
  p.config = o.raw();
  p.config["toy_config"] = json::parse(corpus.config.to_json());
  p.outputs = {out.string()};
  p.summary = {{"rows", table.rows.size()}};
  return p;
}

using Handler = std::function<Produced(const Options&)>;

const std::map<std::string, Handler, std::less<>>& handlers() {
  static const std::map<std::string, Handler, std::less<>> h{
      {"gen-toy", cmd_gen_toy}, {"pretrain", cmd_pretrain},       {"train", cmd_train},
      {"eval", cmd_eval},       {"rank-frames", cmd_rank_frames}, {"degrade", cmd_degrade},
      {"baseline", cmd_baseline}, {"extract", cmd_extract},     {"ablation", cmd_ablation}};
  return h;
}

}  // namespace

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["git_describe"] = git_describe;
  j["outputs"] = outputs;
  j["wall_seconds"] = wall_seconds;
  return j.dump(2);
}

void RunManifest::write(const fs::path& path) const { write_file(path, to_json() + "\n"); }

std::string config_hash(std::string_view text) {
  const json j = parse_object(text, "config");
  return hex64(fnv1a64(j.dump()));
}

std::string git_describe() { return VDA_GIT_DESCRIBE; }

fs::path manifest_path(const fs::path& out, bool out_is_dir) {
  if (out_is_dir) return out / "run_manifest.json";
  fs::path p = out;
  p += ".run_manifest.json";
  return p;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"gen-toy", "pretrain",   "train",   "eval",    "rank-frames",
                                              "degrade", "baseline", "extract", "ablation"};
  return names;
}

CommandResult run(std::string_view command, std::string_view options_json) {
  const auto it = handlers().find(command);
  if (it == handlers().end()) throw ConfigError("unknown command '" + std::string(command) + "'");
  const std::string name(command);
  const Options opts(name, parse_object(options_json, name + " options"));

  const auto start = std::chrono::steady_clock::now();
  Produced p;
  try {
    p = it->second(opts);
  } catch (const json::exception& e) {
    throw ConfigError(name + ": " + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json hashed = {{"command", name}, {"config", p.config}};
  if (opts.has("config")) hashed["config_file"] = parse_object(read_text(opts.path("config")), "config file");
  RunManifest m;
  m.command = name;
  m.config_hash = hex64(fnv1a64(hashed.dump()));
  m.seed = p.seed;
  m.git_describe = git_describe();
  m.outputs = p.outputs;
  m.wall_seconds = secs;
  const fs::path mpath = manifest_path(p.out, p.out_is_dir);
  m.write(mpath);

  CommandResult r;
  p.summary["manifest"] = mpath.string();
  r.summary = p.summary.dump();
  r.outputs = std::move(p.outputs);
  r.manifest = mpath;
  return r;
}

NetworkConfig load_network_config(const std::optional<fs::path>& path) {
  if (!path) return NetworkConfig::toy();
  return NetworkConfig::from_json(read_text(*path));
}

EmbeddingNet load_network(const fs::path& ckpt, const std::optional<fs::path>& network) {
  std::optional<fs::path> cfg_path = network;
  if (!cfg_path) {
    const fs::path sibling = ckpt.parent_path() / "network.json";
    if (fs::exists(sibling)) cfg_path = sibling;
  }
  return build_rfnet(load_network_config(cfg_path), load_checkpoint(ckpt));
}

Discriminator load_discriminator_file(const fs::path& ckpt) {
  const std::vector<NamedTensor> entries = load_checkpoint(ckpt);
  const Tensor* fc1 = nullptr;
  const Tensor* fc2 = nullptr;
  for (const NamedTensor& e : entries) {
    if (e.name == "fc1.weight") fc1 = &e.value;
    if (e.name == "fc2.weight") fc2 = &e.value;
  }
  if (!fc1 || !fc2 || fc1->rank() != 2 || fc2->rank() != 2)
    throw FormatError(ckpt.string() + ": not a discriminator checkpoint");
  DiscriminatorConfig cfg;
  cfg.input_dim = fc1->dim(0);
  cfg.hidden = fc1->dim(1);
  cfg.ways = static_cast<int>(fc2->dim(1));
  cfg.validate();
  return load_discriminator(cfg, entries);
}

}  // namespace vda::pipeline
