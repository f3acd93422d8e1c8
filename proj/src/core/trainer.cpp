#include "vda/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <map>

#include "vda/error.hpp"
#include "vda/rng.hpp"

namespace vda {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

enum : std::uint64_t { kImageStream = 1, kDegradeStream = 2, kVideoStream = 3, kPretrainStream = 4, kPoolStream = 5 };

Rng iteration_rng(std::uint64_t seed, std::uint64_t kind, std::size_t iteration) {
  return Rng::stream(seed, (kind << 48) | static_cast<std::uint64_t>(iteration));
}

std::vector<std::vector<std::size_t>> group_by_identity(const LabeledImages& images) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < images.size(); ++i) groups[images.identities[i]].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [id, idx] : groups)
    if (idx.size() >= 2) out.push_back(std::move(idx));
  return out;
}

/// Partial Fisher-Yates: the first k entries of a random permutation of 0..n-1.
std::vector<std::size_t> choose(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n) - 1));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

std::pair<std::size_t, std::size_t> two_distinct(const std::vector<std::size_t>& group, Rng& rng) {
  const auto m = static_cast<std::int64_t>(group.size());
  const auto a = static_cast<std::size_t>(rng.uniform_int(0, m - 1));
  auto b = static_cast<std::size_t>(rng.uniform_int(0, m - 2));
  if (b >= a) ++b;
  return {group[a], group[b]};
}

Tensor gather_rows(const Tensor& src, const std::vector<std::size_t>& rows) {
  const std::size_t k = src.dim(1);
  Tensor out(Shape{rows.size(), k});
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(src.raw() + rows[i] * k, src.raw() + (rows[i] + 1) * k, out.raw() + i * k);
  return out;
}

Tensor slice_tensor(const Tensor& src, std::size_t begin, std::size_t end) {
  const std::size_t k = src.dim(1);
  Tensor out(Shape{end - begin, k});
  std::copy(src.raw() + begin * k, src.raw() + end * k, out.raw());
  return out;
}

void check_keys(const json& j, std::initializer_list<const char*> known, const char* what) {
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end()) {
      throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace

// --- configuration -----------------------------------------------------------

void TrainConfig::validate() const {
  weights.validate();
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("train: Adam betas must be in [0,1)");
  }
  if (image_half + video_half != batch_total) throw ConfigError("train: image_half + video_half must equal batch_total");
  if (image_half < 4 || image_half % 2) throw ConfigError("train: image_half must be even and at least 4");
  if (!(losses.fm || losses.fr || losses.ic || losses.adv)) throw ConfigError("train: every loss is switched off");
  if (losses.adv && mode == DiscriminatorMode::none) throw ConfigError("train: Adv requires a discriminator mode");
  if (!losses.adv && mode != DiscriminatorMode::none) {
    throw ConfigError("train: discriminator mode '" + mode_name(mode) + "' set but Adv is off");
  }
  if (losses.fr && !fr_transforms.any()) throw ConfigError("train: FR needs at least one transform");
  if (uses_video() && video_half == 0) throw ConfigError("train: Adv needs video_half > 0");
  if (n_unlabeled_videos && *n_unlabeled_videos == 0) throw ConfigError("train: n_unlabeled_videos must be positive");
  if (disc_hidden == 0) throw ConfigError("train: disc_hidden must be positive");
}

std::string TrainConfig::to_json() const {
  ordered_json j;
  j["name"] = name;
  j["mode"] = mode_name(mode);
  j["losses"] = {{"fm", losses.fm}, {"fr", losses.fr}, {"ic", losses.ic}, {"adv", losses.adv}};
  j["fr_transforms"] = fr_transforms.letters();
  j["wide_blur_angle"] = wide_blur_angle;
  j["weights"] = {{"alpha", weights.alpha}, {"beta", weights.beta}, {"gamma", weights.gamma}};
  j["lr"] = lr;
  j["adam_beta1"] = adam_beta1;
  j["adam_beta2"] = adam_beta2;
  j["iterations"] = iterations;
  j["batch_total"] = batch_total;
  j["image_half"] = image_half;
  j["video_half"] = video_half;
  j["seed"] = seed;
  j["n_unlabeled_videos"] = n_unlabeled_videos ? json(*n_unlabeled_videos) : json(nullptr);
  j["disc_hidden"] = disc_hidden;
  return j.dump();
}

TrainConfig TrainConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  try {
    check_keys(j,
               {"preset", "name", "mode", "losses", "fr_transforms", "wide_blur_angle", "weights", "lr", "adam_beta1",
                "adam_beta2", "iterations", "batch_total", "image_half", "video_half", "seed", "n_unlabeled_videos",
                "disc_hidden"},
               "train config");
    TrainConfig c = j.contains("preset") ? preset(j["preset"].get<std::string>()) : TrainConfig{};
    c.name = j.value("name", c.name);
    if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
    if (j.contains("losses")) {
      const json& l = j["losses"];
      check_keys(l, {"fm", "fr", "ic", "adv"}, "train config losses");
      c.losses.fm = l.value("fm", c.losses.fm);
      c.losses.fr = l.value("fr", c.losses.fr);
      c.losses.ic = l.value("ic", c.losses.ic);
      c.losses.adv = l.value("adv", c.losses.adv);
    }
    if (j.contains("fr_transforms")) c.fr_transforms = degrade::TransformSet::parse(j["fr_transforms"].get<std::string>());
    c.wide_blur_angle = j.value("wide_blur_angle", c.wide_blur_angle);
    if (j.contains("weights")) {
      const json& w = j["weights"];
      check_keys(w, {"alpha", "beta", "gamma"}, "train config weights");
      c.weights.alpha = w.value("alpha", c.weights.alpha);
      c.weights.beta = w.value("beta", c.weights.beta);
      c.weights.gamma = w.value("gamma", c.weights.gamma);
    }
    c.lr = j.value("lr", c.lr);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.iterations = j.value("iterations", c.iterations);
    c.image_half = j.value("image_half", c.image_half);
    c.video_half = j.value("video_half", c.video_half);
    c.batch_total = j.value("batch_total", c.image_half + c.video_half);
    c.seed = j.value("seed", c.seed);
    if (j.contains("n_unlabeled_videos") && !j["n_unlabeled_videos"].is_null()) {
      c.n_unlabeled_videos = j["n_unlabeled_videos"].get<std::size_t>();
    }
    c.disc_hidden = j.value("disc_hidden", c.disc_hidden);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

TrainConfig TrainConfig::preset(std::string_view name) {
  TrainConfig c;
  c.name = std::string(name);
  auto set = [&](bool fm, const char* fr, DiscriminatorMode mode) {
    c.losses = {fm, fr[0] != '\0', true, mode != DiscriminatorMode::none};
    c.fr_transforms = degrade::TransformSet::parse(fr);
    c.mode = mode;
  };
  if (name == "A") set(false, "MS", DiscriminatorMode::none);
  else if (name == "B") set(true, "MS", DiscriminatorMode::none);
  else if (name == "C") set(true, "MSC", DiscriminatorMode::none);
  else if (name == "D") set(true, "", DiscriminatorMode::plain2);
  else if (name == "E") set(true, "MSC", DiscriminatorMode::merged2);
  else if (name == "F") set(true, "MSC", DiscriminatorMode::threeway);
  else throw ConfigError("unknown preset '" + std::string(name) + "' (expected A-F)");
  if (!c.losses.fr) c.fr_transforms = degrade::TransformSet{};
  return c;
}

std::vector<std::string> TrainConfig::preset_names() { return {"A", "B", "C", "D", "E", "F"}; }

void PretrainConfig::validate() const {
  network.validate();
  if (pairs_per_batch < 2) throw ConfigError("pretrain: pairs_per_batch must be at least 2");
  if (!(lr > 0.0)) throw ConfigError("pretrain: lr must be positive");
  if (!(embedding_l2 >= 0.0)) throw ConfigError("pretrain: embedding_l2 must be nonnegative");
}

std::string PretrainConfig::to_json() const {
  ordered_json j;
  j["iterations"] = iterations;
  j["pairs_per_batch"] = pairs_per_batch;
  j["lr"] = lr;
  j["embedding_l2"] = embedding_l2;
  j["seed"] = seed;
  j["network"] = json::parse(network.to_json());
  return j.dump();
}

PretrainConfig PretrainConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pretrain config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("pretrain config must be a JSON object");
  try {
    check_keys(j, {"iterations", "pairs_per_batch", "lr", "embedding_l2", "seed", "network"}, "pretrain config");
    PretrainConfig c;
    c.iterations = j.value("iterations", c.iterations);
    c.pairs_per_batch = j.value("pairs_per_batch", c.pairs_per_batch);
    c.lr = j.value("lr", c.lr);
    c.embedding_l2 = j.value("embedding_l2", c.embedding_l2);
    c.seed = j.value("seed", c.seed);
    if (j.contains("network")) c.network = NetworkConfig::from_json(j["network"].dump());
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pretrain config: ") + e.what());
  }
}

// --- pretraining ----------------------------------------------------------------

EmbeddingNet pretrain_rfnet(const LabeledImages& images, const PretrainConfig& cfg) {
  cfg.validate();
  const auto groups = group_by_identity(images);
  if (groups.size() < 2) throw ConfigError("pretrain: need at least two identities with two images each");
  EmbeddingNet net = EmbeddingNet::initialize(cfg.network, cfg.seed);
  Adam opt(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  const std::size_t n = std::min(cfg.pairs_per_batch, groups.size());
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    Rng rng = iteration_rng(cfg.seed, kPretrainStream, it);
    std::vector<Image> batch(2 * n);
    const auto ids = choose(groups.size(), n, rng);
    for (std::size_t i = 0; i < n; ++i) {
      const auto [a, b] = two_distinct(groups[ids[i]], rng);
      batch[i] = images.images[a];
      batch[n + i] = images.images[b];
    }
    Graph g;
    Var f = net.forward(g, g.constant(images_to_tensor(batch), "images"));
    Var loss = losses::npair_loss(g, g.slice_rows(f, 0, n), g.slice_rows(f, n, 2 * n));
    if (cfg.embedding_l2 > 0.0) {
      Var reg = g.mean(g.sum_rows(g.mul(f, f)));
      loss = g.add(loss, g.scale(reg, cfg.embedding_l2), "pretrain_loss");
    }
    opt.step(net.parameters(), g.backward(loss));
  }
  for (Parameter& p : net.parameters()) p.trainable = false;
  return net;
}

// --- history ----------------------------------------------------------------------

std::string IterationRecord::to_json() const {
  ordered_json j;
  j["iteration"] = iteration;
  j["fm"] = parts.fm;
  j["fr"] = parts.fr;
  j["ic"] = parts.ic;
  j["adv"] = parts.adv;
  j["total"] = total;
  j["d_loss"] = d_loss ? json(*d_loss) : json(nullptr);
  j["d_accuracy"] = d_accuracy ? json(*d_accuracy) : json(nullptr);
  return j.dump();
}

std::string TrainHistory::to_jsonl() const {
  std::string out;
  for (const IterationRecord& r : records) {
    out += r.to_json();
    out += '\n';
  }
  return out;
}

// --- trainer ------------------------------------------------------------------------

Trainer::Trainer(const TrainConfig& cfg, const EmbeddingNet& rfnet, const LabeledImages& images,
                 const std::vector<UnlabeledVideo>& videos)
    : cfg_(cfg),
      rfnet_(rfnet),
      vdnet_(build_vdnet(rfnet)),
      opt_g_(AdamConfig{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8}),
      opt_d_(AdamConfig{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8}),
      images_(images),
      videos_(videos) {
  cfg_.validate();
  for (Parameter& p : rfnet_.parameters()) p.trainable = false;
  by_identity_ = group_by_identity(images_);
  if (by_identity_.size() < 2) throw ConfigError("train: need at least two identities with two images each");
  for (const Image& img : images_.images) {
    if (img.width() != rfnet_.config().input_size || img.height() != rfnet_.config().input_size) {
      throw ShapeError("train: labeled image size does not match the network input");
    }
  }
  psi_ = rfnet_.embed_batch(images_.images);

  if (cfg_.uses_video()) {
    if (videos_.empty()) throw ConfigError("train: adversarial training needs unlabeled videos");
    const std::size_t n = cfg_.n_unlabeled_videos ? std::min(*cfg_.n_unlabeled_videos, videos_.size()) : videos_.size();
    Rng rng = Rng::stream(cfg_.seed, kPoolStream << 48);
    video_pool_ = choose(videos_.size(), n, rng);
    std::sort(video_pool_.begin(), video_pool_.end());
    for (std::size_t v : video_pool_) {
      if (videos_[v].frames.empty()) throw FormatError("train: video '" + videos_[v].video_id + "' has no frames");
    }
    DiscriminatorConfig dc{mode_ways(cfg_.mode), cfg_.disc_hidden, rfnet_.config().feature_dim};
    disc_ = build_discriminator(dc, mix64(cfg_.seed ^ 0xd15cULL));
  }
}

NPairBatch Trainer::sample_image_batch(std::size_t iteration) const {
  Rng rng = iteration_rng(cfg_.seed, kImageStream, iteration);
  Rng deg = iteration_rng(cfg_.seed, kDegradeStream, iteration);
  const std::size_t n = std::min(cfg_.image_half / 2, by_identity_.size());
  NPairBatch b;
  degrade::SamplingRanges ranges = cfg_.wide_blur_angle ? degrade::SamplingRanges::wide_angle() : degrade::SamplingRanges{};
  ranges.enabled = cfg_.fr_transforms;
  for (std::size_t id : choose(by_identity_.size(), n, rng)) {
    const auto [a, p] = two_distinct(by_identity_[id], rng);
    b.anchors.push_back(images_.images[a]);
    b.positives.push_back(images_.images[p]);
    b.classes.push_back(images_.identities[a]);
    b.anchor_index.push_back(a);
    b.positive_index.push_back(p);
    b.specs.push_back(cfg_.losses.fr ? degrade::sample_spec(deg, ranges) : degrade::DegradationSpec{});
  }
  return b;
}

std::vector<Image> Trainer::sample_video_batch(std::size_t iteration) const {
  if (video_pool_.empty()) return {};
  Rng rng = iteration_rng(cfg_.seed, kVideoStream, iteration);
  std::vector<Image> frames;
  frames.reserve(cfg_.video_half);
  for (std::size_t i = 0; i < cfg_.video_half; ++i) {
    const UnlabeledVideo& v = videos_[video_pool_[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(video_pool_.size()) - 1))]];
    frames.push_back(v.frames[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(v.frames.size()) - 1))]);
  }
  return frames;
}

IterationRecord Trainer::train_step(const NPairBatch& batch, std::span<const Image> video_frames) {
  batch.validate();
  const std::size_t n = batch.size();
  const bool synth = cfg_.losses.fr;
  const bool adv = disc_.has_value();
  if (adv && video_frames.empty()) throw ConfigError("train_step: adversarial training needs video frames");
  const std::size_t v = adv ? video_frames.size() : 0;

  std::vector<Image> rows;
  rows.reserve(3 * n + v);
  rows.insert(rows.end(), batch.anchors.begin(), batch.anchors.end());
  rows.insert(rows.end(), batch.positives.begin(), batch.positives.end());
  if (synth)
    for (std::size_t i = 0; i < n; ++i) rows.push_back(degrade::apply(batch.specs[i], batch.positives[i]));
  if (adv) rows.insert(rows.end(), video_frames.begin(), video_frames.end());
  const std::size_t synth_begin = 2 * n, synth_end = synth ? 3 * n : 2 * n;
  const std::size_t video_begin = synth_end, video_end = synth_end + v;

  Tensor psi;
  if (batch.anchor_index.size() == n && batch.positive_index.size() == n) {
    std::vector<std::size_t> idx = batch.anchor_index;
    idx.insert(idx.end(), batch.positive_index.begin(), batch.positive_index.end());
    psi = gather_rows(psi_, idx);
  } else {
    psi = rfnet_.embed_batch(std::span<const Image>(rows.data(), 2 * n));
  }

  Graph g;
  Var feats = vdnet_.forward(g, g.constant(images_to_tensor(rows), "batch"));
  IterationRecord rec;
  rec.iteration = iteration_;

  DomainCounts adv_counts;
  if (adv) {
    // Discriminator step on detached features.
    const bool d_synth = synth && cfg_.mode != DiscriminatorMode::plain2;
    const Tensor& f = g.value(feats);
    std::vector<std::size_t> d_rows;
    for (std::size_t i = 0; i < 2 * n; ++i) d_rows.push_back(i);
    if (d_synth)
      for (std::size_t i = synth_begin; i < synth_end; ++i) d_rows.push_back(i);
    for (std::size_t i = video_begin; i < video_end; ++i) d_rows.push_back(i);
    const DomainCounts counts{2 * n, d_synth ? n : 0, v};
    Graph gd;
    Var logits = disc_->logits(gd, gd.constant(gather_rows(f, d_rows), "features"), true);
    Var d_loss = losses::discriminator_loss(gd, cfg_.mode, gd.log_softmax(logits), counts);
    opt_d_.step(disc_->parameters(), gd.backward(d_loss));
    rec.d_loss = gd.value(d_loss).item();
    const auto labels = domain_labels(cfg_.mode, counts);
    const Tensor& lv = gd.value(logits);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      std::size_t arg = 0;
      for (std::size_t c = 1; c < lv.dim(1); ++c)
        if (lv.at(i, c) > lv.at(i, arg)) arg = c;
      correct += arg == labels[i] ? 1 : 0;
    }
    rec.d_accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    adv_counts = DomainCounts{0, d_synth ? n : 0, v};
  }

  std::vector<std::pair<Var, double>> terms;
  if (cfg_.losses.fm) {
    Var l = losses::fm_loss(g, g.slice_rows(feats, 0, 2 * n, "clean"), g.constant(psi, "psi_clean"));
    rec.parts.fm = g.value(l).item();
    terms.emplace_back(l, 1.0);
  }
  if (cfg_.losses.fr) {
    Var l = losses::fr_loss(g, g.slice_rows(feats, synth_begin, synth_end, "synth"),
                            g.constant(slice_tensor(psi, n, 2 * n), "psi_positive"));
    rec.parts.fr = g.value(l).item();
    terms.emplace_back(l, cfg_.weights.alpha);
  }
  if (cfg_.losses.ic) {
    Var anchors = synth ? g.slice_rows(feats, synth_begin, synth_end, "ic.anchors")
                        : g.slice_rows(feats, n, 2 * n, "ic.anchors");
    Var l = losses::npair_loss(g, anchors, g.constant(slice_tensor(psi, 0, n), "psi_anchor"));
    rec.parts.ic = g.value(l).item();
    terms.emplace_back(l, cfg_.weights.beta);
  }
  if (adv) {
    std::vector<Var> parts;
    if (adv_counts.synth) parts.push_back(g.slice_rows(feats, synth_begin, synth_end, "adv.synth"));
    parts.push_back(g.slice_rows(feats, video_begin, video_end, "adv.video"));
    Var x = parts.size() == 1 ? parts[0] : g.concat_rows(parts, "adv.features");
    const Discriminator& d = *disc_;
    Var l = losses::adversarial_loss(g, cfg_.mode, g.log_softmax(d.logits(g, x)), adv_counts);
    rec.parts.adv = g.value(l).item();
    terms.emplace_back(l, cfg_.weights.gamma);
  }

  Var total = terms[0].second == 1.0 ? terms[0].first : g.scale(terms[0].first, terms[0].second);
  for (std::size_t i = 1; i < terms.size(); ++i) {
    total = g.add(total, terms[i].second == 1.0 ? terms[i].first : g.scale(terms[i].first, terms[i].second), "total");
  }
  rec.total = losses::total_loss(rec.parts, cfg_.weights);
  if (!std::isfinite(rec.total)) throw NumericError("train: loss became non-finite at iteration " + std::to_string(iteration_));
  opt_g_.step(vdnet_.parameters(), g.backward(total));
  ++iteration_;
  return rec;
}

IterationRecord Trainer::step() {
  const NPairBatch batch = sample_image_batch(iteration_);
  const std::vector<Image> frames = disc_ ? sample_video_batch(iteration_) : std::vector<Image>{};
  return train_step(batch, frames);
}

TrainResult train(const TrainConfig& cfg, const EmbeddingNet& rfnet, const LabeledImages& images,
                  const std::vector<UnlabeledVideo>& videos) {
  const auto start = std::chrono::steady_clock::now();
  Trainer t(cfg, rfnet, images, videos);
  TrainHistory history;
  for (std::size_t i = 0; i < cfg.iterations; ++i) history.records.push_back(t.step());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return TrainResult{t.vdnet(), t.discriminator(), std::move(history), secs};
}

}  // namespace vda
