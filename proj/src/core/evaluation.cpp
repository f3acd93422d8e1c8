#include "vda/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <set>

#include "vda/error.hpp"
#include "vda/parallel.hpp"
#include "vda/rng.hpp"

namespace vda::eval {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
    i = j + 1;
  }
  return r;
}

std::string far_key(double far) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", far);
  return buf;
}

}  // namespace

FrameCount parse_frames(std::string_view text) {
  if (text == "all") return kAllFrames;
  std::size_t v = 0;
  if (text.empty()) throw ConfigError("frames: expected a count or 'all'");
  for (char c : text) {
    if (c < '0' || c > '9') throw ConfigError("frames: expected a count or 'all', got '" + std::string(text) + "'");
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  if (v == 0) throw ConfigError("frames: count must be positive");
  return v;
}

std::string frames_name(FrameCount n) { return n == kAllFrames ? "all" : std::to_string(n); }

FrameSubset subsample_frames(std::size_t frame_count, FrameCount n, std::uint64_t seed, std::string_view video_id) {
  FrameSubset out;
  if (n == kAllFrames || n >= frame_count) {
    out.clamped = n != kAllFrames && n > frame_count;
    out.frames.resize(frame_count);
    std::iota(out.frames.begin(), out.frames.end(), 0);
    return out;
  }
  Rng rng = Rng::stream(seed, fnv1a64(video_id));
  std::vector<std::size_t> idx(frame_count);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                            static_cast<std::int64_t>(frame_count) - 1));
    std::swap(idx[i], idx[j]);
  }
  out.frames.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n));
  std::sort(out.frames.begin(), out.frames.end());
  return out;
}

double accuracy_at(std::span<const ScoredPair> pairs, double threshold) {
  if (pairs.empty()) return 0.0;
  std::size_t correct = 0;
  for (const ScoredPair& p : pairs) correct += ((p.score >= threshold) == p.same) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double best_threshold(std::span<const ScoredPair> pairs) {
  std::vector<ScoredPair> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end(), [](const ScoredPair& a, const ScoredPair& b) { return a.score < b.score; });
  // With t at sorted[i], pairs below i are rejected and the rest accepted.
  std::size_t genuine_total = 0;
  for (const ScoredPair& p : sorted) genuine_total += p.same ? 1 : 0;
  std::size_t impostor_below = 0, genuine_below = 0;
  double best_t = kInf;
  std::size_t best_correct = sorted.size() - genuine_total;  // accept none
  for (std::size_t i = 0; i < sorted.size();) {
    const std::size_t correct = impostor_below + (genuine_total - genuine_below);
    if (correct >= best_correct && (correct > best_correct || sorted[i].score < best_t)) {
      best_correct = correct;
      best_t = sorted[i].score;
    }
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      (sorted[j].same ? genuine_below : impostor_below) += 1;
      ++j;
    }
    i = j;
  }
  return best_t;
}

VerificationResult verification_accuracy(std::span<const ScoredPair> pairs) {
  std::set<int> fold_ids;
  for (const ScoredPair& p : pairs) fold_ids.insert(p.fold);
  if (fold_ids.size() < 2) throw ConfigError("verification needs at least 2 folds");
  VerificationResult r;
  for (int f : fold_ids) {
    std::vector<ScoredPair> train, test;
    for (const ScoredPair& p : pairs) (p.fold == f ? test : train).push_back(p);
    const double t = best_threshold(train);
    r.folds.push_back({f, t, accuracy_at(test, t), test.size()});
  }
  const double n = static_cast<double>(r.folds.size());
  for (const FoldAccuracy& f : r.folds) r.mean += f.accuracy;
  r.mean /= n;
  double ss = 0.0;
  for (const FoldAccuracy& f : r.folds) ss += (f.accuracy - r.mean) * (f.accuracy - r.mean);
  r.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return r;
}

double tar_at_far(std::span<const double> genuine, std::span<const double> impostor, double far) {
  if (!(far >= 0.0 && far <= 1.0)) throw ConfigError("tar_at_far: far must be in [0,1]");
  if (genuine.empty() || impostor.empty()) throw ConfigError("tar_at_far: empty score set");
  std::vector<double> imp(impostor.begin(), impostor.end());
  std::sort(imp.begin(), imp.end());
  std::vector<double> cand(imp);
  cand.insert(cand.end(), genuine.begin(), genuine.end());
  std::sort(cand.begin(), cand.end());
  cand.push_back(kInf);
  double threshold = kInf;
  for (double t : cand) {
    const auto accepted = static_cast<double>(imp.end() - std::lower_bound(imp.begin(), imp.end(), t));
    if (accepted / static_cast<double>(imp.size()) <= far) {
      threshold = t;
      break;
    }
  }
  std::size_t hits = 0;
  for (double g : genuine) hits += g >= threshold ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(genuine.size());
}

double cmc_rank_k(const std::vector<std::vector<double>>& probes, const std::vector<int>& probe_ids,
                  const std::vector<std::vector<double>>& gallery, const std::vector<int>& gallery_ids,
                  std::size_t k) {
  if (gallery.empty()) throw ConfigError("cmc: empty gallery");
  if (probes.size() != probe_ids.size() || gallery.size() != gallery_ids.size()) {
    throw ShapeError("cmc: features and identities differ in length");
  }
  if (probes.empty()) return 0.0;
  std::size_t hits = 0;
  std::vector<std::size_t> order(gallery.size());
  std::vector<double> sim(gallery.size());
  for (std::size_t p = 0; p < probes.size(); ++p) {
    for (std::size_t g = 0; g < gallery.size(); ++g) sim[g] = fusion::similarity(probes[p], gallery[g]);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
    for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
      if (gallery_ids[order[r]] == probe_ids[p]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(probes.size());
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("spearman: length mismatch");
  if (a.size() < 2) return 0.0;
  const std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

VerificationResult image_verification(const EmbeddingNet& net, const LabeledImages& images, std::size_t n_folds,
                                      std::uint64_t seed) {
  if (images.identity_count() < 2) throw ConfigError("image verification needs at least two identities");
  const Tensor f = fusion::frame_features(net, images.images);
  auto score = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t c = 0; c < f.dim(1); ++c) s += f.at(a, c) * f.at(b, c);
    return s;
  };
  auto fold_of = [&](std::size_t i) { return static_cast<int>(static_cast<std::size_t>(images.identities[i]) % n_folds); };
  std::vector<ScoredPair> pairs;
  for (std::size_t a = 0; a < images.size(); ++a)
    for (std::size_t b = a + 1; b < images.size(); ++b)
      if (images.identities[a] == images.identities[b]) pairs.push_back({score(a, b), true, fold_of(a)});
  const std::size_t positives = pairs.size();
  Rng rng = Rng::stream(seed, 0x5717);
  const auto n = static_cast<std::int64_t>(images.size());
  while (pairs.size() < 2 * positives) {
    const auto a = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
    const auto b = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
    if (images.identities[a] == images.identities[b]) continue;
    pairs.push_back({score(a, b), false, fold_of(a)});
  }
  return verification_accuracy(pairs);
}

FeatureBank extract_bank(const EmbeddingNet& net, const Discriminator* disc, const std::vector<UnlabeledVideo>& videos) {
  std::vector<fusion::VideoFeatureSet> sets(videos.size());
  parallel_for(videos.size(), [&](std::size_t i) { sets[i] = fusion::extract_video(net, disc, videos[i]); });
  FeatureBank bank;
  for (fusion::VideoFeatureSet& s : sets) {
    const std::string id = s.video_id;
    if (!bank.emplace(id, std::move(s)).second) throw FormatError("duplicate video id '" + id + "'");
  }
  return bank;
}

FeatureBank transform_bank(const FeatureBank& bank, const baselines::AffineTransform& t) {
  FeatureBank out;
  for (const auto& [id, set] : bank) {
    fusion::VideoFeatureSet s{id, t.apply_rows(set.features), set.weights};
    const std::size_t k = s.features.dim(1);
    for (std::size_t i = 0; i < s.features.dim(0); ++i) {
      double n = 0.0;
      for (std::size_t c = 0; c < k; ++c) n += s.features.at(i, c) * s.features.at(i, c);
      n = std::sqrt(n);
      if (n > 0.0)
        for (std::size_t c = 0; c < k; ++c) s.features.at(i, c) /= n;
    }
    out.emplace(id, std::move(s));
  }
  return out;
}

std::vector<double> video_vector(const fusion::VideoFeatureSet& set, const EvalOptions& opt, bool* clamped) {
  const FrameSubset sub = subsample_frames(set.size(), opt.frames, opt.seed, set.video_id);
  if (clamped) *clamped = sub.clamped;
  std::vector<double> v =
      sub.frames.size() == set.size() ? fusion::fuse(set, opt.fusion) : fusion::fuse(set.subset(sub.frames), opt.fusion);
  if (opt.renormalize) {
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    if (n2 > 0.0)
      for (double& x : v) x /= std::sqrt(n2);
  }
  return v;
}

std::vector<ScoredPair> score_pairs(const FeatureBank& bank, const std::vector<VideoPair>& pairs,
                                    const EvalOptions& opt, std::size_t* clamped_videos) {
  std::map<std::string, std::vector<double>> vectors;
  std::size_t clamped = 0;
  auto vec = [&](const std::string& id) -> const std::vector<double>& {
    auto it = vectors.find(id);
    if (it != vectors.end()) return it->second;
    auto b = bank.find(id);
    if (b == bank.end()) throw FormatError("pairs reference unknown video '" + id + "'");
    bool c = false;
    auto v = video_vector(b->second, opt, &c);
    clamped += c ? 1 : 0;
    return vectors.emplace(id, std::move(v)).first->second;
  };
  std::vector<ScoredPair> scored;
  scored.reserve(pairs.size());
  for (const VideoPair& p : pairs) {
    const auto& a = vec(p.a);
    const auto& b = vec(p.b);
    scored.push_back({fusion::similarity(a, b), p.same, p.fold});
  }
  if (clamped_videos) *clamped_videos = clamped;
  return scored;
}

namespace {

std::map<double, double> tar_table(const std::vector<ScoredPair>& scored) {
  std::vector<double> genuine, impostor;
  for (const ScoredPair& p : scored) (p.same ? genuine : impostor).push_back(p.score);
  std::map<double, double> out;
  if (genuine.empty() || impostor.empty()) return out;
  for (double far : {0.001, 0.01, 0.1}) out[far] = tar_at_far(genuine, impostor, far);
  return out;
}

}  // namespace

EvalReport evaluate_verification(const FeatureBank& bank, const std::vector<VideoPair>& pairs, const EvalOptions& opt) {
  EvalReport r;
  r.protocol = "verification";
  r.options = opt;
  const auto scored = score_pairs(bank, pairs, opt, &r.clamped_videos);
  r.pairs = scored.size();
  r.verification = verification_accuracy(scored);
  r.tar = tar_table(scored);
  return r;
}

EvalReport evaluate_set(const FeatureBank& bank, const std::vector<VideoPair>& pairs,
                        const std::vector<VideoTruth>& truth, const EvalOptions& opt) {
  EvalReport r;
  r.protocol = "set";
  r.options = opt;
  const auto scored = score_pairs(bank, pairs, opt, &r.clamped_videos);
  r.pairs = scored.size();
  r.tar = tar_table(scored);

  std::vector<std::vector<double>> gallery, probes;
  std::vector<int> gallery_ids, probe_ids;
  std::set<int> seen;
  for (const VideoTruth& t : truth) {
    auto it = bank.find(t.video_id);
    if (it == bank.end()) continue;
    auto v = video_vector(it->second, opt);
    if (seen.insert(t.identity).second) {
      gallery.push_back(std::move(v));
      gallery_ids.push_back(t.identity);
    } else {
      probes.push_back(std::move(v));
      probe_ids.push_back(t.identity);
    }
  }
  if (gallery.empty()) throw FormatError("set protocol: no video has ground-truth identity");
  for (std::size_t k : {1, 5, 10}) r.rank_acc[k] = cmc_rank_k(probes, probe_ids, gallery, gallery_ids, k);
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["protocol"] = protocol;
  j["frames_per_video"] = frames_name(options.frames);
  j["fusion"] = fusion::fusion_name(options.fusion);
  j["seed"] = options.seed;
  j["renormalized"] = options.renormalize;
  j["pairs"] = pairs;
  j["clamped_videos"] = clamped_videos;
  if (!verification.folds.empty()) {
    j["threshold_rule"] = "accept if score >= t; t maximises accuracy on the other folds";
    j["folds"] = nlohmann::ordered_json::array();
    for (const FoldAccuracy& f : verification.folds) {
      nlohmann::ordered_json row;
      row["fold"] = f.fold;
      row["pairs"] = f.pairs;
      row["threshold"] = std::isfinite(f.threshold) ? nlohmann::ordered_json(f.threshold) : nlohmann::ordered_json("inf");
      row["accuracy"] = f.accuracy;
      j["folds"].push_back(row);
    }
    j["mean_accuracy"] = verification.mean;
    j["std_error"] = verification.std_error;
  }
  nlohmann::ordered_json tj = nlohmann::ordered_json::object();
  for (const auto& [far, v] : tar) tj[far_key(far)] = v;
  j["tar_at_far"] = tj;
  if (!rank_acc.empty()) {
    nlohmann::ordered_json rj = nlohmann::ordered_json::object();
    for (const auto& [k, v] : rank_acc) rj[std::to_string(k)] = v;
    j["rank_accuracy"] = rj;
  }
  return j.dump(2);
}

}  // namespace vda::eval
