#include "vda/ablation.hpp"

#include <json.hpp>

#include "vda/error.hpp"

namespace vda::eval {
namespace {

std::string slash_letters(const degrade::TransformSet& t) {
  std::string out;
  for (char ch : t.letters()) {
    if (!out.empty()) out += '/';
    out += ch;
  }
  return out;
}

std::string adv_label(DiscriminatorMode mode) {
  switch (mode) {
    case DiscriminatorMode::plain2:
    case DiscriminatorMode::merged2:
      return "two-way";
    case DiscriminatorMode::threeway:
      return "three-way";
    case DiscriminatorMode::none:
      break;
  }
  return "";
}

AblationRow score_row(const AblationRow& head, const FeatureBank& bank, const std::vector<VideoPair>& pairs,
                      fusion::FusionMode mode, std::uint64_t seed, const std::vector<FrameCount>& frames) {
  AblationRow row = head;
  row.fusion = mode;
  for (FrameCount n : frames) {
    AblationCell cell;
    cell.frames = n;
    if (!(mode == fusion::FusionMode::weighted && n == 1)) {
      EvalOptions opt;
      opt.frames = n;
      opt.fusion = mode;
      opt.seed = seed;
      const EvalReport r = evaluate_verification(bank, pairs, opt);
      cell.mean = r.verification.mean;
      cell.std_error = r.verification.std_error;
      cell.clamped_videos = r.clamped_videos;
    }
    row.cells.push_back(cell);
  }
  return row;
}

}  // namespace

const AblationRow* AblationTable::find(const std::string& model, fusion::FusionMode fusion) const {
  for (const AblationRow& r : rows)
    if (r.model == model && r.fusion == fusion) return &r;
  return nullptr;
}

std::string AblationTable::to_json() const {
  using oj = nlohmann::ordered_json;
  oj j;
  j["seed"] = seed;
  oj cols = oj::array();
  for (FrameCount n : frames) cols.push_back(frames_name(n));
  j["frames_per_video"] = cols;
  j["rows"] = oj::array();
  for (const AblationRow& r : rows) {
    oj row;
    row["model"] = r.model;
    row["ic"] = r.ic;
    row["fm"] = r.fm;
    row["fr"] = r.fr.empty() ? oj(nullptr) : oj(r.fr);
    row["adv"] = r.adv.empty() ? oj(nullptr) : oj(r.adv);
    row["fusion"] = r.fusion == fusion::FusionMode::weighted;
    oj cells = oj::object();
    for (const AblationCell& c : r.cells) {
      oj cell;
      if (c.mean) {
        cell["accuracy"] = *c.mean;
        cell["std_error"] = *c.std_error;
        if (c.clamped_videos > 0) cell["clamped_videos"] = c.clamped_videos;
      } else {
        cell = nullptr;
      }
      cells[frames_name(c.frames)] = cell;
    }
    row["accuracy"] = cells;
    j["rows"].push_back(row);
  }
  return j.dump(2);
}

std::vector<AblationModel> table1_models(std::uint64_t seed, std::optional<std::size_t> iterations) {
  std::vector<AblationModel> models;
  models.push_back({"baseline", std::nullopt, true});
  for (const std::string& name : TrainConfig::preset_names()) {
    TrainConfig cfg = TrainConfig::preset(name);
    cfg.seed = seed;
    if (iterations) cfg.iterations = *iterations;
    models.push_back({name, cfg, name == "E" || name == "F"});
  }
  return models;
}

AblationTable run_ablation(const std::vector<AblationModel>& models, const AblationData& data,
                           fusion::FusionMode fusion, std::uint64_t seed, const std::vector<FrameCount>& frames,
                           const std::function<void(const std::string&)>& log) {
  if (!data.rfnet || !data.images || !data.train_videos || !data.eval_videos || !data.pairs)
    throw ConfigError("ablation: incomplete data");
  if (frames.empty()) throw ConfigError("ablation: no frame columns");

  struct Trained {
    AblationRow head;
    EmbeddingNet net;
    std::optional<Discriminator> disc;
    bool weighted = false;
  };
  std::vector<Trained> trained;
  const Discriminator* last_disc = nullptr;
  for (const AblationModel& m : models) {
    AblationRow head;
    head.model = m.name;
    if (!m.config) {
      trained.push_back({head, *data.rfnet, std::nullopt, m.weighted_subrow});
      continue;
    }
    const TrainConfig& cfg = *m.config;
    head.ic = cfg.losses.ic;
    head.fm = cfg.losses.fm;
    if (cfg.losses.fr) head.fr = slash_letters(cfg.fr_transforms);
    if (cfg.adversarial()) head.adv = adv_label(cfg.mode);
    if (log) log("training " + m.name);
    TrainResult r = train(cfg, *data.rfnet, *data.images, *data.train_videos);
    trained.push_back({head, std::move(r.vdnet), std::move(r.disc), m.weighted_subrow});
  }
  for (const Trained& t : trained)
    if (t.disc) last_disc = &*t.disc;

  AblationTable table;
  table.seed = seed;
  table.frames = frames;
  for (const Trained& t : trained) {
    if (log) log("evaluating " + t.head.model);
    const Discriminator* disc = t.disc ? &*t.disc : (t.weighted ? last_disc : nullptr);
    const FeatureBank bank = extract_bank(t.net, disc, *data.eval_videos);
    table.rows.push_back(score_row(t.head, bank, *data.pairs, fusion::FusionMode::uniform, seed, frames));
    if (fusion == fusion::FusionMode::weighted && t.weighted && disc)
      table.rows.push_back(score_row(t.head, bank, *data.pairs, fusion::FusionMode::weighted, seed, frames));
  }
  return table;
}

}  // namespace vda::eval
