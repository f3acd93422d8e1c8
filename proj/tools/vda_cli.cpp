#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "vda/vda.h"

using nlohmann::json;

namespace {

/// Flag values collected for one subcommand; unset optionals stay out of the
/// options object.
struct Command {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> strings;
  std::map<std::string, double> numbers;
  std::map<std::string, bool> flags;
  std::vector<std::string> ckpt;

  json options() const {
    json j = json::object();
    for (const auto& [k, v] : strings)
      if (!v.empty()) j[k] = v;
    for (const auto& [k, v] : numbers)
      if (app->get_option("--" + dashed(k))->count() > 0) j[k] = v;
    for (const auto& [k, v] : flags)
      if (v) j[k] = true;
    if (!ckpt.empty()) {
      j["ckpt"] = ckpt[0];
      if (ckpt.size() > 1) j["disc"] = ckpt[1];
    }
    return j;
  }

  static std::string dashed(std::string key) {
    for (char& c : key)
      if (c == '_') c = '-';
    return key;
  }
};

struct Cli {
  CLI::App app{"Video domain adaptation toolkit", "vda"};
  std::map<std::string, Command> commands;

  Command& add(const std::string& name, const std::string& description) {
    Command& c = commands[name];
    c.app = app.add_subcommand(name, description);
    return c;
  }

  static CLI::Option* str(Command& c, const std::string& key, const std::string& help, bool required = false) {
    CLI::Option* o = c.app->add_option("--" + Command::dashed(key), c.strings[key], help);
    if (required) o->required();
    return o;
  }
  static void num(Command& c, const std::string& key, const std::string& help) {
    c.app->add_option("--" + Command::dashed(key), c.numbers[key], help);
  }
  static void flag(Command& c, const std::string& key, const std::string& help) {
    c.app->add_flag("--" + Command::dashed(key), c.flags[key], help);
  }
  // Seeds are u64; kept as text so large values survive.
  static void seed(Command& c) { str(c, "seed", "Random seed (u64)")->check(CLI::NonNegativeNumber); }

  Cli() {
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    Command& gen = add("gen-toy", "Generate the procedural two-domain toy corpus");
    str(gen, "config", "Toy generator config (JSON)");
    str(gen, "out", "Output directory", true);
    seed(gen);

    Command& pre = add("pretrain", "Train the reference network on labeled stills");
    str(pre, "config", "Pretraining config (JSON)");
    str(pre, "images", "Labeled image manifest (JSONL)", true);
    str(pre, "holdout", "Held-out image manifest for a verification check");
    str(pre, "network", "Network config (JSON)");
    str(pre, "out", "Output directory", true);
    seed(pre);

    Command& tr = add("train", "Adapt the embedding network to unlabeled video");
    str(tr, "config", "Training config (JSON)", true);
    str(tr, "images", "Labeled image manifest (JSONL)", true);
    str(tr, "videos", "Unlabeled video manifest (JSONL)", true);
    str(tr, "rfnet", "Reference network checkpoint; pretrained from --images when absent");
    str(tr, "network", "Network config (JSON)");
    str(tr, "out", "Output directory", true);
    seed(tr);

    Command& ev = add("eval", "Verification or set-to-set evaluation");
    str(ev, "protocol", "verification | set")->check(CLI::IsMember({"verification", "set"}));
    ev.app->add_option("--ckpt", ev.ckpt, "Embedding checkpoint, optionally followed by a discriminator checkpoint")
        ->required()
        ->expected(1, 2);
    str(ev, "disc", "Discriminator checkpoint");
    str(ev, "network", "Network config (JSON)");
    str(ev, "videos", "Video manifest (JSONL)", true);
    str(ev, "pairs", "Pair list (JSONL)", true);
    str(ev, "truth", "Ground-truth sidecar (set protocol)");
    str(ev, "frames", "Frames per video: 1|5|20|50|all");
    str(ev, "fusion", "uniform | weighted")->check(CLI::IsMember({"uniform", "weighted"}));
    str(ev, "transform", "Feature transform applied to every frame");
    flag(ev, "renormalize", "Unit-normalise fused video vectors before scoring");
    str(ev, "out", "Report path (JSON)", true);
    seed(ev);

    Command& rk = add("rank-frames", "Order the frames of a video by discriminator weight");
    str(rk, "video", "Video manifest (JSONL)", true);
    str(rk, "id", "Video id within the manifest");
    rk.app->add_option("--ckpt", rk.ckpt, "Embedding checkpoint followed by a discriminator checkpoint")
        ->required()
        ->expected(2);
    str(rk, "network", "Network config (JSON)");
    str(rk, "out", "Output path (JSONL)", true);

    Command& dg = add("degrade", "Apply a synthetic degradation to an image");
    str(dg, "in", "Input image (PGM)", true);
    str(dg, "out", "Output image (PGM)", true);
    str(dg, "spec", "Degradation spec (JSON); sampled from --seed when absent");
    str(dg, "transforms", "Transforms to sample from, e.g. MSC");
    flag(dg, "wide_angle", "Sample blur angles over [0, 180)");
    seed(dg);

    Command& bl = add("baseline", "Fit a PCA or CORAL feature transform");
    str(bl, "method", "pca | coral", true)->check(CLI::IsMember({"pca", "coral"}));
    str(bl, "train_images", "Image-domain features (VDNFEAT1)", true);
    str(bl, "train_videos", "Video-domain features (VDNFEAT1)", true);
    num(bl, "retain", "PCA retained variance fraction");
    num(bl, "lambda", "CORAL ridge term");
    str(bl, "out", "Transform path (VDNXFRM1)", true);

    Command& ex = add("extract", "Write flip-averaged unit features to a feature file");
    ex.app->add_option("--ckpt", ex.ckpt, "Embedding checkpoint")->required()->expected(1);
    str(ex, "network", "Network config (JSON)");
    str(ex, "images", "Image manifest (JSONL)");
    str(ex, "videos", "Video manifest (JSONL); one row per frame");
    str(ex, "out", "Feature path (VDNFEAT1)", true);

    Command& ab = add("ablation", "Train and evaluate a preset model table");
    str(ab, "preset", "Model preset (table1)");
    str(ab, "toy", "Toy corpus directory", true);
    str(ab, "rfnet", "Reference network checkpoint; pretrained when absent");
    str(ab, "network", "Network config (JSON)");
    str(ab, "iterations", "Training iterations per model")->check(CLI::PositiveNumber);
    str(ab, "fusion", "weighted adds fusion sub-rows")->check(CLI::IsMember({"uniform", "weighted"}));
    str(ab, "out", "Table path (JSON)", true);
    seed(ab);
  }
};

int usage_error(const CLI::App& app, const CLI::ParseError& e) {
  const CLI::App* sub = nullptr;
  for (const CLI::App* s : app.get_subcommands()) sub = s;
  const std::string where = sub ? "vda " + sub->get_name() : "vda";
  std::cerr << where << ": " << e.what() << "\n";
  if (dynamic_cast<const CLI::ExtrasError*>(&e) || dynamic_cast<const CLI::ValidationError*>(&e))
    std::cerr << (sub ? sub->help() : app.help());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  Cli cli;
  try {
    cli.app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return cli.app.exit(e);
    return usage_error(cli.app, e);
  }

  for (auto& [name, cmd] : cli.commands) {
    if (!cmd.app->parsed()) continue;
    json opts = cmd.options();
    // Numeric text flags go through as JSON numbers.
    for (const char* key : {"iterations"})
      if (opts.contains(key)) opts[key] = std::stoull(opts[key].get<std::string>());
    char* summary = nullptr;
    const vda_status st = vda_run_command(name.c_str(), opts.dump().c_str(), &summary);
    if (st != VDA_OK) {
      std::cerr << "vda " << name << ": error: " << vda_last_error() << "\n";
      return st == VDA_ERR_USAGE ? 1 : 2;
    }
    std::cout << summary << "\n";
    vda_string_free(summary);
    return 0;
  }
  return 1;
}
