#include <doctest.h>

#include <filesystem>
#include <json.hpp>

#include "testing.hpp"
#include "vda/binary_io.hpp"
#include "vda/data_io.hpp"
#include "vda/error.hpp"
#include "vda/pipeline.hpp"

using namespace vda;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json run(const std::string& cmd, const json& opts) {
  return json::parse(pipeline::run(cmd, opts.dump()).summary);
}

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

/// A toy corpus, a short pretrain and a short model F run, shared by the cases below.
struct Workspace {
  fs::path root, toy, rf, train;

  Workspace(const std::string& name) : root(testing::scratch_dir(name)) {
    toy = root / "toy";
    rf = root / "rf";
    train = root / "train";
    write_file(root / "toy.json", testing::small_toy_config(2).to_json());
    write_file(root / "pretrain.json", R"({"iterations": 20, "pairs_per_batch": 6})");
    write_file(root / "train.json",
               R"({"preset": "F", "iterations": 3, "image_half": 8, "video_half": 8, "batch_total": 16})");
    run("gen-toy", {{"config", (root / "toy.json").string()}, {"out", toy.string()}});
    run("pretrain", {{"config", (root / "pretrain.json").string()},
                     {"images", (toy / toy_files::images).string()},
                     {"out", rf.string()}});
    run("train", {{"config", (root / "train.json").string()},
                  {"images", (toy / toy_files::images).string()},
                  {"videos", (toy / toy_files::videos).string()},
                  {"rfnet", (rf / "rfnet.ckpt").string()},
                  {"out", train.string()}});
  }
};

const Workspace& shared() {
  static const Workspace w("pipeline");
  return w;
}

}  // namespace

TEST_CASE("config_hash") {
  const std::string a = pipeline::config_hash(R"({"b": 1, "a": [1, 2], "c": {"y": 1, "x": 2}})");
  const std::string b = pipeline::config_hash(R"({"a":[1,2],"c":{"x":2,"y":1},"b":1})");
  CHECK(a == b);
  CHECK(a.size() == 16);
  CHECK(a.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(pipeline::config_hash(R"({"a": [2, 1], "b": 1, "c": {"x": 2, "y": 1}})") != a);
  CHECK(pipeline::config_hash("{}") == pipeline::config_hash(" { } "));
  CHECK_THROWS_AS(pipeline::config_hash("[1]"), ConfigError);
  CHECK_THROWS_AS(pipeline::config_hash("{"), ConfigError);
}

TEST_CASE("manifest_path") {
  CHECK(pipeline::manifest_path("runs/x", true) == fs::path("runs/x/run_manifest.json"));
  CHECK(pipeline::manifest_path("runs/report.json", false) == fs::path("runs/report.json.run_manifest.json"));
}

TEST_CASE("command names and dispatch errors") {
  const auto& names = pipeline::command_names();
  CHECK(names.size() == 9);
  CHECK(std::find(names.begin(), names.end(), "ablation") != names.end());
  CHECK_THROWS_AS(pipeline::run("fly", "{}"), ConfigError);
  CHECK_THROWS_AS(pipeline::run("train", "{}"), ConfigError);
  CHECK_THROWS_AS(pipeline::run("train", "not json"), ConfigError);
  CHECK_THROWS_AS(pipeline::run("eval", R"({"fusion": "weighted", "ckpt": "x", "videos": "y", "pairs": "z", "out": "o"})"),
                  ConfigError);
  CHECK_THROWS_AS(pipeline::run("degrade", R"({"in": "/nonexistent/a.pgm", "out": "/tmp/b.pgm"})"), IoError);
}

TEST_CASE("train writes its artifacts and a run manifest") {
  const Workspace& w = shared();
  for (const char* f : {"history.jsonl", "vdnet.ckpt", "disc.ckpt", "network.json", "train_config.json", "run_manifest.json"})
    CHECK(fs::exists(w.train / f));
  CHECK_FALSE(fs::exists(w.train / "rfnet.ckpt"));
  const json m = read_json(w.train / "run_manifest.json");
  CHECK(m["command"] == "train");
  CHECK(m["config_hash"].get<std::string>().size() == 16);
  CHECK(m["seed"] == 0);
  CHECK(m["outputs"].size() == 5);
  CHECK(m["wall_seconds"].get<double>() >= 0.0);
  CHECK(m.contains("git_describe"));
  CHECK(read_jsonl_lines(w.train / "history.jsonl").size() == 3);

  const Discriminator d = pipeline::load_discriminator_file(w.train / "disc.ckpt");
  CHECK(d.config().ways == 3);
  CHECK(d.config().input_dim == 32);
  CHECK(d.config().hidden == 16);
  CHECK_THROWS_AS(pipeline::load_discriminator_file(w.train / "vdnet.ckpt"), FormatError);

  const EmbeddingNet net = pipeline::load_network(w.train / "vdnet.ckpt");
  CHECK(net.config().feature_dim == 32);
}

TEST_CASE("re-running a command reproduces its outputs byte for byte") {
  const Workspace& w = shared();
  const fs::path again = w.root / "train_again";
  run("train", {{"config", (w.root / "train.json").string()},
                {"images", (w.toy / toy_files::images).string()},
                {"videos", (w.toy / toy_files::videos).string()},
                {"rfnet", (w.rf / "rfnet.ckpt").string()},
                {"out", again.string()}});
  for (const char* f : {"history.jsonl", "vdnet.ckpt", "disc.ckpt", "train_config.json"})
    CHECK(read_file(w.train / f) == read_file(again / f));
  CHECK(read_json(w.train / "run_manifest.json")["config_hash"] == read_json(again / "run_manifest.json")["config_hash"]);

  const fs::path seeded = w.root / "train_seed1";
  run("train", {{"config", (w.root / "train.json").string()},
                {"images", (w.toy / toy_files::images).string()},
                {"videos", (w.toy / toy_files::videos).string()},
                {"rfnet", (w.rf / "rfnet.ckpt").string()},
                {"seed", 1},
                {"out", seeded.string()}});
  CHECK(read_file(w.train / "vdnet.ckpt") != read_file(seeded / "vdnet.ckpt"));
  CHECK(read_json(w.train / "run_manifest.json")["config_hash"] != read_json(seeded / "run_manifest.json")["config_hash"]);
}

TEST_CASE("eval, rank-frames and degrade") {
  const Workspace& w = shared();
  const json base = {{"ckpt", (w.train / "vdnet.ckpt").string()},
                     {"videos", (w.toy / toy_files::eval_videos).string()},
                     {"pairs", (w.toy / toy_files::pairs).string()}};

  json opts = base;
  opts["out"] = (w.root / "eval_uniform.json").string();
  const json s = run("eval", opts);
  CHECK(s["mean_accuracy"].get<double>() >= 0.0);
  CHECK(fs::exists(w.root / "eval_uniform.json.run_manifest.json"));
  const json report = read_json(w.root / "eval_uniform.json");
  CHECK(report["protocol"] == "verification");
  CHECK(report["folds"].size() == 5);
  CHECK(report["tar_at_far"].is_object());

  opts = base;
  opts["fusion"] = "weighted";
  opts["disc"] = (w.train / "disc.ckpt").string();
  opts["frames"] = "5";
  opts["out"] = (w.root / "eval_weighted.json").string();
  run("eval", opts);
  CHECK(read_json(w.root / "eval_weighted.json")["fusion"] == "weighted");

  opts = base;
  opts["protocol"] = "set";
  opts["truth"] = (w.toy / toy_files::truth).string();
  opts["out"] = (w.root / "eval_set.json").string();
  run("eval", opts);
  CHECK(read_json(w.root / "eval_set.json")["rank_accuracy"].is_object());

  const auto videos = load_unlabeled_videos(w.toy / toy_files::eval_videos);
  run("rank-frames", {{"ckpt", (w.train / "vdnet.ckpt").string()},
                      {"disc", (w.train / "disc.ckpt").string()},
                      {"video", (w.toy / toy_files::eval_videos).string()},
                      {"id", videos[1].video_id},
                      {"out", (w.root / "ranks.jsonl").string()}});
  const auto lines = read_jsonl_lines(w.root / "ranks.jsonl");
  REQUIRE(lines.size() == videos[1].frames.size());
  double prev = 2.0;
  for (const std::string& l : lines) {
    const json j = json::parse(l);
    CHECK_FALSE(j.contains("video_id"));
    CHECK(j["weight"].get<double>() <= prev);
    prev = j["weight"].get<double>();
  }

  const fs::path img = w.toy / read_image_manifest(w.toy / toy_files::images)[0].path;
  const fs::path a = w.root / "deg_a.pgm", b = w.root / "deg_b.pgm";
  const json da = run("degrade", {{"in", img.string()}, {"seed", 4}, {"out", a.string()}});
  run("degrade", {{"in", img.string()}, {"seed", 4}, {"out", b.string()}});
  CHECK(read_file(a) == read_file(b));
  CHECK(da["spec"].is_object());
  const fs::path spec = w.root / "spec.json";
  write_file(spec, da["spec"].dump());
  const fs::path c = w.root / "deg_c.pgm";
  run("degrade", {{"in", img.string()}, {"spec", spec.string()}, {"out", c.string()}});
  CHECK(read_file(a) == read_file(c));
}

TEST_CASE("extract and baseline transforms") {
  const Workspace& w = shared();
  const fs::path fi = w.root / "img.feat", fv = w.root / "vid.feat";
  run("extract", {{"ckpt", (w.rf / "rfnet.ckpt").string()}, {"images", (w.toy / toy_files::images).string()}, {"out", fi.string()}});
  const json sv = run("extract", {{"ckpt", (w.rf / "rfnet.ckpt").string()},
                                  {"videos", (w.toy / toy_files::videos).string()},
                                  {"out", fv.string()}});
  CHECK(sv["rows"] == 8 * 6);
  CHECK(load_features(fi).dim(0) == 40);
  CHECK_THROWS_AS(run("extract", {{"ckpt", (w.rf / "rfnet.ckpt").string()}, {"out", fi.string()}}), ConfigError);

  const json coral = run("baseline", {{"method", "coral"},
                                      {"train_images", fi.string()},
                                      {"train_videos", fv.string()},
                                      {"out", (w.root / "coral.xfrm").string()}});
  CHECK(coral["output_dim"] == 32);
  CHECK(fs::file_size(w.root / "coral.xfrm") == 8 + 4 + 4 + 4 * 32 * 32 + 4 * 32);
  const json pca = run("baseline", {{"method", "pca"},
                                    {"retain", 0.9},
                                    {"train_images", fi.string()},
                                    {"train_videos", fv.string()},
                                    {"out", (w.root / "pca.xfrm").string()}});
  CHECK(pca["components"].get<int>() >= 1);
  CHECK(pca["components"] == pca["output_dim"]);
  CHECK_THROWS_AS(run("baseline", {{"method", "ica"},
                                   {"train_images", fi.string()},
                                   {"train_videos", fv.string()},
                                   {"out", (w.root / "x.xfrm").string()}}),
                  ConfigError);

  run("eval", {{"ckpt", (w.rf / "rfnet.ckpt").string()},
               {"videos", (w.toy / toy_files::eval_videos).string()},
               {"pairs", (w.toy / toy_files::pairs).string()},
               {"transform", (w.root / "coral.xfrm").string()},
               {"renormalize", true},
               {"out", (w.root / "eval_coral.json").string()}});
  CHECK(read_json(w.root / "eval_coral.json")["renormalized"] == true);
}

TEST_CASE("ablation table structure") {
  const Workspace& w = shared();
  const fs::path out = w.root / "table.json";
  run("ablation", {{"preset", "table1"},
                   {"toy", w.toy.string()},
                   {"rfnet", (w.rf / "rfnet.ckpt").string()},
                   {"iterations", 2},
                   {"out", out.string()}});
  const json t = read_json(out);
  CHECK(t["frames_per_video"] == json::array({"1", "5", "20", "50", "all"}));
  std::vector<std::string> names;
  for (const json& r : t["rows"]) names.push_back(r["model"].get<std::string>() + (r["fusion"].get<bool>() ? "+w" : ""));
  CHECK(names == std::vector<std::string>{"baseline", "baseline+w", "A", "B", "C", "D", "E", "E+w", "F", "F+w"});
  for (const json& r : t["rows"]) {
    REQUIRE(r["accuracy"].size() == 5);
    if (r["fusion"].get<bool>()) CHECK(r["accuracy"]["1"].is_null());
    const json& all = r["accuracy"]["all"];
    CHECK(all["accuracy"].get<double>() >= 0.0);
    CHECK(all["accuracy"].get<double>() <= 1.0);
    CHECK(r["accuracy"]["50"]["clamped_videos"].get<int>() > 0);
  }
  const json& f = t["rows"][8];
  CHECK(f["fr"] == "M/S/C");
  CHECK(f["adv"] == "three-way");
  CHECK(t["rows"][0]["adv"].is_null());
  CHECK_THROWS_AS(run("ablation", {{"preset", "table9"}, {"toy", w.toy.string()}, {"out", out.string()}}), ConfigError);
}
