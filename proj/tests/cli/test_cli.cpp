#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <string>

#include "testing.hpp"
#include "vda/binary_io.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

const fs::path& work() {
  static const fs::path dir = vda::testing::scratch_dir("cli");
  return dir;
}

Outcome vda_cli(const std::string& args) {
  const fs::path out = work() / "stdout.txt", err = work() / "stderr.txt";
  const std::string cmd = std::string("'") + VDA_CLI_PATH + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = vda::read_file(out);
  o.err = vda::read_file(err);
  return o;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("help and usage errors") {
  const Outcome help = vda_cli("--help");
  CHECK(help.code == 0);
  for (const char* name : {"gen-toy", "pretrain", "train", "eval", "rank-frames", "degrade", "baseline", "ablation"})
    CHECK(help.out.find(name) != std::string::npos);
  CHECK(vda_cli("train --help").code == 0);

  const Outcome none = vda_cli("");
  CHECK(none.code == 1);

  const Outcome missing = vda_cli("train --images a.jsonl --videos b.jsonl --out o");
  CHECK(missing.code == 1);
  CHECK(count_lines(missing.err) == 1);
  CHECK(missing.err.find("--config") != std::string::npos);

  const Outcome unknown = vda_cli("gen-toy --out x --bogus 3");
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("--bogus") != std::string::npos);
  CHECK(unknown.err.find("Usage") != std::string::npos);

  const Outcome bad_choice = vda_cli("baseline --method ica --train-images a --train-videos b --out c");
  CHECK(bad_choice.code == 1);

  const Outcome bad_seed = vda_cli("gen-toy --out x --seed -4");
  CHECK(bad_seed.code == 1);
}

TEST_CASE("data errors exit with 2") {
  const Outcome o = vda_cli("degrade --in " + q(work() / "missing.pgm") + " --out " + q(work() / "x.pgm"));
  CHECK(o.code == 2);
  CHECK(count_lines(o.err) == 1);
  CHECK(o.err.rfind("vda degrade: error:", 0) == 0);

  vda::write_file(work() / "bad.json", "{\"iterations\": ");
  const Outcome cfg = vda_cli("train --config " + q(work() / "bad.json") + " --images a --videos b --out " +
                              q(work() / "never"));
  CHECK(cfg.code == 1);
}

TEST_CASE("end-to-end run on a small corpus") {
  const fs::path toy = work() / "toy", rf = work() / "rf", tr = work() / "train";
  vda::write_file(work() / "toy.json", vda::testing::small_toy_config(4).to_json());
  vda::write_file(work() / "pretrain.json", R"({"iterations": 10, "pairs_per_batch": 6})");
  vda::write_file(work() / "train.json",
                  R"({"preset": "F", "iterations": 2, "image_half": 8, "video_half": 8, "batch_total": 16})");

  Outcome o = vda_cli("gen-toy --config " + q(work() / "toy.json") + " --out " + q(toy));
  REQUIRE(o.code == 0);
  CHECK(json::parse(o.out)["pairs"].get<int>() > 0);
  CHECK(fs::exists(toy / "run_manifest.json"));

  REQUIRE(vda_cli("pretrain --config " + q(work() / "pretrain.json") + " --images " + q(toy / "images.jsonl") +
                  " --out " + q(rf))
              .code == 0);
  o = vda_cli("train --config " + q(work() / "train.json") + " --images " + q(toy / "images.jsonl") + " --videos " +
              q(toy / "videos.jsonl") + " --rfnet " + q(rf / "rfnet.ckpt") + " --out " + q(tr));
  REQUIRE(o.code == 0);
  CHECK(json::parse(o.out)["discriminator"] == true);

  const fs::path report = work() / "report.json";
  o = vda_cli("eval --ckpt " + q(tr / "vdnet.ckpt") + " " + q(tr / "disc.ckpt") + " --videos " +
              q(toy / "eval_videos.jsonl") + " --pairs " + q(toy / "pairs.jsonl") +
              " --fusion weighted --frames 5 --out " + q(report));
  REQUIRE(o.code == 0);
  const json r = json::parse(vda::read_file(report));
  CHECK(r["fusion"] == "weighted");
  CHECK(r["mean_accuracy"].get<double>() >= 0.0);
  CHECK(fs::exists(work() / "report.json.run_manifest.json"));

  o = vda_cli("rank-frames --ckpt " + q(tr / "vdnet.ckpt") + " " + q(tr / "disc.ckpt") + " --video " +
              q(toy / "eval_videos.jsonl") + " --out " + q(work() / "ranks.jsonl"));
  REQUIRE(o.code == 0);
  const std::string ranks = vda::read_file(work() / "ranks.jsonl");
  CHECK(count_lines(ranks) == 20 * 6);
  CHECK(json::parse(ranks.substr(0, ranks.find('\n'))).contains("video_id"));

  o = vda_cli("eval --ckpt " + q(tr / "vdnet.ckpt") + " --videos " + q(toy / "eval_videos.jsonl") + " --pairs " +
              q(toy / "pairs.jsonl") + " --fusion weighted --out " + q(work() / "r2.json"));
  CHECK(o.code == 1);

  const fs::path table = work() / "table.json";
  o = vda_cli("ablation --preset table1 --toy " + q(toy) + " --rfnet " + q(rf / "rfnet.ckpt") +
              " --iterations 2 --out " + q(table));
  REQUIRE(o.code == 0);
  const json t = json::parse(vda::read_file(table));
  CHECK(t["rows"].size() == 10);
  CHECK(t["frames_per_video"].size() == 5);
  CHECK(t["rows"][0]["model"] == "baseline");
}
