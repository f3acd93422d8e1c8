/* Exercises the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "vda/vda.h"

static int failures = 0;
static int checks = 0;

#define CHECK(cond)                                                    \
  do {                                                                 \
    ++checks;                                                          \
    if (!(cond)) {                                                     \
      ++failures;                                                      \
      fprintf(stderr, "%s:%d: CHECK(%s) failed\n", __FILE__, __LINE__, #cond); \
    }                                                                  \
  } while (0)

static char work[1024];

static const char* path(const char* name) {
  static char buf[8][1200];
  static int slot = 0;
  slot = (slot + 1) % 8;
  snprintf(buf[slot], sizeof buf[slot], "%s/%s", work, name);
  return buf[slot];
}

static void write_text(const char* name, const char* text) {
  FILE* f = fopen(path(name), "w");
  if (!f) {
    fprintf(stderr, "cannot write %s\n", path(name));
    exit(2);
  }
  fputs(text, f);
  fclose(f);
}

static vda_status run(const char* command, const char* fmt, const char* a, const char* b, const char* c,
                      const char* d) {
  char opts[8192];
  snprintf(opts, sizeof opts, fmt, a, b, c, d);
  char* summary = NULL;
  vda_status s = vda_run_command(command, opts, &summary);
  if (s != VDA_OK) fprintf(stderr, "%s failed: %s\n", command, vda_last_error());
  vda_string_free(summary);
  return s;
}

static void test_basics(void) {
  CHECK(strlen(vda_version()) > 0);
  const char* const* names = vda_command_names();
  int n = 0, has_train = 0;
  while (names[n]) {
    if (strcmp(names[n], "train") == 0) has_train = 1;
    ++n;
  }
  CHECK(n == 9);
  CHECK(has_train);

  char hex[17];
  CHECK(vda_config_hash("{\"b\": 1, \"a\": 2}", hex, sizeof hex) == VDA_OK);
  CHECK(strlen(hex) == 16);
  char hex2[17];
  CHECK(vda_config_hash("{\"a\":2,\"b\":1}", hex2, sizeof hex2) == VDA_OK);
  CHECK(strcmp(hex, hex2) == 0);
  CHECK(strlen(vda_last_error()) == 0);

  char small[8];
  CHECK(vda_config_hash("{}", small, sizeof small) == VDA_ERR_USAGE);
  CHECK(strlen(vda_last_error()) > 0);
  CHECK(vda_config_hash("[1]", hex, sizeof hex) == VDA_ERR_USAGE);
  CHECK(vda_config_hash(NULL, hex, sizeof hex) == VDA_ERR_USAGE);

  CHECK(vda_run_command("fly", "{}", NULL) == VDA_ERR_USAGE);
  CHECK(strstr(vda_last_error(), "fly") != NULL);
  CHECK(vda_run_command("train", "{}", NULL) == VDA_ERR_USAGE);
  CHECK(vda_run_command("degrade", "{\"in\": \"/nonexistent.pgm\", \"out\": \"/tmp/x.pgm\"}", NULL) == VDA_ERR_DATA);

  vda_set_threads(2);
  CHECK(vda_threads() == 2);
  vda_set_threads(0);
  CHECK(vda_threads() >= 1);
}

static void test_degrade(void) {
  char* spec = NULL;
  CHECK(vda_sample_spec(3, &spec) == VDA_OK);
  CHECK(spec != NULL && spec[0] == '{');
  double img[32 * 32], out[32 * 32];
  for (int i = 0; i < 32 * 32; ++i) img[i] = 0.4;
  CHECK(vda_degrade_image(spec, img, 32, 32, out) == VDA_OK);
  for (int i = 0; i < 32 * 32; ++i) CHECK(out[i] >= 0.0 && out[i] <= 1.0);
  vda_string_free(spec);

  CHECK(vda_degrade_image("{}", img, 32, 32, out) == VDA_OK);
  for (int i = 0; i < 32 * 32; ++i) CHECK(fabs(out[i] - img[i]) < 1e-12);
  CHECK(vda_degrade_image("{\"blur\": 5}", img, 32, 32, out) != VDA_OK);
}

static void test_models(void) {
  write_text("toy.json",
             "{\"n_identities\": 6, \"images_per_identity\": 3, \"holdout_per_identity\": 1, \"n_videos\": 4, "
             "\"frames_per_video\": 4, \"eval_videos_per_identity\": 2, \"n_folds\": 3}");
  write_text("pretrain.json", "{\"iterations\": 3, \"pairs_per_batch\": 4}");
  write_text("train.json",
             "{\"preset\": \"F\", \"iterations\": 2, \"image_half\": 8, \"video_half\": 4, \"batch_total\": 12}");
  CHECK(run("gen-toy", "{\"config\": \"%s\", \"out\": \"%s\"}", path("toy.json"), path("toy"), "", "") == VDA_OK);
  CHECK(run("pretrain", "{\"config\": \"%s\", \"images\": \"%s\", \"out\": \"%s\"}", path("pretrain.json"),
            path("toy/images.jsonl"), path("rf"), "") == VDA_OK);

  char opts[4096];
  snprintf(opts, sizeof opts,
           "{\"config\": \"%s\", \"images\": \"%s\", \"videos\": \"%s\", \"rfnet\": \"%s\", \"out\": \"%s\"}",
           path("train.json"), path("toy/images.jsonl"), path("toy/videos.jsonl"), path("rf/rfnet.ckpt"),
           path("train"));
  char* summary = NULL;
  const vda_status ts = vda_run_command("train", opts, &summary);
  if (ts != VDA_OK) fprintf(stderr, "train: %s\n", vda_last_error());
  CHECK(ts == VDA_OK);
  CHECK(summary != NULL && strstr(summary, "manifest") != NULL);
  vda_string_free(summary);
  FILE* m = fopen(path("train/run_manifest.json"), "r");
  CHECK(m != NULL);
  if (m) fclose(m);

  vda_network* net = NULL;
  CHECK(vda_network_load(path("train/vdnet.ckpt"), NULL, &net) == VDA_OK);
  CHECK(net != NULL);
  if (!net) return;
  CHECK(vda_network_feature_dim(net) == 32);
  CHECK(vda_network_input_size(net) == 32);

  double img[32 * 32];
  for (int i = 0; i < 32 * 32; ++i) img[i] = (double)((i * 37) % 101) / 100.0;
  double emb[32], feat[32];
  CHECK(vda_network_embed(net, img, 32, 32, emb, 32) == VDA_OK);
  CHECK(vda_network_frame_feature(net, img, 32, 32, feat, 32) == VDA_OK);
  double norm = 0;
  for (int k = 0; k < 32; ++k) norm += feat[k] * feat[k];
  CHECK(fabs(sqrt(norm) - 1.0) < 1e-8);
  CHECK(vda_network_embed(net, img, 16, 64, emb, 32) == VDA_ERR_DATA);
  CHECK(vda_network_embed(net, img, 32, 32, emb, 31) == VDA_ERR_USAGE);

  vda_discriminator* disc = NULL;
  CHECK(vda_discriminator_load(path("train/disc.ckpt"), &disc) == VDA_OK);
  if (disc) {
    CHECK(vda_discriminator_ways(disc) == 3);
    double frames[2 * 32 * 32], w[2];
    memcpy(frames, img, sizeof img);
    for (int i = 0; i < 32 * 32; ++i) frames[32 * 32 + i] = 0.5;
    CHECK(vda_frame_weights(net, disc, frames, 2, 32, 32, w) == VDA_OK);
    CHECK(w[0] > 0.0 && w[0] < 1.0);
    CHECK(w[1] > 0.0 && w[1] < 1.0);
    vda_discriminator_free(disc);
  }
  vda_discriminator* bad = NULL;
  CHECK(vda_discriminator_load(path("train/vdnet.ckpt"), &bad) == VDA_ERR_DATA);
  CHECK(bad == NULL);
  vda_network_free(net);

  vda_network* missing = NULL;
  CHECK(vda_network_load(path("nope.ckpt"), NULL, &missing) == VDA_ERR_DATA);
  CHECK(missing == NULL);
  vda_network_free(NULL);
  vda_discriminator_free(NULL);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    fprintf(stderr, "usage: test_capi <work-dir>\n");
    return 2;
  }
  snprintf(work, sizeof work, "%s", argv[1]);
  test_basics();
  test_degrade();
  test_models();
  printf("%d checks, %d failures\n", checks, failures);
  return failures == 0 ? 0 : 1;
}
