#include "vda/vda.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "vda/degrade.hpp"
#include "vda/error.hpp"
#include "vda/fusion.hpp"
#include "vda/models.hpp"
#include "vda/parallel.hpp"
#include "vda/pipeline.hpp"
#include "vda/rng.hpp"

struct vda_network {
  vda::EmbeddingNet net;
};

struct vda_discriminator {
  vda::Discriminator disc;
};

namespace {

thread_local std::string g_last_error;

vda_status fail(vda_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <class F>
vda_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return VDA_OK;
  } catch (const vda::ConfigError& e) {
    return fail(VDA_ERR_USAGE, e.what());
  } catch (const vda::NumericError& e) {
    return fail(VDA_ERR_NUMERIC, e.what());
  } catch (const vda::Error& e) {
    return fail(VDA_ERR_DATA, e.what());
  } catch (const std::bad_alloc&) {
    return fail(VDA_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(VDA_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(VDA_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* what) {
  if (!p) throw vda::ConfigError(std::string(what) + " must not be null");
}

vda::Image make_image(const double* pixels, std::size_t height, std::size_t width) {
  need(pixels, "pixels");
  if (height == 0 || width == 0) throw vda::ConfigError("image dimensions must be positive");
  return vda::Image(width, height, std::vector<double>(pixels, pixels + height * width));
}

void copy_out(const std::vector<double>& v, double* out, std::size_t out_len) {
  need(out, "out");
  if (out_len < v.size())
    throw vda::ConfigError("output buffer holds " + std::to_string(out_len) + " values, need " +
                           std::to_string(v.size()));
  std::memcpy(out, v.data(), v.size() * sizeof(double));
}

}  // namespace

extern "C" {

const char* vda_version(void) {
  static const std::string v = vda::pipeline::git_describe();
  return v.c_str();
}

const char* vda_last_error(void) { return g_last_error.c_str(); }

void vda_string_free(char* s) { std::free(s); }

void vda_set_threads(size_t n) { vda::set_worker_count(n); }

size_t vda_threads(void) { return vda::worker_count(); }

vda_status vda_run_command(const char* command, const char* options_json, char** summary_json) {
  if (summary_json) *summary_json = nullptr;
  return guarded([&] {
    need(command, "command");
    need(options_json, "options");
    const vda::pipeline::CommandResult r = vda::pipeline::run(command, options_json);
    if (summary_json) *summary_json = dup_string(r.summary);
  });
}

const char* const* vda_command_names(void) {
  static const std::vector<const char*> names = [] {
    std::vector<const char*> v;
    for (const std::string& n : vda::pipeline::command_names()) v.push_back(n.c_str());
    v.push_back(nullptr);
    return v;
  }();
  return names.data();
}

vda_status vda_config_hash(const char* json, char* out_hex, size_t out_size) {
  return guarded([&] {
    need(json, "json");
    need(out_hex, "out_hex");
    const std::string h = vda::pipeline::config_hash(json);
    if (out_size < h.size() + 1) throw vda::ConfigError("hash buffer too small");
    std::memcpy(out_hex, h.c_str(), h.size() + 1);
  });
}

vda_status vda_network_load(const char* ckpt_path, const char* network_json_path, vda_network** out) {
  if (out) *out = nullptr;
  return guarded([&] {
    need(ckpt_path, "ckpt_path");
    need(out, "out");
    std::optional<std::filesystem::path> cfg;
    if (network_json_path) cfg = network_json_path;
    *out = new vda_network{vda::pipeline::load_network(ckpt_path, cfg)};
  });
}

void vda_network_free(vda_network* net) { delete net; }

size_t vda_network_feature_dim(const vda_network* net) { return net ? net->net.config().feature_dim : 0; }

size_t vda_network_input_size(const vda_network* net) { return net ? net->net.config().input_size : 0; }

vda_status vda_network_embed(const vda_network* net, const double* pixels, size_t height, size_t width, double* out,
                             size_t out_len) {
  return guarded([&] {
    need(net, "net");
    copy_out(net->net.embed(make_image(pixels, height, width)), out, out_len);
  });
}

vda_status vda_network_frame_feature(const vda_network* net, const double* pixels, size_t height, size_t width,
                                     double* out, size_t out_len) {
  return guarded([&] {
    need(net, "net");
    copy_out(vda::fusion::frame_feature(net->net, make_image(pixels, height, width)), out, out_len);
  });
}

vda_status vda_discriminator_load(const char* ckpt_path, vda_discriminator** out) {
  if (out) *out = nullptr;
  return guarded([&] {
    need(ckpt_path, "ckpt_path");
    need(out, "out");
    *out = new vda_discriminator{vda::pipeline::load_discriminator_file(ckpt_path)};
  });
}

void vda_discriminator_free(vda_discriminator* disc) { delete disc; }

size_t vda_discriminator_ways(const vda_discriminator* disc) {
  return disc ? static_cast<size_t>(disc->disc.config().ways) : 0;
}

vda_status vda_frame_weights(const vda_network* net, const vda_discriminator* disc, const double* frames, size_t n,
                             size_t height, size_t width, double* out_weights) {
  return guarded([&] {
    need(net, "net");
    need(disc, "disc");
    need(frames, "frames");
    need(out_weights, "out_weights");
    std::vector<vda::Image> images;
    images.reserve(n);
    for (size_t i = 0; i < n; ++i) images.push_back(make_image(frames + i * height * width, height, width));
    const std::vector<double> w = vda::fusion::discriminator_weights(disc->disc, net->net.embed_batch(images));
    std::memcpy(out_weights, w.data(), w.size() * sizeof(double));
  });
}

vda_status vda_degrade_image(const char* spec_json, const double* pixels, size_t height, size_t width, double* out) {
  return guarded([&] {
    need(spec_json, "spec_json");
    const vda::Image img = vda::degrade::apply(vda::degrade::spec_from_json(spec_json), make_image(pixels, height, width));
    copy_out(img.pixels(), out, height * width);
  });
}

vda_status vda_sample_spec(uint64_t seed, char** spec_json) {
  if (spec_json) *spec_json = nullptr;
  return guarded([&] {
    need(spec_json, "spec_json");
    vda::Rng rng(seed);
    *spec_json = dup_string(vda::degrade::spec_to_json(vda::degrade::sample_spec(rng)));
  });
}

}  // extern "C"
