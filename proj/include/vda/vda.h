#ifndef VDA_VDA_H
#define VDA_VDA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VDA_API __declspec(dllexport)
#else
#define VDA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vda_status {
  VDA_OK = 0,
  VDA_ERR_USAGE = 1,    /* bad argument, option or configuration */
  VDA_ERR_DATA = 2,     /* missing, malformed or inconsistent input data */
  VDA_ERR_NUMERIC = 3,  /* numerical precondition failed */
  VDA_ERR_INTERNAL = 4
} vda_status;

typedef struct vda_network vda_network;
typedef struct vda_discriminator vda_discriminator;

VDA_API const char* vda_version(void);

/* Message of the last failed call on this thread; empty after success. */
VDA_API const char* vda_last_error(void);

/* Strings returned through char** out-parameters are owned by the caller. */
VDA_API void vda_string_free(char* s);

/* Worker cap for parallel loops; 0 restores the VDA_THREADS default. */
VDA_API void vda_set_threads(size_t n);
VDA_API size_t vda_threads(void);

/* Runs a pipeline command (gen-toy, pretrain, train, eval, rank-frames,
   degrade, baseline, extract, ablation). `options_json` is an object whose
   keys mirror the command flags. On success *summary_json (may be NULL)
   receives a JSON summary. Every successful run writes a run manifest. */
VDA_API vda_status vda_run_command(const char* command, const char* options_json, char** summary_json);

/* Null-terminated list of command names; static storage. */
VDA_API const char* const* vda_command_names(void);

/* 16 hex digits plus terminator written to out_hex (at least 17 bytes). */
VDA_API vda_status vda_config_hash(const char* json, char* out_hex, size_t out_size);

/* Embedding network from a checkpoint; network_json_path may be NULL. */
VDA_API vda_status vda_network_load(const char* ckpt_path, const char* network_json_path, vda_network** out);
VDA_API void vda_network_free(vda_network* net);
VDA_API size_t vda_network_feature_dim(const vda_network* net);
VDA_API size_t vda_network_input_size(const vda_network* net);

/* Raw embedding of one height x width image with pixels in [0,1]. */
VDA_API vda_status vda_network_embed(const vda_network* net, const double* pixels, size_t height, size_t width,
                                     double* out, size_t out_len);

/* Flip-averaged unit-norm frame feature. */
VDA_API vda_status vda_network_frame_feature(const vda_network* net, const double* pixels, size_t height,
                                             size_t width, double* out, size_t out_len);

VDA_API vda_status vda_discriminator_load(const char* ckpt_path, vda_discriminator** out);
VDA_API void vda_discriminator_free(vda_discriminator* disc);
VDA_API size_t vda_discriminator_ways(const vda_discriminator* disc);

/* Image-domain probability of each of n frames (height x width each, stored
   back to back), computed from the raw embeddings of `net`. */
VDA_API vda_status vda_frame_weights(const vda_network* net, const vda_discriminator* disc, const double* frames,
                                     size_t n, size_t height, size_t width, double* out_weights);

/* Applies a degradation spec (JSON, same schema as the degrade command) to a
   height x width image; out must hold height*width values. */
VDA_API vda_status vda_degrade_image(const char* spec_json, const double* pixels, size_t height, size_t width,
                                     double* out);

/* Samples a degradation spec from the default ranges; *spec_json receives it. */
VDA_API vda_status vda_sample_spec(uint64_t seed, char** spec_json);

#ifdef __cplusplus
}
#endif

#endif
