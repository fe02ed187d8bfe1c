/* C interface for the cbd bit-plane compression library. */

#ifndef CBD_H
#define CBD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * How weight signs are stored alongside magnitude planes.
 */
typedef enum CbdSignMode {
  /**
   * One shared sign plane next to the magnitude planes.
   */
  CbdSignPlane = 0,
  /**
   * Separate positive and negative magnitude plane stacks.
   */
  CbdSignSplit = 1,
} CbdSignMode;

/**
 * Whether planes may be stored as low-rank factor pairs.
 */
typedef enum CbdGate {
  /**
   * Factor a plane only when that makes it strictly smaller.
   */
  CbdGateOn = 0,
  /**
   * Factor every eligible plane regardless of size.
   */
  CbdGateAlways = 1,
  /**
   * Store every plane densely.
   */
  CbdGateOff = 2,
} CbdGate;

/**
 * Result code returned by every fallible entry point.
 */
typedef enum CbdStatus {
  CbdOk = 0,
  /**
   * A required pointer argument was null.
   */
  CbdNullPointer = 1,
  /**
   * Rejected argument, configuration value, or shape.
   */
  CbdInvalidArgument = 2,
  /**
   * Operating-system I/O failure.
   */
  CbdIoError = 3,
  /**
   * Malformed or unsupported container bytes.
   */
  CbdFormatError = 4,
  /**
   * Input on which the operation is mathematically undefined.
   */
  CbdDegenerateInput = 5,
  /**
   * Internal invariant violation; the error message has details.
   */
  CbdInternalError = 6,
} CbdStatus;

/**
 * Layer geometry kind.
 */
typedef enum CbdLayerKind {
  CbdLayerConv = 0,
  CbdLayerFullyConnected = 1,
} CbdLayerKind;

/**
 * Opaque compressed layer handle.
 */
typedef struct CbdLayer CbdLayer;

/**
 * Opaque dense tensor handle.
 */
typedef struct CbdTensor CbdTensor;

/**
 * Compression knobs. Obtain defaults from [`cbd_options_default`].
 */
typedef struct CbdOptions {
  /**
   * Stored planes per weight (J), including sign handling. Range 2..=52.
   */
  uint32_t bits;
  /**
   * Rank target as a fraction of min(rows, cols), in (0, 1].
   */
  double bottleneck;
  enum CbdSignMode sign_mode;
  enum CbdGate gate;
} CbdOptions;

/**
 * Layer geometry. `kernel`, `stride`, and `pad` are ignored for fully
 * connected layers.
 */
typedef struct CbdLayerDesc {
  enum CbdLayerKind kind;
  /**
   * Input channels, or input features for fully connected layers.
   */
  uint32_t inputs;
  /**
   * Output channels, or output features for fully connected layers.
   */
  uint32_t outputs;
  uint32_t kernel;
  uint32_t stride;
  uint32_t pad;
} CbdLayerDesc;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on the calling thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cbd_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *cbd_version(void);

/**
 * Default compression options: 7 planes, 0.3 bottleneck, shared sign plane,
 * size-gated factoring.
 */
struct CbdOptions cbd_options_default(void);

/**
 * Creates a tensor from `ndim` dimensions and `len` row-major values. The
 * buffers are copied; `len` must equal the product of the dimensions.
 */
enum CbdStatus cbd_tensor_create(const uint64_t *dims,
                                 uintptr_t ndim,
                                 const float *data,
                                 uintptr_t len,
                                 struct CbdTensor **out);

/**
 * Loads a tensor container from `path`.
 */
enum CbdStatus cbd_tensor_load(const char *path, struct CbdTensor **out);

/**
 * Writes `tensor` to `path` as a tensor container.
 */
enum CbdStatus cbd_tensor_save(const struct CbdTensor *tensor, const char *path);

/**
 * Number of dimensions, or 0 if `tensor` is null.
 */
uintptr_t cbd_tensor_ndim(const struct CbdTensor *tensor);

/**
 * Writes the size of dimension `axis` to `out`.
 */
enum CbdStatus cbd_tensor_dim(const struct CbdTensor *tensor, uintptr_t axis, uint64_t *out);

/**
 * Total number of elements, or 0 if `tensor` is null.
 */
uintptr_t cbd_tensor_len(const struct CbdTensor *tensor);

/**
 * Borrowed pointer to the row-major element data, or null if `tensor` is
 * null. Valid until the handle is freed.
 */
const float *cbd_tensor_data(const struct CbdTensor *tensor);

/**
 * Frees a tensor handle. Null is ignored.
 */
void cbd_tensor_free(struct CbdTensor *tensor);

/**
 * Compresses `weights` into bit-planes. Conv tensors must be shaped
 * `(inputs, kernel, kernel, outputs)`, fully connected `(inputs, outputs)`.
 */
enum CbdStatus cbd_layer_compress(const struct CbdTensor *weights,
                                  const char *name,
                                  struct CbdLayerDesc desc,
                                  struct CbdOptions options,
                                  struct CbdLayer **out);

/**
 * Loads a compressed layer container from `path`.
 */
enum CbdStatus cbd_layer_load(const char *path, struct CbdLayer **out);

/**
 * Writes `layer` to `path` as a layer container.
 */
enum CbdStatus cbd_layer_save(const struct CbdLayer *layer, const char *path);

/**
 * Reconstructs the dense weight tensor in the layer's declared shape.
 */
enum CbdStatus cbd_layer_decompress(const struct CbdLayer *layer, struct CbdTensor **out);

/**
 * Layer name, or null if `layer` is null. Valid until the handle is freed.
 */
const char *cbd_layer_name(const struct CbdLayer *layer);

/**
 * Stored planes per weight (J), or 0 if `layer` is null.
 */
uint32_t cbd_layer_planes(const struct CbdLayer *layer);

/**
 * Writes the plane and sign payload size in bits to `out`. Per-layer scalar
 * overhead is not included.
 */
enum CbdStatus cbd_layer_payload_bits(const struct CbdLayer *layer, uint64_t *out);

/**
 * Writes the stored bits per weight to `out`, optionally counting the
 * per-layer scalar overhead.
 */
enum CbdStatus cbd_layer_bitrate(const struct CbdLayer *layer, bool include_overhead, double *out);

/**
 * Writes the worst-case absolute reconstruction error to `out`.
 */
enum CbdStatus cbd_layer_error_bound(const struct CbdLayer *layer, double *out);

/**
 * Frees a layer handle. Null is ignored.
 */
void cbd_layer_free(struct CbdLayer *layer);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CBD_H */
