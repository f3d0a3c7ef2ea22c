#ifndef CRTSPLIT_H
#define CRTSPLIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define CRTSPLIT_MODE_DYNAMIC 0

#define CRTSPLIT_MODE_STATIC 1

typedef enum CrtsplitStatus {
  CRTSPLIT_STATUS_OK = 0,
  CRTSPLIT_STATUS_NULL_POINTER = 1,
  CRTSPLIT_STATUS_BAD_PARAMETERS = 2,
  CRTSPLIT_STATUS_TRANSPORT = 3,
  CRTSPLIT_STATUS_INTEGRITY = 4,
  CRTSPLIT_STATUS_KEY_FILE = 5,
  CRTSPLIT_STATUS_BUFFER_TOO_SMALL = 6,
  CRTSPLIT_STATUS_PANIC = 7,
} CrtsplitStatus;

/**
 * A key: cipher, channel counts, seed and moduli.
 */
typedef struct CrtsplitConfig CrtsplitConfig;

typedef struct CrtsplitReceiver CrtsplitReceiver;

typedef struct CrtsplitSender CrtsplitSender;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *crtsplit_last_error(void);

/**
 * Runs the setup phase. `mode` is `CRTSPLIT_MODE_DYNAMIC` or
 * `CRTSPLIT_MODE_STATIC`; key and IV are 16 bytes each.
 *
 * # Safety
 * `key` and `iv` must point to `key_len`/`iv_len` readable bytes and `out`
 * must be writable.
 */
enum CrtsplitStatus crtsplit_config_new(uint16_t available,
                                        uint16_t used,
                                        uint16_t multiplier,
                                        uint64_t seed,
                                        uint8_t mode,
                                        const uint8_t *key,
                                        size_t key_len,
                                        const uint8_t *iv,
                                        size_t iv_len,
                                        struct CrtsplitConfig **out);

/**
 * Parses a key file image.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` must be writable.
 */
enum CrtsplitStatus crtsplit_config_from_bytes(const uint8_t *data,
                                               size_t len,
                                               struct CrtsplitConfig **out);

/**
 * Writes the key file image.
 *
 * # Safety
 * `cfg` must come from this library; `out` must hold `capacity` bytes.
 */
enum CrtsplitStatus crtsplit_config_serialize(const struct CrtsplitConfig *cfg,
                                              uint8_t *out,
                                              size_t capacity,
                                              size_t *written);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards.
 */
void crtsplit_config_free(struct CrtsplitConfig *cfg);

/**
 * Plaintext bytes per superblock, or 0 for a null handle.
 *
 * # Safety
 * `cfg` must be null or come from this library.
 */
size_t crtsplit_config_superblock_bytes(const struct CrtsplitConfig *cfg);

/**
 * Number of channels `A`, or 0 for a null handle.
 *
 * # Safety
 * `cfg` must be null or come from this library.
 */
uint16_t crtsplit_config_channels(const struct CrtsplitConfig *cfg);

/**
 * Cell width of one channel, or 0 when out of range.
 *
 * # Safety
 * `cfg` must be null or come from this library.
 */
size_t crtsplit_config_cell_width(const struct CrtsplitConfig *cfg, uint16_t channel);

/**
 * Sum of all cell widths: the bytes one superblock occupies on the wire.
 *
 * # Safety
 * `cfg` must be null or come from this library.
 */
size_t crtsplit_config_frame_bytes(const struct CrtsplitConfig *cfg);

/**
 * # Safety
 * `cfg` must come from this library; `out` must be writable.
 */
enum CrtsplitStatus crtsplit_sender_new(const struct CrtsplitConfig *cfg,
                                        struct CrtsplitSender **out);

/**
 * # Safety
 * `sender` must come from this library and not be used afterwards.
 */
void crtsplit_sender_free(struct CrtsplitSender *sender);

/**
 * Encrypts and splits one superblock. `plaintext_len` must equal the
 * superblock size; the output is every channel's cell concatenated in
 * channel order (`crtsplit_config_frame_bytes` long).
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum CrtsplitStatus crtsplit_sender_process(struct CrtsplitSender *sender,
                                            const uint8_t *plaintext,
                                            size_t plaintext_len,
                                            uint8_t *out,
                                            size_t capacity,
                                            size_t *written);

/**
 * # Safety
 * `cfg` must come from this library; `out` must be writable.
 */
enum CrtsplitStatus crtsplit_receiver_new(const struct CrtsplitConfig *cfg,
                                          struct CrtsplitReceiver **out);

/**
 * # Safety
 * `receiver` must come from this library and not be used afterwards.
 */
void crtsplit_receiver_free(struct CrtsplitReceiver *receiver);

/**
 * Inverse of `crtsplit_sender_process`: takes one frame of all channels'
 * cells and writes the decrypted superblock.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum CrtsplitStatus crtsplit_receiver_process(struct CrtsplitReceiver *receiver,
                                              const uint8_t *frame,
                                              size_t frame_len,
                                              uint8_t *out,
                                              size_t capacity,
                                              size_t *written);

/**
 * Residues of the big-endian integer `x` modulo each of `count` moduli.
 *
 * # Safety
 * `x` must hold `x_len` bytes; `moduli` and `residues` `count` values.
 */
enum CrtsplitStatus crtsplit_crt_split(const uint8_t *x,
                                       size_t x_len,
                                       const uint64_t *moduli,
                                       size_t count,
                                       uint64_t *residues);

/**
 * The unique integer below the moduli product with the given residues,
 * written big-endian and left-padded to exactly `width` bytes.
 *
 * # Safety
 * `moduli` and `residues` must hold `count` values; `out` `width` bytes.
 */
enum CrtsplitStatus crtsplit_crt_combine(const uint64_t *residues,
                                         const uint64_t *moduli,
                                         size_t count,
                                         uint8_t *out,
                                         size_t width);

/**
 * Fraction of channel bandwidth lost to byte alignment.
 *
 * # Safety
 * `loss` must be writable.
 */
enum CrtsplitStatus crtsplit_bandwidth_loss(uint64_t block_bits,
                                            uint64_t multiplier,
                                            uint64_t channels,
                                            double *loss);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRTSPLIT_H */
