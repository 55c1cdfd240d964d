#ifndef SQUID_EMU_H
#define SQUID_EMU_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum SquidStatus {
  SQUID_STATUS_OK = 0,
  SQUID_STATUS_NULL_POINTER = 1,
  SQUID_STATUS_INVALID_ARGUMENT = 2,
  SQUID_STATUS_RANGE = 3,
  SQUID_STATUS_UNKNOWN_KEY = 4,
  SQUID_STATUS_BUFFER_TOO_SMALL = 5,
  SQUID_STATUS_RUNTIME = 6,
  SQUID_STATUS_PANIC = 7,
} SquidStatus;

/**
 * Opaque instrument handle.
 */
typedef struct SquidEmu SquidEmu;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create a session with the default device and the given seed.
 * Returns null only if allocation panics. Free with [`squid_emu_free`].
 */
struct SquidEmu *squid_emu_new(uint64_t seed);

/**
 * Create a session from a `key = value` config file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SquidStatus squid_emu_new_from_config(const char *path, struct SquidEmu **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `h` must come from this library and not be used afterwards.
 */
void squid_emu_free(struct SquidEmu *h);

/**
 * Set a parameter by key name (`RIN`, `RNORM`, `VTH0`, `VOFF`, `SIGMA`,
 * `MODDEPTH`, `GDC`, `SEED`, `IDC`). `SEED` must be a non-negative integer.
 * The session is unchanged on error.
 *
 * # Safety
 * `h` must be a live handle, `key_name` a NUL-terminated string.
 */
enum SquidStatus squid_emu_set_param(struct SquidEmu *h, const char *key_name, double value);

/**
 * # Safety
 * `h` must be a live handle, `key_name` a NUL-terminated string, `out` valid.
 */
enum SquidStatus squid_emu_get_param(const struct SquidEmu *h, const char *key_name, double *out);

/**
 * Set the flux-bias current in amperes; clamped to the ADC range.
 *
 * # Safety
 * `h` must be a live handle.
 */
enum SquidStatus squid_emu_set_idc(struct SquidEmu *h, double i_dc);

/**
 * Apply one current pulse. `*switched` is 1 if the device switched, else 0.
 *
 * # Safety
 * `h` must be a live handle and `switched` valid.
 */
enum SquidStatus squid_emu_pulse(struct SquidEmu *h, double i_sq, int *switched);

/**
 * Return the device to the superconducting state and restart the noise
 * counters.
 *
 * # Safety
 * `h` must be a live handle.
 */
enum SquidStatus squid_emu_reset(struct SquidEmu *h);

/**
 * Switching probability at `points` evenly spaced amplitudes in
 * `[imin, imax]`, `pulses` pulses each, written to `out[0..points]`.
 *
 * # Safety
 * `h` must be a live handle and `out` must hold `out_len` doubles.
 */
enum SquidStatus squid_emu_s_curve(struct SquidEmu *h,
                                   double imin,
                                   double imax,
                                   size_t points,
                                   uint64_t pulses,
                                   double *out,
                                   size_t out_len);

/**
 * Run one text command (the TCP command set) and copy the reply, NUL
 * terminated, into `reply`. `*needed` receives the reply length plus one.
 * `ERR` replies are returned with status OK. On `BufferTooSmall` the
 * command has already run.
 *
 * # Safety
 * `h` must be a live handle, `line` NUL-terminated, `reply` must hold
 * `reply_len` bytes (or be null with `reply_len` 0), `needed` may be null.
 */
enum SquidStatus squid_emu_command(struct SquidEmu *h,
                                   const char *line,
                                   char *reply,
                                   size_t reply_len,
                                   size_t *needed);

/**
 * Retrapping current of the session's device for comparator threshold `v_th`.
 *
 * # Safety
 * `h` must be a live handle and `out` valid.
 */
enum SquidStatus squid_emu_retrap_current(const struct SquidEmu *h, double v_th, double *out);

/**
 * Flux-modulation voltage added to the threshold at flux bias `i_dc`.
 *
 * # Safety
 * `h` must be a live handle and `out` valid.
 */
enum SquidStatus squid_emu_modulation_voltage(const struct SquidEmu *h, double i_dc, double *out);

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *squid_emu_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *squid_emu_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SQUID_EMU_H */
