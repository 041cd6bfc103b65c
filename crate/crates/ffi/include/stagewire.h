/* stagewire C API — generated by cbindgen, do not edit. */

#ifndef STAGEWIRE_H
#define STAGEWIRE_H

/* Regenerate by building the stagewire-ffi crate. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 What happened to one session between consecutive frames.
 */
typedef enum SwEventKind {
  SW_EVENT_KIND_ADD = 0,
  SW_EVENT_KIND_UPDATE = 1,
  SW_EVENT_KIND_REMOVE = 2,
} SwEventKind;

/*
 Result of every fallible call in this API.
 */
typedef enum SwStatus {
  /*
   The call succeeded and all out-parameters are valid.
   */
  SW_STATUS_OK = 0,
  /*
   A required pointer argument was NULL.
   */
  SW_STATUS_NULL_ARGUMENT = 1,
  /*
   A string argument was not valid UTF-8.
   */
  SW_STATUS_INVALID_UTF8 = 2,
  /*
   An argument value violated the documented contract.
   */
  SW_STATUS_INVALID_ARGUMENT = 3,
  /*
   The argument at this index holds a different type.
   */
  SW_STATUS_TYPE_MISMATCH = 4,
  /*
   An index was past the end of the collection.
   */
  SW_STATUS_OUT_OF_RANGE = 5,
  /*
   The caller buffer is too small; `needed` holds the full size.
   */
  SW_STATUS_BUFFER_TOO_SMALL = 6,
  /*
   The bytes do not decode as the expected OSC unit.
   */
  SW_STATUS_PARSE_FAILED = 7,
  /*
   The value cannot be encoded to the wire.
   */
  SW_STATUS_ENCODE_FAILED = 8,
  /*
   The bundle decoded, but is not a TUIO 2Dobj frame.
   */
  SW_STATUS_NOT_TUIO = 9,
  /*
   A sample timestamp did not advance past its predecessor.
   */
  SW_STATUS_NON_MONOTONIC_TIME = 10,
  /*
   A configuration field is out of its legal range.
   */
  SW_STATUS_BAD_CONFIG = 11,
} SwStatus;

/*
 A running heartbeat detector. Opaque.
 */
typedef struct SwDetector SwDetector;

/*
 An OSC message being built or inspected. Opaque.
 */
typedef struct SwMessage SwMessage;

/*
 A stateful fiducial tracker. Opaque.
 */
typedef struct SwTracker SwTracker;

/*
 Detector tuning; obtain defaults from `sw_detector_config_default`.
 */
typedef struct SwDetectorConfig {
  /*
   Nominal samples per second.
   */
  double sample_rate_hz;
  /*
   Span of the windowed delta, in ms.
   */
  uint64_t window_ms;
  /*
   Trigger threshold as a multiple of the baseline.
   */
  double gain;
  /*
   Baseline EMA half-life, in ms.
   */
  uint64_t baseline_halflife_ms;
  /*
   Dead time after a beat, in ms.
   */
  uint64_t refractory_ms;
  /*
   Settling time before the first beat can fire, in ms.
   */
  uint64_t warmup_ms;
  /*
   Absolute threshold floor; 0 preserves scale invariance.
   */
  double threshold_floor;
  /*
   Negate samples for sensors that read beats as drops.
   */
  bool invert;
} SwDetectorConfig;

/*
 One detected beat.
 */
typedef struct SwHeartbeat {
  /*
   Timestamp of the triggering sample, in stream ms.
   */
  uint64_t t_ms;
  /*
   Windowed delta at the trigger; grows with pulse amplitude.
   */
  double strength;
} SwHeartbeat;

/*
 One tracker event, flattened for C. For removes, the pose fields hold
 the last state seen before lift-off.
 */
typedef struct SwSurfaceEvent {
  enum SwEventKind kind;
  /*
   fseq of the frame that produced this event.
   */
  int32_t frame;
  int32_t session_id;
  int32_t class_id;
  float x;
  float y;
  /*
   Radians in [0, 2π).
   */
  float angle;
  float vel_x;
  float vel_y;
  float vel_rot;
  float accel_motion;
  float accel_rot;
} SwSurfaceEvent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 A static description of a status code, for logs. Never NULL.
 */
const char *sw_status_describe(enum SwStatus status);

/*
 Create a message with the given '/'-rooted address and no arguments.

 # Safety
 `address` must be a NUL-terminated string; `out` must be writable.
 */
enum SwStatus sw_message_new(const char *address, struct SwMessage **out);

/*
 Release a message handle. NULL is a no-op.

 # Safety
 `msg` must be a handle from this API, not yet freed.
 */
void sw_message_free(struct SwMessage *msg);

/*
 Append a 32-bit integer argument.

 # Safety
 `msg` must be a live handle from this API.
 */
enum SwStatus sw_message_add_int(struct SwMessage *msg, int32_t value);

/*
 Append a 32-bit float argument.

 # Safety
 `msg` must be a live handle from this API.
 */
enum SwStatus sw_message_add_float(struct SwMessage *msg, float value);

/*
 Append a string argument.

 # Safety
 `msg` must be a live handle; `value` a NUL-terminated string.
 */
enum SwStatus sw_message_add_str(struct SwMessage *msg, const char *value);

/*
 Append a blob argument. `bytes` may be NULL only when `len` is 0.

 # Safety
 `msg` must be a live handle; `bytes` must point to `len` bytes.
 */
enum SwStatus sw_message_add_blob(struct SwMessage *msg, const uint8_t *bytes, size_t len);

/*
 Encode the message to OSC wire bytes.

 On `SW_STATUS_BUFFER_TOO_SMALL`, `written` holds the size required.

 # Safety
 `msg` must be a live handle; `buf` must hold `cap` writable bytes.
 */
enum SwStatus sw_message_encode(const struct SwMessage *msg,
                                uint8_t *buf,
                                size_t cap,
                                size_t *written);

/*
 Decode one datagram as an OSC message (not a bundle).

 # Safety
 `bytes` must point to `len` readable bytes; `out` must be writable.
 */
enum SwStatus sw_message_decode(const uint8_t *bytes, size_t len, struct SwMessage **out);

/*
 Copy the message's address into `buf`.

 # Safety
 `msg` must be a live handle; `buf`/`needed` per the buffer convention.
 */
enum SwStatus sw_message_address(const struct SwMessage *msg,
                                 char *buf,
                                 size_t cap,
                                 size_t *needed);

/*
 Number of arguments; 0 for a NULL handle.

 # Safety
 `msg` must be a live handle or NULL.
 */
size_t sw_message_arg_count(const struct SwMessage *msg);

/*
 The OSC type tag ('i', 'f', 's', or 'b') of the argument at `index`.

 # Safety
 `msg` must be a live handle; `tag` must be writable.
 */
enum SwStatus sw_message_arg_tag(const struct SwMessage *msg, size_t index, char *tag);

/*
 Read the integer argument at `index`.

 # Safety
 `msg` must be a live handle; `value` must be writable.
 */
enum SwStatus sw_message_arg_int(const struct SwMessage *msg, size_t index, int32_t *value);

/*
 Read the float argument at `index`.

 # Safety
 `msg` must be a live handle; `value` must be writable.
 */
enum SwStatus sw_message_arg_float(const struct SwMessage *msg, size_t index, float *value);

/*
 Copy the string argument at `index` into `buf`.

 # Safety
 `msg` must be a live handle; `buf`/`needed` per the buffer convention.
 */
enum SwStatus sw_message_arg_str(const struct SwMessage *msg,
                                 size_t index,
                                 char *buf,
                                 size_t cap,
                                 size_t *needed);

/*
 Copy the blob argument at `index` into `buf` (no NUL terminator).

 On `SW_STATUS_BUFFER_TOO_SMALL`, `needed` holds the blob's size.

 # Safety
 `msg` must be a live handle; `buf` must hold `cap` writable bytes.
 */
enum SwStatus sw_message_arg_blob(const struct SwMessage *msg,
                                  size_t index,
                                  uint8_t *buf,
                                  size_t cap,
                                  size_t *needed);

/*
 Match an OSC 1.0 address pattern against a concrete address.

 Malformed patterns return `SW_STATUS_INVALID_ARGUMENT`.

 # Safety
 `pattern` and `address` must be NUL-terminated strings; `matched`
 must be writable.
 */
enum SwStatus sw_pattern_match(const char *pattern, const char *address, bool *matched);

/*
 Fill `out` with the defaults that need no per-performer calibration.

 # Safety
 `out` must be writable.
 */
enum SwStatus sw_detector_config_default(struct SwDetectorConfig *out);

/*
 Create a detector from `config` (NULL means defaults).

 # Safety
 `out` must be writable; `config` must be NULL or point to a valid
 configuration struct.
 */
enum SwStatus sw_detector_new(const struct SwDetectorConfig *config, struct SwDetector **out);

/*
 Release a detector handle. NULL is a no-op.

 # Safety
 `detector` must be a handle from this API, not yet freed.
 */
void sw_detector_free(struct SwDetector *detector);

/*
 Feed one sample. `*fired` reports whether a beat triggered, and when
 it did, `*beat` (if non-NULL) receives the event.

 Timestamps must strictly increase across calls.

 # Safety
 `detector` must be a live handle; `fired` must be writable; `beat`
 must be NULL or writable.
 */
enum SwStatus sw_detector_process(struct SwDetector *detector,
                                  uint64_t t_ms,
                                  double value,
                                  struct SwHeartbeat *beat,
                                  bool *fired);

/*
 Create an empty tracker.

 # Safety
 `out` must be writable.
 */
enum SwStatus sw_tracker_new(struct SwTracker **out);

/*
 Release a tracker handle. NULL is a no-op.

 # Safety
 `tracker` must be a handle from this API, not yet freed.
 */
void sw_tracker_free(struct SwTracker *tracker);

/*
 Feed one raw datagram that should contain a TUIO 2Dobj bundle.

 Up to `capacity` events are written to `events`; `*count` always
 receives the number produced. When more events were produced than
 fit, the overflow is dropped and `SW_STATUS_BUFFER_TOO_SMALL` is
 returned after the tracker state has still advanced; 16 slots cover
 any frame of at most 8 concurrent sessions. Stale or keep-alive
 frames succeed with `*count == 0`.

 # Safety
 `tracker` must be a live handle; `datagram` must point to `len`
 bytes; `events` must hold `capacity` writable slots; `count` must be
 writable.
 */
enum SwStatus sw_tracker_feed(struct SwTracker *tracker,
                              const uint8_t *datagram,
                              size_t len,
                              struct SwSurfaceEvent *events,
                              size_t capacity,
                              size_t *count);

/*
 Number of sessions currently on the surface; 0 for a NULL handle.

 # Safety
 `tracker` must be a live handle or NULL.
 */
size_t sw_tracker_session_count(const struct SwTracker *tracker);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STAGEWIRE_H */
