#ifndef JAMLINK_H
#define JAMLINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call. Values 0 to 6 equal the CLI exit codes.
 */
typedef enum JlStatus {
  JL_STATUS_OK = 0,
  JL_STATUS_FAILURE = 1,
  JL_STATUS_INVALID = 2,
  JL_STATUS_INFEASIBLE = 3,
  JL_STATUS_IO = 4,
  JL_STATUS_MISSING_MODEL = 5,
  JL_STATUS_DOMAIN = 6,
  JL_STATUS_NULL_POINTER = 7,
  JL_STATUS_PANIC = 8,
} JlStatus;

typedef enum JlKernel {
  JL_KERNEL_ASIN = 0,
  JL_KERNEL_SINH = 1,
  JL_KERNEL_LINEAR = 2,
} JlKernel;

typedef enum JlVariant {
  JL_VARIANT_GRANULAR = 0,
  JL_VARIANT_LAYER = 1,
  JL_VARIANT_LAYER_WITH_SPINE = 2,
} JlVariant;

/*
 Opaque design handle.
 */
typedef struct JlDesign JlDesign;

/*
 Sheath length limits, mm.
 */
typedef struct JlLengths {
  double l_max;
  double l_min;
  double l_default;
} JlLengths;

/*
 Spine lengths, mm.
 */
typedef struct JlSpineEnvelope {
  double neutral_length;
  double compressed_length;
  double extended_length;
  double rigid_length;
  double flexible_travel;
} JlSpineEnvelope;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Parses a design JSON document into a new handle.

 # Safety
 `json` must be a valid nul-terminated string and `out` a valid pointer.
 */
enum JlStatus jl_design_from_json(const char *json, struct JlDesign **out);

/*
 Releases a handle. Null is ignored.

 # Safety
 `design` must come from `jl_design_from_json` and not be used afterwards.
 */
void jl_design_free(struct JlDesign *design);

/*
 # Safety
 Pointers must be valid or null.
 */
enum JlStatus jl_design_lengths(const struct JlDesign *design, struct JlLengths *out);

/*
 Maximum bend angle in degrees.

 # Safety
 Pointers must be valid or null.
 */
enum JlStatus jl_design_max_bend_angle(const struct JlDesign *design,
                                       enum JlKernel kernel,
                                       double *out);

/*
 Holding force at the design's jamming state, N.

 # Safety
 Pointers must be valid or null.
 */
enum JlStatus jl_design_holding_force(const struct JlDesign *design, double *out);

/*
 Central pass-through gap, mm. May be negative.

 # Safety
 Pointers must be valid or null.
 */
enum JlStatus jl_design_central_gap(const struct JlDesign *design, double *out);

/*
 Longest ligament beam leaving `min_gap` mm at the centre.

 # Safety
 Pointers must be valid or null.
 */
enum JlStatus jl_design_max_beam_length(const struct JlDesign *design, double min_gap, double *out);

/*
 # Safety
 Pointers must be valid or null.
 */
enum JlStatus jl_design_spine_envelope(const struct JlDesign *design, struct JlSpineEnvelope *out);

/*
 Writes 1 to `pass` when the spine never limits the sheath, else 0.

 # Safety
 Pointers must be valid or null.
 */
enum JlStatus jl_design_compatibility(const struct JlDesign *design, int32_t *pass);

/*
 Peak force of the 10 mm push test, N. Uses the design's stiffness model,
 or the built-in defaults when `use_default_model` is non-zero and the
 design has none.

 # Safety
 Pointers must be valid or null.
 */
enum JlStatus jl_design_predict_max_force(const struct JlDesign *design,
                                          enum JlVariant variant,
                                          double bend_angle,
                                          int32_t use_default_model,
                                          double *out);

/*
 Cut pattern as an SVG document, with default layout options.

 # Safety
 Pointers must be valid or null. Free the result with `jl_string_free`.
 */
enum JlStatus jl_design_pattern_svg(const struct JlDesign *design, double scale, char **out);

/*
 Full design report as JSON (asin kernel, 7.5 mm beam-limit gap).

 # Safety
 Pointers must be valid or null. Free the result with `jl_string_free`.
 */
enum JlStatus jl_design_report_json(const struct JlDesign *design, char **out);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not be used afterwards.
 */
void jl_string_free(char *s);

/*
 Message of the last failure on this thread, or null. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *jl_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JAMLINK_H */
