#ifndef OCSP_H
#define OCSP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes.
 */
typedef enum OcspStatus {
  OCSP_STATUS_OK = 0,
  OCSP_STATUS_NULL_ARGUMENT = 1,
  OCSP_STATUS_INVALID_UTF8 = 2,
  OCSP_STATUS_PARSE = 3,
  OCSP_STATUS_INVALID_PARAMETER = 4,
  OCSP_STATUS_CAP_EXCEEDED = 5,
  OCSP_STATUS_BUDGET_EXCEEDED = 6,
  OCSP_STATUS_INTERNAL = 7,
} OcspStatus;

/*
 Decision outcomes reported by [`ocsp_decide_json`].
 */
typedef enum OcspOutcome {
  OCSP_OUTCOME_YES_CERTIFIED = 0,
  OCSP_OUTCOME_YES_KERNEL = 1,
  OCSP_OUTCOME_NO_KERNEL = 2,
  OCSP_OUTCOME_UNDECIDED = 3,
} OcspOutcome;

/*
 The decomposition of an instance objective.
 */
typedef struct OcspDecomposition OcspDecomposition;

/*
 A parsed instance.
 */
typedef struct OcspInstance OcspInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or an empty string.
 The pointer stays valid until the next call into this library on the
 same thread.
 */
const char *ocsp_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *ocsp_version(void);

/*
 Parses `len` bytes of instance text into a new handle.

 # Safety
 `text` must point to `len` readable bytes; `out` must be writable.
 */
enum OcspStatus ocsp_instance_parse(const char *text, size_t len, struct OcspInstance **out);

/*
 # Safety
 `inst` must be null or a handle from [`ocsp_instance_parse`] not yet freed.
 */
void ocsp_instance_free(struct OcspInstance *inst);

/*
 # Safety
 `inst` must be a live handle.
 */
size_t ocsp_instance_num_vars(const struct OcspInstance *inst);

/*
 # Safety
 `inst` must be a live handle.
 */
size_t ocsp_instance_num_constraints(const struct OcspInstance *inst);

/*
 Writes `AVG` as a rational string such as `"3/2"`.

 # Safety
 `inst` must be a live handle; `out` must be writable.
 */
enum OcspStatus ocsp_instance_average(const struct OcspInstance *inst, char **out);

/*
 Computes the decomposition of the instance objective.

 # Safety
 `inst` must be a live handle; `out` must be writable.
 */
enum OcspStatus ocsp_decompose(const struct OcspInstance *inst, struct OcspDecomposition **out);

/*
 # Safety
 `dec` must be null or a handle from [`ocsp_decompose`] not yet freed.
 */
void ocsp_decomposition_free(struct OcspDecomposition *dec);

/*
 Number of nonzero parts on nonempty variable sets.

 # Safety
 `dec` must be a live handle.
 */
size_t ocsp_decomposition_num_parts(const struct OcspDecomposition *dec);

/*
 Size of the dependency set.

 # Safety
 `dec` must be a live handle.
 */
size_t ocsp_decomposition_kernel_size(const struct OcspDecomposition *dec);

/*
 Writes the variance as a rational string.

 # Safety
 `dec` must be a live handle; `out` must be writable.
 */
enum OcspStatus ocsp_decomposition_variance(const struct OcspDecomposition *dec, char **out);

/*
 Writes the analysis report as JSON.

 # Safety
 `inst` and `dec` must be live handles, `dec` computed from `inst`;
 `out` must be writable.
 */
enum OcspStatus ocsp_analyze_json(const struct OcspInstance *inst,
                                  const struct OcspDecomposition *dec,
                                  bool m4,
                                  bool pieces,
                                  char **out);

/*
 Decides `OPT >= AVG + t` and writes the decision report as JSON.
 `t` is a NUL-terminated rational such as `"1/2"`. `outcome` may be null.

 # Safety
 `inst` must be a live handle, `t` a valid C string, `out` writable and
 `outcome` null or writable.
 */
enum OcspStatus ocsp_decide_json(const struct OcspInstance *inst,
                                 const char *t,
                                 size_t cap,
                                 uint64_t budget,
                                 uint64_t seed,
                                 bool witness,
                                 char **out,
                                 enum OcspOutcome *outcome);

/*
 Releases a string returned by this library.

 # Safety
 `s` must be null or a string from this library not yet freed.
 */
void ocsp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OCSP_H */
