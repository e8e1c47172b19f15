#ifndef CSA_H
#define CSA_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every function.
typedef enum CsaStatus {
  CSA_STATUS_OK = 0,
  CSA_STATUS_NULL_ARGUMENT = 1,
  CSA_STATUS_INVALID_UTF8 = 2,
  CSA_STATUS_PARSE_FAILED = 3,
  CSA_STATUS_LINT_FAILED = 4,
  CSA_STATUS_INVALID_BARCODE = 5,
  CSA_STATUS_UNKNOWN_SET = 6,
  CSA_STATUS_INVALID_ACTION = 7,
  CSA_STATUS_PRECONDITION_VIOLATED = 8,
  CSA_STATUS_INVALID_ARGUMENT = 9,
  CSA_STATUS_PANIC = 10,
} CsaStatus;

// A running session: one engine and one simulated appliance.
typedef struct CsaSession CsaSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL.
// The pointer stays valid until the next call into this library on the same thread.
const char *csa_last_error(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void csa_string_free(char *s);

// Checks a 13-digit barcode.
//
// # Safety
// `digits` must be NULL or a valid NUL-terminated string.
enum CsaStatus csa_barcode_validate(const char *digits);

// Computes the check digit of a 12-digit payload into `out`.
//
// # Safety
// `payload` must be NULL or a valid NUL-terminated string; `out` must be NULL or writable.
enum CsaStatus csa_barcode_check_digit(const char *payload, uint8_t *out);

// Lints a resource document and writes the report as JSON to `out_report`.
//
// Returns `Ok` for a report without errors and `LintFailed` when it has
// errors; the report is written in both cases. A document that does not
// parse yields `ParseFailed` and no report.
//
// # Safety
// `doc` must point to `len` readable bytes; `out_report` must be writable.
enum CsaStatus csa_lint(const uint8_t *doc, size_t len, char **out_report);

// Parses a document and writes its canonical serialization to `out`.
//
// # Safety
// `doc` must point to `len` readable bytes; `out` must be writable.
enum CsaStatus csa_canonicalize(const uint8_t *doc, size_t len, char **out);

// Starts a session on a lint-clean document. `set_id` picks the instruction
// set by id; when NULL, `ability_level` selects it.
//
// # Safety
// `doc` must point to `len` readable bytes, `set_id` must be NULL or a valid
// NUL-terminated string, and `out` must be writable.
enum CsaStatus csa_session_new(const uint8_t *doc,
                               size_t len,
                               const char *set_id,
                               uint32_t ability_level,
                               struct CsaSession **out);

// Releases a session. NULL is ignored.
//
// # Safety
// `session` must come from [`csa_session_new`] and not have been freed already.
void csa_session_free(struct CsaSession *session);

// Applies an action given as JSON, e.g. `{"action":"OpenDoor"}`.
// A refused action returns `PreconditionViolated` and changes nothing.
//
// # Safety
// `session` must be a live handle and `action_json` a valid NUL-terminated string.
enum CsaStatus csa_session_action(struct CsaSession *session, const char *action_json);

// Advances virtual time by `dt_millis`, which must be positive.
//
// # Safety
// `session` must be a live handle.
enum CsaStatus csa_session_advance(struct CsaSession *session, uint64_t dt_millis);

// Writes the current snapshot as JSON to `out`.
//
// # Safety
// `session` must be a live handle; `out` must be writable.
enum CsaStatus csa_session_snapshot(const struct CsaSession *session, char **out);

// 1 when the session reached Complete or Aborted, 0 otherwise, -1 for NULL.
//
// # Safety
// `session` must be NULL or a live handle.
int32_t csa_session_is_terminal(const struct CsaSession *session);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSA_H */
