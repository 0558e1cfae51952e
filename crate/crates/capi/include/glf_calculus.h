/* C interface to the bracket-linear function calculus. */

#ifndef GLF_CALCULUS_H
#define GLF_CALCULUS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum GlfStatus {
  GlfStatus_Ok = 0,
  GlfStatus_NullPointer = 1,
  GlfStatus_InvalidUtf8 = 2,
  GlfStatus_ParseError = 3,
  GlfStatus_EvalError = 4,
  GlfStatus_Unsupported = 5,
} GlfStatus;

/**
 * Opaque expression bound to a program's symbol session.
 */
typedef struct GlfExprHandle GlfExprHandle;

/**
 * Opaque parsed program (declarations, bindings, systems, experiments).
 */
typedef struct GlfProgram GlfProgram;

/**
 * Most recent error message on this thread, or null. Free with
 * [`glf_string_free`].
 */
char *glf_last_error(void);

/**
 * Frees a string previously returned by this library.
 *
 * # Safety
 * `ptr` must be null or a pointer obtained from this library's functions,
 * released at most once.
 */
void glf_string_free(char *ptr);

/**
 * Parses a program. On success writes a fresh handle to `out`.
 *
 * # Safety
 * `text` must point to a NUL-terminated string; `out` must be valid for a
 * single pointer write.
 */
enum GlfStatus glf_program_parse(const char *text, struct GlfProgram **out);

/**
 * # Safety
 * `program` must be null or a handle from [`glf_program_parse`], released
 * at most once.
 */
void glf_program_free(struct GlfProgram *program);

/**
 * Canonical printed form of the program. Free with [`glf_string_free`].
 *
 * # Safety
 * `program` must be a live handle from [`glf_program_parse`].
 */
char *glf_program_print(const struct GlfProgram *program);

/**
 * Runs the program's experiments; writes a human summary to `out_summary`
 * and the worst check exit code (0 ok / 2 refuted / 3 inconclusive) to
 * `out_code`.
 *
 * # Safety
 * `program` must be a live handle; output pointers must be valid for single
 * writes.
 */
enum GlfStatus glf_program_run(const struct GlfProgram *program,
                               char **out_summary,
                               int32_t *out_code);

/**
 * Parses an expression against the program's declared names.
 *
 * # Safety
 * `program` must be a live handle; `text` a NUL-terminated string; `out`
 * valid for a single pointer write.
 */
enum GlfStatus glf_expr_parse(const struct GlfProgram *program,
                              const char *text,
                              struct GlfExprHandle **out);

/**
 * # Safety
 * `expr` must be null or a handle from [`glf_expr_parse`], released at most
 * once.
 */
void glf_expr_free(struct GlfExprHandle *expr);

/**
 * Weight (floor/frac nesting depth) of the expression.
 *
 * # Safety
 * `expr` must be a live handle; `out` valid for a single write.
 */
enum GlfStatus glf_expr_weight(const struct GlfExprHandle *expr, uint32_t *out);

/**
 * Coefficient of the linear trend of the expression, as a float.
 *
 * # Safety
 * `expr` must be a live handle; `out` valid for a single write.
 */
enum GlfStatus glf_expr_linear_part(const struct GlfExprHandle *expr, double *out);

/**
 * Whether the expression is bounded (zero linear trend).
 *
 * # Safety
 * `expr` must be a live handle; `out` valid for a single write.
 */
enum GlfStatus glf_expr_is_bounded(const struct GlfExprHandle *expr, bool *out);

/**
 * Evaluates the expression at an integer argument (float path with exact
 * fallback near discontinuities).
 *
 * # Safety
 * `expr` must be a live handle; `out` valid for a single write.
 */
enum GlfStatus glf_expr_eval(const struct GlfExprHandle *expr, int64_t n, double *out);

/**
 * Exact evaluation rendered as a symbolic string. Free with
 * [`glf_string_free`].
 *
 * # Safety
 * `expr` must be a live handle; `out` valid for a single pointer write.
 */
enum GlfStatus glf_expr_eval_exact(const struct GlfExprHandle *expr, int64_t n, char **out);

/**
 * Cesàro limit of `exp(2 pi i beta phi(n))` as a JSON record
 * `{re, im, exact, certificate}`. `beta_text` is parsed against the
 * program's names and must be constant. Free the string with
 * [`glf_string_free`].
 *
 * # Safety
 * `program` and `expr` must be live handles; `beta_text` a NUL-terminated
 * string; `out` valid for a single pointer write.
 */
enum GlfStatus glf_char_limit(const struct GlfProgram *program,
                              const struct GlfExprHandle *expr,
                              const char *beta_text,
                              char **out);

#endif  /* GLF_CALCULUS_H */
