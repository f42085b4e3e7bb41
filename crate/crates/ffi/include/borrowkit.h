#ifndef BORROWKIT_H
#define BORROWKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  BK_STATUS_OK = 0,
  BK_STATUS_NULL_ARGUMENT = 1,
  BK_STATUS_INVALID_UTF8 = 2,
  /**
   * The content of an input could not be parsed or is inconsistent.
   */
  BK_STATUS_FORMAT_ERROR = 3,
  BK_STATUS_INVALID_ARGUMENT = 4,
  BK_STATUS_INTERNAL = 5,
} BkStatus;

typedef struct BkGazetteer BkGazetteer;

typedef struct BkLexicons BkLexicons;

typedef struct BkModel BkModel;

/**
 * Detected spans of one sentence.
 */
typedef struct BkSpanList BkSpanList;

/**
 * Corpus score. Ratios are in [0, 1].
 */
typedef struct {
  size_t tp_count;
  size_t fp_count;
  size_t fn_count;
  double precision;
  double recall;
  double f1;
  /**
   * Sentence pairs whose texts differ.
   */
  size_t mismatches;
} BkScore;

/**
 * Character offsets of a span in its sentence, end exclusive.
 */
typedef struct {
  size_t start;
  size_t end;
} BkRange;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into the library on this thread.
 */
const char *bk_last_error_message(void);

void bk_string_free(char *s);

/**
 * Normalizes a span for comparison.
 */
BkStatus bk_normalize_span(const char *raw, char **out);

/**
 * Scores two semicolon-separated corpora given as file contents.
 */
BkStatus bk_score_csv(const char *gold_csv, const char *pred_csv, BkScore *out);

/**
 * Classifies prediction errors; `report_out` receives the error report
 * (header line plus one row per error).
 */
BkStatus bk_errors_csv(const char *gold_csv, const char *pred_csv, char **report_out);

/**
 * Builds a gazetteer from entry lines and optional exclusion lines.
 * `exclusions` may be NULL.
 */
BkStatus bk_gazetteer_load(const char *entries, const char *exclusions, BkGazetteer **out);

void bk_gazetteer_free(BkGazetteer *gaz);

/**
 * Number of entries, or 0 for NULL.
 */
size_t bk_gazetteer_len(const BkGazetteer *gaz);

/**
 * Runs the gazetteer detector with default settings.
 */
BkStatus bk_detect(const BkGazetteer *gaz, const char *sentence, BkSpanList **out);

/**
 * Parses a model file's contents.
 */
BkStatus bk_model_load(const char *model_text, BkModel **out);

void bk_model_free(BkModel *model);

/**
 * Builds lexicons from newline-separated word lists.
 */
BkStatus bk_lexicons_load(const char *spanish, const char *english, BkLexicons **out);

void bk_lexicons_free(BkLexicons *lex);

/**
 * Runs the token classifier and merges positive tokens into spans. A
 * non-zero `bridging` lets single function words join two spans.
 */
BkStatus bk_predict(const BkModel *model,
                    const BkLexicons *lex,
                    const char *sentence,
                    int bridging,
                    BkSpanList **out);

/**
 * Number of spans, or 0 for NULL.
 */
size_t bk_span_list_len(const BkSpanList *list);

/**
 * Surface text of span `i`, or NULL when out of range. Owned by the list.
 */
const char *bk_span_list_surface(const BkSpanList *list, size_t i);

BkStatus bk_span_list_range(const BkSpanList *list, size_t i, BkRange *out);

void bk_span_list_free(BkSpanList *list);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BORROWKIT_H */
