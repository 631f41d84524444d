#ifndef PATINA_H
#define PATINA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every `patina_*` call.
typedef enum PatinaStatus {
  PATINA_STATUS_OK = 0,
  PATINA_STATUS_NULL_ARGUMENT = 1,
  PATINA_STATUS_INVALID_UTF8 = 2,
  // Unknown encoding, category or sort name.
  PATINA_STATUS_INVALID_ARGUMENT = 3,
  PATINA_STATUS_NOT_FOUND = 4,
  // Domain rule violated: bad anchor, no anchors, reply to a reply.
  PATINA_STATUS_VALIDATION = 5,
  PATINA_STATUS_INVALID_IMAGE = 6,
  PATINA_STATUS_CONFLICT = 7,
  // Input JSON could not be parsed.
  PATINA_STATUS_MALFORMED = 8,
  PATINA_STATUS_IO = 9,
  PATINA_STATUS_INTERNAL = 10,
} PatinaStatus;

// Opaque store handle.
typedef struct PatinaStore PatinaStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the
// next `patina_*` call on the same thread; do not free.
const char *patina_last_error_message(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from a `patina_*` out-pointer and not be freed twice.
void patina_string_free(char *s);

// Library version, static storage.
const char *patina_version(void);

// Opens (creating if needed) the store rooted at `path`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum PatinaStatus patina_store_open(const char *path, struct PatinaStore **out);

// Closes a store. NULL is ignored.
//
// # Safety
// `store` must come from [`patina_store_open`] and not be used afterwards.
void patina_store_free(struct PatinaStore *store);

// Creates a board from image bytes; writes the board JSON to `out_json`.
//
// # Safety
// Pointers must be valid; `image` must hold `image_len` bytes.
enum PatinaStatus patina_board_create(const struct PatinaStore *store,
                                      const char *title,
                                      const uint8_t *image,
                                      size_t image_len,
                                      char **out_json);

// Full board document as JSON.
//
// # Safety
// Pointers must be valid.
enum PatinaStatus patina_board_get(const struct PatinaStore *store,
                                   const char *board_id,
                                   char **out_json);

// Adds a comment from a JSON draft (`{"text", "author", "category", "anchors": [...]}`).
//
// # Safety
// Pointers must be valid.
enum PatinaStatus patina_comment_create(const struct PatinaStore *store,
                                        const char *board_id,
                                        const char *draft_json,
                                        char **out_json);

// Replies to a top-level comment; writes the updated parent comment.
//
// # Safety
// Pointers must be valid.
enum PatinaStatus patina_reply_create(const struct PatinaStore *store,
                                      const char *comment_id,
                                      const char *draft_json,
                                      char **out_json);

// Adds one like; writes the updated comment.
//
// # Safety
// Pointers must be valid.
enum PatinaStatus patina_comment_like(const struct PatinaStore *store,
                                      const char *comment_id,
                                      char **out_json);

// Ordered comments as a JSON array. `sort` and `category` may be NULL.
//
// # Safety
// Pointers must be valid.
enum PatinaStatus patina_comments_list(const struct PatinaStore *store,
                                       const char *board_id,
                                       const char *sort,
                                       const char *category,
                                       char **out_json);

// RenderSpec JSON for `encoding` (NULL means activity). `category` may be NULL.
//
// # Safety
// Pointers must be valid.
enum PatinaStatus patina_render_spec(const struct PatinaStore *store,
                                     const char *board_id,
                                     const char *encoding,
                                     const char *category,
                                     char **out_json);

// SVG document. With `inline_image` the image is embedded, otherwise it is
// referenced by its HTTP API path.
//
// # Safety
// Pointers must be valid.
enum PatinaStatus patina_render_svg(const struct PatinaStore *store,
                                    const char *board_id,
                                    const char *encoding,
                                    const char *category,
                                    bool inline_image,
                                    char **out_svg);

// Board statistics JSON on the default 64x64 grid.
//
// # Safety
// Pointers must be valid.
enum PatinaStatus patina_board_stats(const struct PatinaStore *store,
                                     const char *board_id,
                                     char **out_json);

// Imports a thread (JSON array of records); writes the import report.
// A negative `top_level_limit` means no limit.
//
// # Safety
// Pointers must be valid.
enum PatinaStatus patina_import_thread(const struct PatinaStore *store,
                                       const char *board_id,
                                       const char *thread_json,
                                       int64_t top_level_limit,
                                       char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PATINA_H */
