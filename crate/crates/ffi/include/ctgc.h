#ifndef CTGC_H
#define CTGC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum CtgcStatus {
  CTGC_STATUS_OK = 0,
  // A null pointer, invalid UTF-8 or an unknown option.
  CTGC_STATUS_INVALID_ARGUMENT = 1,
  // Parsing, checking or analysis failed.
  CTGC_STATUS_COMPILE_ERROR = 2,
  // The interpreter stopped with an error.
  CTGC_STATUS_RUNTIME_ERROR = 3,
  // A bug inside the library; the handle involved should be dropped.
  CTGC_STATUS_INTERNAL = 4,
} CtgcStatus;

// A compiled set of modules together with the configuration it was
// compiled under.
typedef struct CtgcProgram CtgcProgram;

// Outputs and statistics of one run.
typedef struct CtgcRun CtgcRun;

// Heap statistics of a run, in words and cell counts.
typedef struct CtgcHeapStats {
  uint64_t words_allocated;
  uint64_t cells_reused_inplace;
  uint64_t cache_hits;
  uint64_t cache_misses;
  uint64_t within_k_leaked_words;
  uint64_t reused_words;
  uint64_t cache_hit_words;
} CtgcHeapStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Compiles `count` modules. `names[i]` labels `sources[i]` in messages.
// `config` is a configuration label such as `match+lifo` or
// `within:1+lifo+cache`; null means the defaults. Import cycles are
// iterated until the interfaces are stable.
//
// # Safety
// `names` and `sources` must point to `count` valid C strings each, and
// `out` must be a valid pointer.
enum CtgcStatus ctgc_compile(const char *const *names,
                             const char *const *sources,
                             size_t count,
                             const char *config,
                             struct CtgcProgram **out);

// Releases a program. Null is ignored.
//
// # Safety
// `program` must come from [`ctgc_compile`] and not be used afterwards.
void ctgc_program_free(struct CtgcProgram *program);

// Writes a textual dump (`alias`, `dead` or `reuse`) of every compiled
// module to `*out`. Release it with [`ctgc_string_free`].
//
// # Safety
// `program` must be a live handle, `kind` a C string and `out` valid.
enum CtgcStatus ctgc_program_dump(const struct CtgcProgram *program, const char *kind, char **out);

// Number of compilation rounds the program took.
//
// # Safety
// `program` must be a live handle or null (which yields 0).
size_t ctgc_program_rounds(const struct CtgcProgram *program);

// Runs `entry` on `nargs` term literals under the program's
// configuration; `plain` forces the version without reuse.
//
// # Safety
// `program` must be a live handle, `entry` a C string, `args` point to
// `nargs` C strings and `out` be valid.
enum CtgcStatus ctgc_run(const struct CtgcProgram *program,
                         const char *entry,
                         const char *const *args,
                         size_t nargs,
                         bool plain,
                         struct CtgcRun **out);

// Releases a run. Null is ignored.
//
// # Safety
// `run` must come from [`ctgc_run`] and not be used afterwards.
void ctgc_run_free(struct CtgcRun *run);

// True when a semidet entry failed, so there are no outputs.
//
// # Safety
// `run` must be a live handle or null.
bool ctgc_run_failed(const struct CtgcRun *run);

// Number of printed outputs.
//
// # Safety
// `run` must be a live handle or null.
size_t ctgc_run_output_count(const struct CtgcRun *run);

// The `index`-th output, owned by the run; null when out of range.
//
// # Safety
// `run` must be a live handle or null.
const char *ctgc_run_output(const struct CtgcRun *run, size_t index);

// Copies the run's heap statistics to `*out`.
//
// # Safety
// `run` must be a live handle and `out` valid.
enum CtgcStatus ctgc_run_stats(const struct CtgcRun *run, struct CtgcHeapStats *out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void ctgc_string_free(char *s);

// Message of the last failed call on this thread, or null. Valid until
// the next call into the library on the same thread.
const char *ctgc_last_error_message(void);

// Library version as a static C string.
const char *ctgc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTGC_H */
