/* Compiles the convert module, runs convert1 and prints the result. */
#include <stdio.h>
#include "ctgc.h"

static const char *SOURCE =
    ":- module convert.\n"
    ":- type dir ---> north ; south ; east ; west.\n"
    ":- type example ---> a(int, dir) ; b(example).\n"
    ":- pred convert1(example, example).\n"
    ":- mode convert1(in, out) is semidet.\n"
    "convert1(X, Y) :- X => b(X1), X1 => a(A1, _), Y1 <= a(A1, north), Y <= b(Y1).\n";

int main(void) {
    const char *names[] = {"convert.m0"};
    const char *sources[] = {SOURCE};
    CtgcProgram *prog = NULL;
    if (ctgc_compile(names, sources, 1, "match+lifo", &prog) != CTGC_STATUS_OK) {
        fprintf(stderr, "compile: %s\n", ctgc_last_error_message());
        return 1;
    }
    const char *args[] = {"b(a(3, east))"};
    CtgcRun *run = NULL;
    if (ctgc_run(prog, "convert1", args, 1, false, &run) != CTGC_STATUS_OK) {
        fprintf(stderr, "run: %s\n", ctgc_last_error_message());
        ctgc_program_free(prog);
        return 2;
    }
    CtgcHeapStats stats;
    ctgc_run_stats(run, &stats);
    for (size_t i = 0; i < ctgc_run_output_count(run); i++)
        printf("%s\n", ctgc_run_output(run, i));
    printf("words_allocated=%llu reused=%llu\n", (unsigned long long)stats.words_allocated,
           (unsigned long long)stats.cells_reused_inplace);
    ctgc_run_free(run);
    ctgc_program_free(prog);
    return 0;
}
