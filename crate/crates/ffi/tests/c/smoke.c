#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "kaemsim.h"

static const char *SOURCE =
    "species a @ 1, b @ 0\n"
    "a -> b {1}\n"
    "report a\n"
    "report b\n"
    "equilibrate 5\n";

int main(void) {
    KsOptions opts = ks_options_default();
    opts.points = 11;
    KsRun *run = NULL;
    if (ks_run_source(SOURCE, &opts, &run) != KS_STATUS_OK) {
        fprintf(stderr, "run failed: %s\n", ks_last_error_message());
        return 1;
    }
    size_t n = ks_run_point_count(run, 0);
    double *a = malloc(n * sizeof(double));
    if (ks_run_copy_means(run, 0, 0, a, n) != KS_STATUS_OK) return 2;
    printf("species=%zu reactions=%zu points=%zu name0=%s a_end=%.6f\n",
           ks_run_species_count(run), ks_run_reaction_count(run), n,
           ks_run_species_name(run, 0), a[n - 1]);
    free(a);
    ks_run_free(run);

    if (ks_run_source("species a @ \n", NULL, &run) != KS_STATUS_SYNTAX_ERROR) return 3;
    printf("error at %u:%u\n", ks_last_error_line(), ks_last_error_column());
    return 0;
}
