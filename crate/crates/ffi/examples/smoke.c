/* Builds the bundled logistic problem, computes its extremal steady states
 * and checks one Rothe step from the maximal one. */
#include <stdio.h>
#include <stdlib.h>
#include <math.h>

#include "dnp_steady.h"

static const char *CONFIG =
    "mode = \"steady\"\n"
    "[mesh]\nkind = \"interval\"\nn = 16\nlength = 1.0\n"
    "[operator]\nkind = \"multiphase\"\nweights = [\"1\"]\nexponents = [\"2.5\"]\n"
    "[source]\nkind = \"logistic\"\n";

#define CHECK(call)                                                        \
    do {                                                                   \
        DnpStatus s_ = (call);                                             \
        if (s_ != DNP_STATUS_OK) {                                         \
            fprintf(stderr, "%s: %d %s\n", #call, s_, dnp_last_error_message()); \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    DnpProblem *p = NULL;
    CHECK(dnp_problem_from_toml(CONFIG, &p));
    size_t n = 0;
    CHECK(dnp_problem_node_count(p, &n));
    double *lo = malloc(n * sizeof(double));
    double *hi = malloc(n * sizeof(double));
    double *next = malloc(n * sizeof(double));
    CHECK(dnp_extremal_solutions(p, lo, hi, n));
    CHECK(dnp_rothe_step(p, 0.1, hi, next, n));
    DnpResidual r;
    CHECK(dnp_verify(p, hi, n, &r));
    double drift = 0.0;
    for (size_t i = 0; i < n; ++i) {
        drift = fmax(drift, fabs(next[i] - hi[i]));
    }
    if (dnp_apply_k(p, 1.0, hi, next, n + 1) != DNP_STATUS_SHAPE) {
        fprintf(stderr, "length mismatch not reported\n");
        return 1;
    }
    printf("nodes %zu lower %.6f upper %.6f drift %.3e residual %.3e\n", n, lo[0], hi[0], drift, r.weak_residual);
    free(lo);
    free(hi);
    free(next);
    dnp_problem_free(p);
    return drift < 1e-8 && r.weak_residual < 1e-8 ? 0 : 1;
}
