#include <math.h>
#include <stdio.h>
#include <string.h>

#include "fpp.h"

#define CHECK(cond)                                                     \
    do {                                                                \
        if (!(cond)) {                                                  \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__,     \
                    #cond, fpp_last_error_message());                   \
            return 1;                                                   \
        }                                                               \
    } while (0)

int main(void) {
    FppDistribution *d = NULL;
    CHECK(fpp_distribution_parse("gaussian(2,1)", &d) == FPP_STATUS_OK);
    FppConstants c;
    CHECK(fpp_constants_derive(d, 2.0, &c) == FPP_STATUS_OK);
    CHECK(fabs(c.alpha - (2.0 - sqrt(4.0 - 2.0 * log(2.0)))) < 1e-9);

    FppGraph *g = NULL;
    CHECK(fpp_graph_generate(3000, 2.0, d, 7, &g) == FPP_STATUS_OK);
    FppPointSet *pts = NULL;
    CHECK(fpp_enumerate_extremal(g, &c, -INFINITY, 2.0, -INFINITY, INFINITY, 60, &pts) == FPP_STATUS_OK);
    size_t len = 0;
    CHECK(fpp_points_len(pts, &len) == FPP_STATUS_OK);
    for (size_t i = 0; i < len; i++) {
        FppPoint p;
        CHECK(fpp_points_get(pts, i, &p) == FPP_STATUS_OK);
        CHECK(p.x <= 2.0);
    }
    FppPoint p;
    CHECK(fpp_points_get(pts, len, &p) == FPP_STATUS_OUT_OF_RANGE);
    CHECK(strlen(fpp_last_error_message()) > 0);
    CHECK(fpp_points_len(NULL, &len) == FPP_STATUS_NULL_POINTER);

    FppExperiment *e = NULL;
    CHECK(fpp_experiment_new("n = 400\nlambda = 2\ndist = gaussian(2,1)\nx_hi = 0.5\n"
                             "trials = 3\nmaster_seed = 1\n", &e) == FPP_STATUS_OK);
    CHECK(fpp_experiment_run(e) == FPP_STATUS_OK);
    FppTrialRecord r;
    CHECK(fpp_experiment_record(e, 2, &r) == FPP_STATUS_OK);
    CHECK(r.trial_index == 2);

    fpp_experiment_free(e);
    fpp_points_free(pts);
    fpp_graph_free(g);
    fpp_distribution_free(d);
    printf("ok %zu points\n", len);
    return 0;
}
