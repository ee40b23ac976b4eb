#include <assert.h>
#include <math.h>
#include <stdio.h>
#include "wicklab.h"

int main(void) {
    double times[] = {0.0, 1.0};
    WicklabGrid* grid = NULL;
    assert(wicklab_grid_new(times, 2, &grid) == WicklabStatus_Ok);

    WicklabInterval piece = {0.0, 1.0, 1.0};
    WicklabStep* g = NULL;
    assert(wicklab_step_new(&piece, 1, &g) == WicklabStatus_Ok);

    WicklabGep* we = NULL;
    assert(wicklab_wick_exp(g, grid, &we) == WicklabStatus_Ok);
    double m2 = 0.0;
    assert(wicklab_gep_moment(we, 2, &m2) == WicklabStatus_Ok);
    printf("E[(exp-wick)^2] = %.12f (expect e = %.12f)\n", m2, exp(1.0));
    assert(fabs(m2 - exp(1.0)) < 1e-12);

    WicklabProcess* u = NULL;
    assert(wicklab_process_new(grid, &u) == WicklabStatus_Ok);
    assert(wicklab_process_push(u, we, g) == WicklabStatus_Ok);
    WicklabGep* delta = NULL;
    assert(wicklab_skorokhod(u, &delta) == WicklabStatus_Ok);
    double mean = 1.0;
    assert(wicklab_gep_expect(delta, &mean) == WicklabStatus_Ok);
    printf("E[delta(u)] = %.3e\n", mean);
    assert(fabs(mean) < 1e-14);

    wicklab_gep_free(delta);
    wicklab_process_free(u);
    wicklab_gep_free(we);
    wicklab_step_free(g);
    wicklab_grid_free(grid);
    printf("C ABI demo: OK\n");
    return 0;
}
