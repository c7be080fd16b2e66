#include <stdio.h>
#include <string.h>

#include "schelling.h"

#define CHECK(expr)                                                           \
    do {                                                                      \
        if (!(expr)) {                                                        \
            const char *e = schelling_last_error();                           \
            fprintf(stderr, "failed: %s (%s)\n", #expr, e ? e : "no error");  \
            return 1;                                                         \
        }                                                                     \
    } while (0)

int main(void) {
    SchellingSimulation *sim = NULL;
    CHECK(schelling_simulation_new(4, 8, 1.0, 2.0, SCHELLING_SCHEDULER_CONTAGION, 0.0, 9, &sim) ==
          SCHELLING_STATUS_OK);
    CHECK(schelling_simulation_step(sim, 1000) == SCHELLING_STATUS_OK);
    int8_t colors[16];
    CHECK(schelling_simulation_colors(sim, colors, 16) == SCHELLING_STATUS_OK);
    int reds = 0;
    for (int i = 0; i < 16; i++) reds += colors[i] == 1;
    CHECK(reds == 8);
    double potential = 0;
    uint64_t steps = 0;
    size_t bichromatic = 0;
    CHECK(schelling_simulation_observe(sim, &potential, &steps, &bichromatic) == SCHELLING_STATUS_OK);
    CHECK(steps == 1000);
    CHECK(potential == 4.0 * (16.0 - (double)bichromatic));
    schelling_simulation_free(sim);

    size_t min = 0, count = 0;
    CHECK(schelling_max_segregated(4, 8, &min, &count) == SCHELLING_STATUS_OK);
    CHECK(min == 8 && count == 8);

    CHECK(schelling_simulation_new(2, 1, 1.0, 1.0, 0, 0.0, 0, &sim) == SCHELLING_STATUS_INVALID_ARGUMENT);
    CHECK(strstr(schelling_last_error(), "at least 3") != NULL);

    SchellingAnalysis *a = NULL;
    CHECK(schelling_analysis_new(3, 4, 1.0, SCHELLING_SCHEDULER_UNIFORM, 0.0, &a) == SCHELLING_STATUS_OK);
    size_t configs = 0;
    bool subset = false;
    CHECK(schelling_analysis_stable(a, NULL, &configs, NULL, &subset) == SCHELLING_STATUS_OK);
    CHECK(configs == 45 && subset);
    schelling_analysis_free(a);

    printf("ok %s\n", schelling_version());
    return 0;
}
