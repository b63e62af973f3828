#include <stdio.h>
#include <string.h>
#include "coopdrive.h"

#define CHECK(call)                                                   \
    do {                                                              \
        CoopStatus st_ = (call);                                      \
        if (st_ != COOP_STATUS_OK) {                                  \
            fprintf(stderr, "%s -> %d: %s\n", #call, st_, coop_last_error()); \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(int argc, char **argv) {
    if (argc < 2) return 2;
    CoopScenario *sc = NULL;
    CoopReport *rep = NULL;
    CHECK(coop_scenario_load(argv[1], &sc));
    CHECK(coop_scenario_set_mode(sc, COOP_MODE_IAAD));
    CHECK(coop_scenario_set_param(sc, "channels.cv2x.jitter_max_ms", 30));
    CHECK(coop_run(sc, &rep));
    double miss = -1;
    CHECK(coop_report_metric(rep, "deadline_miss_rate", &miss));
    if (coop_report_metric(rep, "no_such_metric", &miss) != COOP_STATUS_NOT_FOUND) return 3;
    if (strstr(coop_last_error(), "no_such_metric") == NULL) return 4;

    double pos[8];
    size_t n = 0;
    CHECK(coop_plan_placement(1000, 125, pos, 8, &n));
    CoopCostParams p = coop_cost_defaults();
    CoopCostReport c;
    CHECK(coop_cost_report(&p, &c));
    printf("miss=%.4f units=%zu power=%.0f efficiency=%.1f\n", miss, n, coop_deployment_power(n, 800), c.efficiency_ratio);

    coop_report_free(rep);
    coop_scenario_free(sc);
    return 0;
}
