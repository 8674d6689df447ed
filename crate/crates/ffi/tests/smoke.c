#include "cyw.h"
#include <stdio.h>

int main(void) {
    CywMesh *mesh = NULL;
    if (cyw_mesh_new_preset("round-s3", 0, &mesh) != CYW_STATUS_OK) {
        fprintf(stderr, "%s\n", cyw_last_error());
        return 1;
    }
    double eta = 0.0;
    cyw_first_eigenpair(mesh, CYW_BOUNDARY_CLOSED, &eta, NULL, 0);
    cyw_mesh_free(mesh);

    CywRun *run = NULL;
    CywStatus s = cyw_run_config("preset = round-s3\n[target]\nvalue = 6\n", &run);
    char *report = cyw_run_report(run);
    printf("%d %d %s", (int)s, (int)cyw_run_accepted(run), report);
    cyw_string_free(report);
    cyw_run_free(run);
    return 0;
}
