#include <stdio.h>
#include <string.h>

#include "ocsp.h"

int main(void) {
    const char *text = "ocsp 1\nnvars 3\ncon 1 2\ncon 2 3\ncon 3 1\n";
    OcspInstance *inst = NULL;
    if (ocsp_instance_parse(text, strlen(text), &inst) != OCSP_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", ocsp_last_error_message());
        return 1;
    }
    char *json = NULL;
    OcspOutcome outcome;
    if (ocsp_decide_json(inst, "1/2", 10, 100, 0, false, &json, &outcome) != OCSP_STATUS_OK) {
        fprintf(stderr, "decide: %s\n", ocsp_last_error_message());
        return 1;
    }
    int ok = outcome == OCSP_OUTCOME_YES_KERNEL && strstr(json, "\"yes-kernel\"") != NULL;
    ocsp_string_free(json);

    if (ocsp_instance_parse("con 1 2\n", 8, &inst) != OCSP_STATUS_PARSE) {
        ok = 0;
    }
    ocsp_instance_free(inst);
    printf("%s %s\n", ok ? "ok" : "fail", ocsp_version());
    return ok ? 0 : 1;
}
