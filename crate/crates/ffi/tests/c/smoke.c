#include <stdio.h>
#include <string.h>

#include "pdnql.h"

int main(int argc, char **argv) {
    if (argc != 2) {
        fprintf(stderr, "usage: smoke <pdn.json>\n");
        return 2;
    }
    PdnqlNetwork *net = NULL;
    if (pdnql_network_load(argv[1], &net) != PDNQL_STATUS_OK) {
        fprintf(stderr, "load: %s\n", pdnql_last_error());
        return 1;
    }
    PdnqlResult *res = NULL;
    const char *sql = "SELECT COUNT(*) FROM diagnoses WHERE diag = 'hd'";
    if (pdnql_run(net, sql, PDNQL_PRESET_FULL, &res) != PDNQL_STATUS_OK) {
        fprintf(stderr, "run: %s\n", pdnql_last_error());
        return 1;
    }
    char *csv = NULL;
    pdnql_result_format(res, PDNQL_FORMAT_CSV, &csv);
    printf("rows=%zu\n%s", pdnql_result_row_count(res), csv);
    pdnql_string_free(csv);
    pdnql_result_free(res);

    PdnqlStatus st = pdnql_run(net, "SELECT pid, time FROM diagnoses", PDNQL_PRESET_FULL, &res);
    printf("policy=%d %s\n", (int)st, res == NULL ? "null" : "set");
    pdnql_network_free(net);

    uint64_t bits = 0;
    size_t width = 0;
    const char *or_gate = "INPUT A 0\nINPUT B 1\nG0 OR 0 1 -> 2\nOUTPUT 2\n";
    st = pdnql_garble_eval(or_gate, 0, 1, 7, &bits, &width);
    printf("or=%d width=%zu status=%d\n", (int)bits, width, (int)st);
    return 0;
}
