/* Build: cc smoke.c -I../include -L../../../target/release -lrelaycache_ffi -o smoke */
#include <stdio.h>
#include <stdlib.h>

#include "relaycache.h"

static char *slurp(const char *path) {
    FILE *f = fopen(path, "rb");
    if (!f) return NULL;
    fseek(f, 0, SEEK_END);
    long n = ftell(f);
    rewind(f);
    char *buf = (char *)malloc((size_t)n + 1);
    if (buf && fread(buf, 1, (size_t)n, f) != (size_t)n) {
        free(buf);
        buf = NULL;
    }
    if (buf) buf[n] = '\0';
    fclose(f);
    return buf;
}

int main(int argc, char **argv) {
    if (argc != 2) {
        fprintf(stderr, "usage: %s CONFIG.json\n", argv[0]);
        return 2;
    }
    char *json = slurp(argv[1]);
    if (!json) {
        perror(argv[1]);
        return 1;
    }

    RcModel *model = NULL;
    RcStatus st = rc_model_from_json(json, &model);
    free(json);
    if (st != RC_OK) {
        fprintf(stderr, "error %d: %s\n", (int)st, rc_last_error_message());
        return 2;
    }

    RcThroughput t;
    if (rc_model_analytic(model, &t) == RC_OK)
        printf("T_D %.6f  T_2 %.6f  T %.6f\n", t.t_noncacheable, t.t_cacheable, t.t_network);

    size_t len = 0;
    rc_model_steady_state(model, NULL, 0, &len);
    double *pi = (double *)malloc(len * sizeof *pi);
    if (pi && rc_model_steady_state(model, pi, len, &len) == RC_OK)
        for (size_t i = 0; i < len; i++) printf("pi_%zu %.6f\n", i, pi[i]);
    free(pi);

    rc_model_free(model);
    return 0;
}
