#include <math.h>
#include <stdio.h>
#include <string.h>

#include "lff.h"

#define CHECK(cond)                                                  \
    do {                                                             \
        if (!(cond)) {                                               \
            fprintf(stderr, "line %d: %s\n", __LINE__, #cond);       \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(void) {
    enum { N = 16000 };
    static double samples[N];
    for (int i = 0; i < N; i++) {
        samples[i] = 0.5 * sin(2.0 * M_PI * 1000.0 * i / 16000.0);
    }
    LffStftConfig cfg = lff_stft_config_default();
    LffSpectrum *spec = NULL;
    CHECK(lff_spectrum_compute(samples, N, 16000, &cfg, &spec) == LFF_STATUS_OK);
    size_t frames = 0, bins = 0;
    CHECK(lff_spectrum_shape(spec, &frames, &bins) == LFF_STATUS_OK);
    CHECK(frames == 98 && bins == 512);

    LffFilterBank *fb = NULL;
    CHECK(lff_filterbank_mel(40, bins, 16000, LFF_SHAPE_TRIANGLE, &fb) == LFF_STATUS_OK);
    static double feats[98 * 40];
    CHECK(lff_forward(fb, spec, 1e-10, feats, frames * 40) == LFF_STATUS_OK);
    CHECK(lff_forward(fb, spec, 1e-10, feats, 7) == LFF_STATUS_SHAPE);
    CHECK(lff_last_error_message() != NULL);

    double scores[4] = {0.6, 0.4, 0.5, 0.3};
    unsigned char targets[4] = {1, 1, 0, 0};
    double eer = -1.0, thr = 0.0;
    CHECK(lff_compute_eer(scores, targets, 4, &eer, &thr) == LFF_STATUS_OK);
    CHECK(fabs(eer - 0.25) < 1e-12);

    lff_filterbank_free(fb);
    lff_spectrum_free(spec);
    puts("ok");
    return 0;
}
