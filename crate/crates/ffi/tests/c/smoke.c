#include <stdio.h>
#include <string.h>

#include "ttfs.h"

int main(int argc, char **argv) {
    if (argc != 2) {
        fprintf(stderr, "usage: smoke CHECKPOINT\n");
        return 64;
    }
    TtfsModel *model = NULL;
    if (ttfs_model_load(argv[1], &model) != TTFS_STATUS_OK) {
        fprintf(stderr, "load: %s\n", ttfs_last_error());
        return 1;
    }
    size_t n = ttfs_model_input_size(model);
    unsigned char pixels[1024];
    memset(pixels, 200, sizeof pixels);

    uint32_t float_class = 99, quant_class = 99, emu_class = 99;
    TtfsQuantized *q = NULL;
    TtfsImage *image = NULL;
    int32_t times[8];
    if (ttfs_model_predict(model, pixels, n, 0, &float_class) != TTFS_STATUS_OK ||
        ttfs_model_quantize(model, &q) != TTFS_STATUS_OK ||
        ttfs_quantized_predict(q, pixels, n, 0, &quant_class) != TTFS_STATUS_OK ||
        ttfs_image_export(q, &image) != TTFS_STATUS_OK ||
        ttfs_emulate(image, pixels, n, 0, &emu_class, times, 8) != TTFS_STATUS_OK) {
        fprintf(stderr, "call failed: %s\n", ttfs_last_error());
        return 1;
    }
    if (ttfs_model_predict(model, pixels, n + 1, 0, &float_class) != TTFS_STATUS_DIMENSION) {
        return 2;
    }
    printf("%s %u %u %u\n", ttfs_version(), float_class, quant_class, emu_class);
    ttfs_image_free(image);
    ttfs_quantized_free(q);
    ttfs_model_free(model);
    return quant_class == emu_class ? 0 : 3;
}
