#include <stdint.h>
#include <stddef.h>

#include "miniimg.h"

int LLVMFuzzerTestOneInput(const uint8_t *data, size_t size) {
    miniimg_decode(data, size);
    return 0;
}
