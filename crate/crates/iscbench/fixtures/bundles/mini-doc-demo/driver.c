#include <stdint.h>
#include <stddef.h>

#include "minidoc.h"

/* Fuzz driver: hand the raw input buffer to the top-level parser. The
 * parser owns all validation; any return code is acceptable, crashes are
 * findings. */
int LLVMFuzzerTestOneInput(const uint8_t *data, size_t size) {
    minidoc_result_t result;
    minidoc_parse(data, size, &result);
    return 0;
}
