/* Fuzz target for foo (minimum input: 0 bytes). Generated; do not edit. */
#include <stddef.h>
#include <stdint.h>
#include <string.h>
#include <stdlib.h>

#include "example_array.h"

_Static_assert(sizeof(char) == 1, "unexpected size for char");

int LLVMFuzzerTestOneInput(uint8_t *data, size_t size) {
    uint8_t *pos = data;
    size_t remaining = size;
    size_t count = remaining / sizeof(char);
    char *pBuf = NULL;
    if (count > 0) {
        pBuf = (char *)malloc(count * sizeof(char));
        if (pBuf == NULL) {
            return 0;
        }
        memcpy(pBuf, pos, count * sizeof(char));
    }
    int Len = (int)count;
    foo(pBuf, Len);
    free(pBuf);
    return 0;
}
