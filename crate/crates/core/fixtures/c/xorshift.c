#include <stdint.h>

static uint64_t state = 88172645463325252ull;

uint64_t next(void) {
  state ^= state << 13;
  state ^= state >> 7;
  state ^= state << 17;
  return state;
}

double uniform(void) { return (next() >> 11) * 0x1.0p-53; }

void shuffle(int *a, unsigned n) {
  for (unsigned i = n; i > 1; i--) {
    unsigned j = next() % i;
    int t = a[i - 1];
    a[i - 1] = a[j];
    a[j] = t;
  }
}
