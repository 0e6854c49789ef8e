#include <stdatomic.h>
atomic_int hits;

int record(void) { return atomic_fetch_add(&hits, 1) + 1; }

int try_claim(atomic_int *slot, int id) {
  int expected = 0;
  return atomic_compare_exchange_strong(slot, &expected, id);
}

int snapshot(void) { return atomic_load_explicit(&hits, memory_order_acquire); }
