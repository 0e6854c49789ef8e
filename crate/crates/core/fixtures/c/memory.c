#include <stdlib.h>
#include <string.h>
int *make_range(int n) {
  int *v = malloc(sizeof(int) * (size_t)n);
  if (!v) return 0;
  for (int i = 0; i < n; i++) v[i] = i;
  return v;
}

char *dup(const char *s) {
  size_t n = strlen(s) + 1;
  char *d = malloc(n);
  if (d) memcpy(d, s, n);
  return d;
}

void clear(int *v, int n) { memset(v, 0, sizeof(int) * (size_t)n); }
