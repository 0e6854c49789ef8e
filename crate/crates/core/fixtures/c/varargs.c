#include <stdarg.h>
#include <stdio.h>
int sum_ints(int count, ...) {
  va_list ap;
  va_start(ap, count);
  int s = 0;
  for (int i = 0; i < count; i++)
    s += va_arg(ap, int);
  va_end(ap);
  return s;
}

void report(const char *label, int v) { printf("%s=%d\n", label, v); }
