#include <stddef.h>
struct node {
  int value;
  struct node *next;
};

int sum_list(const struct node *n) {
  int s = 0;
  while (n != NULL) {
    s += n->value;
    n = n->next;
  }
  return s;
}

struct node *find(struct node *n, int v) {
  for (; n; n = n->next)
    if (n->value == v)
      return n;
  return NULL;
}
