#include <stddef.h>
struct tree { int key; struct tree *left, *right; };

int depth(const struct tree *t) {
  if (!t) return 0;
  int l = depth(t->left), r = depth(t->right);
  return 1 + (l > r ? l : r);
}

const struct tree *lookup(const struct tree *t, int key) {
  while (t && t->key != key)
    t = key < t->key ? t->left : t->right;
  return t;
}

int count(const struct tree *t) { return t ? 1 + count(t->left) + count(t->right) : 0; }
