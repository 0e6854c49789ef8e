static void swap(int *a, int *b) {
  int t = *a;
  *a = *b;
  *b = t;
}

void bubble(int *v, int n) {
  for (int i = 0; i < n; i++)
    for (int j = 0; j + 1 < n - i; j++)
      if (v[j] > v[j + 1])
        swap(&v[j], &v[j + 1]);
}

static int partition(int *v, int lo, int hi) {
  int p = v[hi], i = lo;
  for (int j = lo; j < hi; j++)
    if (v[j] < p)
      swap(&v[i++], &v[j]);
  swap(&v[i], &v[hi]);
  return i;
}

void quicksort(int *v, int lo, int hi) {
  if (lo < hi) {
    int p = partition(v, lo, hi);
    quicksort(v, lo, p - 1);
    quicksort(v, p + 1, hi);
  }
}
