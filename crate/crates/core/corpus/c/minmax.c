struct range { int lo, hi; };

struct range minmax(const int *a, int n) {
  struct range r = { a[0], a[0] };
  for (int i = 1; i < n; i++) {
    if (a[i] < r.lo) r.lo = a[i];
    if (a[i] > r.hi) r.hi = a[i];
  }
  return r;
}
