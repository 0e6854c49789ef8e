int bsearch_int(const int *v, int n, int key) {
  int lo = 0, hi = n - 1;
  while (lo <= hi) {
    int mid = lo + (hi - lo) / 2;
    if (v[mid] == key) return mid;
    if (v[mid] < key) lo = mid + 1;
    else hi = mid - 1;
  }
  return -1;
}
