int find_pair(const int *a, int n, int target) {
  int i, j;
  for (i = 0; i < n; i++)
    for (j = i + 1; j < n; j++)
      if (a[i] + a[j] == target)
        goto found;
  return -1;
found:
  return i * n + j;
}
