void reverse(char *s, int n) {
  int i = 0, j = n - 1;
  while (i < j) {
    char t = s[i];
    s[i++] = s[j];
    s[j--] = t;
  }
}

int is_palindrome(const char *s, int n) {
  for (int i = 0; i < n / 2; i++)
    if (s[i] != s[n - 1 - i]) return 0;
  return 1;
}
