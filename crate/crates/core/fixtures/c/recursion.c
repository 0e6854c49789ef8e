unsigned long fact(unsigned n) { return n < 2 ? 1 : n * fact(n - 1); }

int ackermann(int m, int n) {
  if (m == 0) return n + 1;
  if (n == 0) return ackermann(m - 1, 1);
  return ackermann(m - 1, ackermann(m, n - 1));
}

int gcd(int a, int b) { return b == 0 ? a : gcd(b, a % b); }
