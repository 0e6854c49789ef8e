int is_prime(unsigned n) {
  if (n < 2) return 0;
  for (unsigned d = 2; d * d <= n; d++)
    if (n % d == 0) return 0;
  return 1;
}

int count_primes(unsigned limit) {
  int c = 0;
  for (unsigned i = 0; i < limit; i++) c += is_prime(i);
  return c;
}
