unsigned gcd(unsigned a, unsigned b) {
  while (b) {
    unsigned t = a % b;
    a = b;
    b = t;
  }
  return a;
}

unsigned lcm(unsigned a, unsigned b) { return a / gcd(a, b) * b; }
