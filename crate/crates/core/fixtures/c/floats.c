float lerp(float a, float b, float t) { return a + (b - a) * t; }

double horner(const double *c, int n, double x) {
  double r = 0.0;
  for (int i = n - 1; i >= 0; i--)
    r = r * x + c[i];
  return r;
}

int to_fixed(double x) { return (int)(x * 65536.0); }

long double widen(float f) { return (long double)f / 3.0L; }
