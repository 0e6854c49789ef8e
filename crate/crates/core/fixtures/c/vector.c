typedef float v4f __attribute__((vector_size(16)));
typedef int v4i __attribute__((vector_size(16)));

v4f axpy(float a, v4f x, v4f y) { return a * x + y; }

float hsum(v4f v) { return v[0] + v[1] + v[2] + v[3]; }

v4i mask_max(v4i a, v4i b) { v4i m = a > b; return (a & m) | (b & ~m); }

void saxpy(int n, float a, const float *x, float *y) {
  for (int i = 0; i < n; i++)
    y[i] = a * x[i] + y[i];
}
