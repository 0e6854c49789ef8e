typedef int (*binop)(int, int);
static int add(int a, int b) { return a + b; }
static int mul(int a, int b) { return a * b; }
static binop ops[2] = {add, mul};

int fold(const int *v, int n, int which, int init) {
  binop f = ops[which & 1];
  for (int i = 0; i < n; i++)
    init = f(init, v[i]);
  return init;
}

int apply_twice(binop f, int x) { return f(f(x, x), x); }
