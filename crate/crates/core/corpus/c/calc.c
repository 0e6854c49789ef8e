static long stack[64];
static int top;

void push(long v) { if (top < 64) stack[top++] = v; }
long pop(void) { return top > 0 ? stack[--top] : 0; }

long apply(char op) {
  long b = pop(), a = pop();
  switch (op) {
  case '+': return a + b;
  case '-': return a - b;
  case '*': return a * b;
  case '/': return b ? a / b : 0;
  default: return 0;
  }
}
