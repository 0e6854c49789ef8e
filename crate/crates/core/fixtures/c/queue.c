#define CAP 16
struct queue { int items[CAP]; int head, tail, size; };

int push(struct queue *q, int v) {
  if (q->size == CAP) return 0;
  q->items[q->tail] = v;
  q->tail = (q->tail + 1) % CAP;
  q->size++;
  return 1;
}

int pop(struct queue *q, int *out) {
  if (q->size == 0) return 0;
  *out = q->items[q->head];
  q->head = (q->head + 1) % CAP;
  q->size--;
  return 1;
}

static struct queue global_q;
int enqueue_many(int n) {
  int ok = 0;
  for (int i = 0; i < n; i++) ok += push(&global_q, i * i);
  return ok;
}
