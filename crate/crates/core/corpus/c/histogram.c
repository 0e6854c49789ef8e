static unsigned bins[16];

void add(float x, float lo, float hi) {
  if (x < lo || x >= hi) return;
  int b = (int)((x - lo) / (hi - lo) * 16.0f);
  bins[b]++;
}

unsigned mode(void) {
  unsigned best = 0;
  for (unsigned i = 1; i < 16; i++)
    if (bins[i] > bins[best]) best = i;
  return best;
}
