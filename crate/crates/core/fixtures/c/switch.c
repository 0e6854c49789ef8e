int classify(int c) {
  switch (c) {
  case 0: return 10;
  case 1: return 20;
  case 2:
  case 3: return 30;
  case 7: return 70;
  default: return -1;
  }
}

const char *name(int day) {
  switch (day) {
  case 0: return "sun";
  case 1: return "mon";
  case 2: return "tue";
  default: return "?";
  }
}
