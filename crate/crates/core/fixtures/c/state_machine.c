enum state { IDLE, RUN, DONE };

int count_tokens(const char *s) {
  enum state st = IDLE;
  int tokens = 0;
  for (; *s; s++) {
    switch (st) {
    case IDLE:
      if (*s != ' ') { st = RUN; tokens++; }
      break;
    case RUN:
      if (*s == ' ') st = IDLE;
      else if (*s == '.') st = DONE;
      break;
    case DONE:
      return tokens;
    }
  }
  return tokens;
}
