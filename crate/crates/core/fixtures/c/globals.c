static int counter;
int table[8] = {1, 2, 3, 5, 8, 13, 21, 34};
const char *greeting = "hello, world";
double scale = 2.5;

int bump(void) { return ++counter; }

int lookup(unsigned i) { return i < 8 ? table[i] : -1; }

double scaled(int i) { return table[i & 7] * scale; }
