struct point { int x, y; };
struct rect { struct point lo, hi; char tag; };
struct __attribute__((packed)) header { char kind; int length; short flags; };

int area(struct rect r) { return (r.hi.x - r.lo.x) * (r.hi.y - r.lo.y); }

struct point midpoint(const struct rect *r) {
  struct point p = {(r->lo.x + r->hi.x) / 2, (r->lo.y + r->hi.y) / 2};
  return p;
}

int header_len(const struct header *h) { return h->length + h->flags; }

struct rect unit = {{0, 0}, {1, 1}, 'u'};
