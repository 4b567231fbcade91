#include <cmath>
#include <doctest.h>

#include "vaproto/rng.hpp"

using namespace vaproto;

TEST_CASE("rng determinism and stream independence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

  // split ignores consumption
  Rng c(42);
  c.next();
  c.next();
  Rng s1 = Rng(42).split(7);
  Rng s2 = c.split(7);
  for (int i = 0; i < 10; ++i) CHECK(s1.next() == s2.next());

  // named substreams differ from each other and the parent
  Rng p(42);
  CHECK(p.substream("data").next() != p.substream("episodes").next());
}

TEST_CASE("rng uniform and normal moments") {
  Rng rng(7);
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sq += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sq / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12).epsilon(0.02));

  sum = 0;
  sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("below is unbiased over small ranges") {
  Rng rng(99);
  int counts[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < 50000; ++i) ++counts[rng.below(5)];
  for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.05));
}
