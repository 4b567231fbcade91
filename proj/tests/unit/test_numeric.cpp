#include <cmath>

#include <doctest.h>

#include "vaproto/numeric.hpp"
#include "vaproto/rng.hpp"

using namespace vaproto;

TEST_CASE("matvec basics") {
  CHECK(matvec(Matrix::identity(3), {1, 2, 3}) == Vector{1, 2, 3});
  CHECK(matvec(Matrix(2, 2), {5, 7}) == Vector{0, 0});

  Matrix m(2, 2);
  m.at(0, 0) = 1; m.at(0, 1) = 2;
  m.at(1, 0) = 3; m.at(1, 1) = 4;
  CHECK(matvec(m, {1, 1}) == Vector{3, 7});

  CHECK_THROWS_AS(matvec(m, {1, 2, 3}), UsageError);
}

TEST_CASE("relu sign cases") {
  CHECK(relu({-1, 0, 2}) == Vector{0, 0, 2});
  CHECK(relu({0, 0}) == Vector{0, 0});
  CHECK(relu({3.5, -3.5}) == Vector{3.5, 0});
}

TEST_CASE("softmax values") {
  const Vector u = softmax({0, 0, 0});
  for (double p : u) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-14));

  const Vector big = softmax({1000, 1000});
  CHECK(big[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::isfinite(big[0]));

  const Vector ln = softmax({std::log(2.0), 0.0});
  CHECK(ln[0] == doctest::Approx(2.0 / 3).epsilon(1e-13));
  CHECK(ln[1] == doctest::Approx(1.0 / 3).epsilon(1e-13));
}

TEST_CASE("softmax sums to one and ignores logit shifts") {
  Rng rng(31);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rng.below(8);
    Vector logits(n);
    for (auto& x : logits) x = 20.0 * (rng.uniform() - 0.5);
    const Vector p = softmax(logits);
    double total = 0.0;
    for (double x : p) {
      CHECK(x > 0.0);
      CHECK(x <= 1.0);
      total += x;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);

    const double shift = 100.0 * (rng.uniform() - 0.5);
    Vector shifted = logits;
    for (auto& x : shifted) x += shift;
    const Vector q = softmax(shifted);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p[i] - q[i]) < 1e-12);
  }
}

TEST_CASE("cross entropy") {
  CHECK(cross_entropy({1.0}, 0) == 0.0);
  CHECK(cross_entropy({0.5, 0.5}, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(cross_entropy({0.25, 0.75}, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK_THROWS_AS(cross_entropy({0.5, 0.5}, 2), UsageError);
  // clamp keeps degenerate inputs finite
  CHECK(std::isfinite(cross_entropy({0.0, 1.0}, 0)));
}

TEST_CASE("finiteness guards") {
  CHECK(all_finite(Vector{1, 2, 3}));
  CHECK_FALSE(all_finite(Vector{1, std::nan(""), 3}));
  CHECK_THROWS_AS(ensure_finite(Vector{1.0 / 0.0}, "test"), NumericError);
}
