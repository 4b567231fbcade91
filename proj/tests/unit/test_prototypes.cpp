#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "../support/oracles.hpp"
#include "vaproto/prototypes.hpp"
#include "vaproto/rng.hpp"

using namespace vaproto;

namespace {

ClassGaussian random_gaussian(Rng& rng, std::size_t dim) {
  ClassGaussian g;
  g.mean.resize(dim);
  g.var.resize(dim);
  for (auto& x : g.mean) x = 4.0 * (rng.uniform() - 0.5);
  for (auto& v : g.var) v = 3.0 * rng.uniform();
  g.support_count = 2;
  return g;
}

}  // namespace

TEST_CASE("class_stats mean and unbiased variance") {
  const Vector support[] = {Vector{0, 0}, Vector{2, 2}};
  const ClassGaussian g = class_stats(support, CovKind::Diagonal);
  CHECK(g.mean == Vector{1, 1});
  CHECK(g.var == Vector{2, 2});  // ((0-1)^2 + (2-1)^2) / 1 per dim
  CHECK(g.support_count == 2);

  const Vector singleton[] = {Vector{5, 3}};
  const ClassGaussian s = class_stats(singleton, CovKind::Diagonal);
  CHECK(s.mean == Vector{5, 3});
  CHECK(s.var == Vector{0, 0});

  CHECK_THROWS_AS(class_stats({}, CovKind::Diagonal), UsageError);
}

TEST_CASE("isotropic kind stores the diagonal average as one scalar") {
  // per-dim variances [2, 4] -> alpha = 3
  const Vector support[] = {Vector{-1, 1 - std::sqrt(2.0)},
                            Vector{1, 1 + std::sqrt(2.0)}};
  const ClassGaussian g = class_stats(support, CovKind::Isotropic);
  CHECK(g.kind == CovKind::Isotropic);
  CHECK(g.var.empty());
  CHECK(g.alpha == doctest::Approx(3.0).epsilon(1e-12));
  const Vector mat = g.variances();
  CHECK(mat.size() == 2);
  CHECK(mat[0] == g.alpha);
  CHECK(mat[1] == g.alpha);
}

TEST_CASE("point-mass distance") {
  ClassGaussian g;
  g.mean = {0, 0};
  g.var = {0, 0};
  CHECK(wasserstein_dirac_sq(g, {0, 0}) == 0.0);

  g.var = {1, 1};
  CHECK(wasserstein_dirac_sq(g, {0, 0}) == 2.0);  // pure trace

  g.mean = {1, 2};
  g.var = {2, 3};
  CHECK(wasserstein_dirac_sq(g, {4, 6}) == doctest::Approx(30.0).epsilon(1e-15));

  CHECK_THROWS_AS(wasserstein_dirac_sq(g, {1, 2, 3}), UsageError);
}

TEST_CASE("gaussian-to-gaussian distance") {
  Rng rng(5);
  // equal covariance wI: distance reduces to the squared mean gap, for any w
  for (const double w : {0.01, 1.0, 100.0}) {
    ClassGaussian a = random_gaussian(rng, 8);
    ClassGaussian b = random_gaussian(rng, 8);
    a.var.assign(8, w);
    b.var.assign(8, w);
    CHECK(bures_sq(a, b) == squared_distance(a.mean, b.mean));
  }

  ClassGaussian g = random_gaussian(rng, 4);
  CHECK(bures_sq(g, g) == 0.0);

  ClassGaussian a, b;
  a.mean = {1.0};
  b.mean = {1.0};
  a.var = {4.0};
  b.var = {1.0};
  CHECK(bures_sq(a, b) == doctest::Approx(1.0).epsilon(1e-15));  // (2-1)^2

  CHECK_THROWS_AS(bures_sq(a, random_gaussian(rng, 3)), UsageError);
}

TEST_CASE("point-mass distance is the zero-variance specialization") {
  Rng rng(6);
  for (int rep = 0; rep < 200; ++rep) {
    const ClassGaussian g = random_gaussian(rng, 1 + rng.below(16));
    Vector q(g.dim());
    for (auto& x : q) x = 3.0 * (rng.uniform() - 0.5);
    CHECK(wasserstein_dirac_sq(g, q) == bures_sq(g, ClassGaussian::point(q)));
  }
}

TEST_CASE("bures metric properties") {
  Rng rng(7);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t dim = 1 + rng.below(8);
    const ClassGaussian a = random_gaussian(rng, dim);
    const ClassGaussian b = random_gaussian(rng, dim);
    const ClassGaussian c = random_gaussian(rng, dim);
    const double ab = bures_sq(a, b);
    const double ba = bures_sq(b, a);
    const double ac = bures_sq(a, c);
    const double bc = bures_sq(b, c);
    REQUIRE(ab >= 0.0);
    REQUIRE(ab == ba);
    // triangle inequality holds for the square root
    REQUIRE(std::sqrt(ac) <= std::sqrt(ab) + std::sqrt(bc) + 1e-9);
    if (rep % 50 == 0) REQUIRE(bures_sq(a, a) == 0.0);
  }
}

TEST_CASE("class probabilities") {
  Rng rng(8);
  ClassGaussian only = random_gaussian(rng, 4);
  Vector q(4, 0.0);
  const Matrix p1 = class_probabilities({&q, 1}, {&only, 1});
  CHECK(p1.at(0, 0) == 1.0);

  // equidistant classes share the mass
  ClassGaussian c1, c2, c3;
  c1.mean = {1, 0};
  c2.mean = {-1, 0};
  c3.mean = {0, 1};
  c1.var = c2.var = c3.var = {0.5, 0.5};
  const ClassGaussian classes[] = {c1, c2, c3};
  Vector origin{0, 0.0};
  const Matrix p3 = class_probabilities({&origin, 1}, classes);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(p3.at(0, c) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }

  CHECK_THROWS_AS(class_probabilities({&q, 1}, {}), UsageError);
}

TEST_CASE("zero-variance classes reduce to the classic prototype model") {
  Rng rng(9);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t dim = 1 + rng.below(10);
    const std::size_t ways = 2 + rng.below(4);
    std::vector<ClassGaussian> classes;
    std::vector<Vector> means;
    for (std::size_t c = 0; c < ways; ++c) {
      Vector m(dim);
      for (auto& x : m) x = 5.0 * (rng.uniform() - 0.5);
      means.push_back(m);
      classes.push_back(ClassGaussian::point(std::move(m)));
    }
    Vector q(dim);
    for (auto& x : q) x = 5.0 * (rng.uniform() - 0.5);
    const Matrix probs = class_probabilities({&q, 1}, classes);
    const auto ref = oracles::vanilla_probs(q, means);
    for (std::size_t c = 0; c < ways; ++c) {
      REQUIRE(std::abs(probs.at(0, c) - ref[c]) < 1e-12);
    }
    REQUIRE(predict({&q, 1}, classes)[0] == oracles::vanilla_predict(q, means));
  }
}

TEST_CASE("uniform covariance inflation leaves probabilities unchanged") {
  Rng rng(10);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t dim = 1 + rng.below(8);
    const std::size_t ways = 2 + rng.below(4);
    std::vector<ClassGaussian> classes, inflated;
    for (std::size_t c = 0; c < ways; ++c) {
      ClassGaussian g = random_gaussian(rng, dim);
      inflated.push_back(g);
      for (auto& v : inflated.back().var) v += 7.5;
      classes.push_back(std::move(g));
    }
    Vector q(dim);
    for (auto& x : q) x = 4.0 * (rng.uniform() - 0.5);
    const Matrix p = class_probabilities({&q, 1}, classes);
    const Matrix pi = class_probabilities({&q, 1}, inflated);
    for (std::size_t c = 0; c < ways; ++c) {
      REQUIRE(std::abs(p.at(0, c) - pi.at(0, c)) < 1e-12);
    }
    REQUIRE(predict({&q, 1}, classes) == predict({&q, 1}, inflated));
  }
}

TEST_CASE("predict tie-breaking and permutation equivariance") {
  ClassGaussian near0, tie1, far2, tie3;
  near0.mean = {10.0};
  tie1.mean = {1.0};
  far2.mean = {50.0};
  tie3.mean = {-1.0};
  near0.var = tie1.var = far2.var = tie3.var = {0.0};
  const ClassGaussian classes[] = {near0, tie1, far2, tie3};
  Vector origin{0.0};
  // classes 1 and 3 tie at distance 1; the lower index wins
  CHECK(predict({&origin, 1}, classes)[0] == 1);

  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<ClassGaussian> cs;
    for (int c = 0; c < 4; ++c) cs.push_back(random_gaussian(rng, 3));
    Vector q(3);
    for (auto& x : q) x = 3.0 * (rng.uniform() - 0.5);
    const auto base = predict({&q, 1}, cs)[0];
    std::vector<std::size_t> perm = {2, 0, 3, 1};
    std::vector<ClassGaussian> shuffled;
    for (std::size_t i : perm) shuffled.push_back(cs[i]);
    const auto moved = predict({&q, 1}, shuffled)[0];
    REQUIRE(perm[moved] == base);
  }
}

TEST_CASE("episodes from a separated generator classify perfectly") {
  const Dataset ds = generate_synthetic(4, 40, 16, 10.0, 0.1, 31);
  SamplerConfig cfg;
  cfg.ways = 4;
  cfg.shots = 4;
  cfg.supports = 8;
  Rng rng(13);
  std::size_t correct = 0, total = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const Episode ep = sample_episode({&ds, 1}, cfg, rng, rep);
    std::vector<ClassGaussian> classes;
    std::size_t offset = 0;
    for (std::uint32_t c = 0; c < ep.ways; ++c) {
      std::vector<Vector> sup;
      for (std::uint32_t i = 0; i < ep.supports; ++i) {
        sup.push_back(ep.support[offset + i].features);
      }
      offset += ep.supports;
      classes.push_back(class_stats(sup, CovKind::Diagonal));
    }
    std::vector<Vector> queries;
    for (const auto& s : ep.query) queries.push_back(s.features);
    const auto picks = predict(queries, classes);
    for (std::size_t i = 0; i < picks.size(); ++i) {
      correct += picks[i] == ep.query[i].cls;
      ++total;
    }
  }
  CHECK(correct == total);
}
