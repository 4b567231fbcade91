#include <cmath>

#include <doctest.h>

#include "../support/oracles.hpp"
#include "vaproto/loss.hpp"
#include "vaproto/prototypes.hpp"

using namespace vaproto;

namespace {

// Analytic gradients of the episode objective w.r.t. the encoder tensors.
std::vector<Vector> loss_gradients(const EncoderParams& params,
                                   const Episode& ep, double lambda,
                                   CovKind kind = CovKind::Diagonal) {
  EpisodeLoss loss = episode_loss(params, ep, lambda, LossMode::Eval, kind);
  loss.tape.backward(loss.loss);
  std::vector<Vector> grads;
  for (const NodeId id : loss.params) grads.push_back(loss.tape.grad(id));
  return grads;
}

}  // namespace

TEST_CASE("identity encoder with zero-variance classes reproduces the classic loss") {
  const EncoderParams enc = oracles::identity_encoder(3);
  Rng rng(21);
  // all supports of a class identical -> zero variance through any encoder
  std::vector<std::vector<Vector>> sup(2), qry(2);
  for (int c = 0; c < 2; ++c) {
    Vector proto(3);
    for (auto& x : proto) x = 2.0 * rng.normal();
    sup[c] = {proto, proto, proto};
    for (int q = 0; q < 2; ++q) {
      Vector f(3);
      for (std::size_t d = 0; d < 3; ++d) f[d] = proto[d] + rng.normal();
      qry[c].push_back(std::move(f));
    }
  }
  const Episode ep = oracles::make_episode(sup, qry);
  const EpisodeLoss loss = episode_loss(enc, ep, 0.0, LossMode::Eval);

  std::vector<std::vector<Vector>> sup_embeds = sup;  // identity encoder
  std::vector<Vector> q_embeds;
  std::vector<std::size_t> q_classes;
  for (const auto& slot : ep.query) {
    q_embeds.push_back(slot.features);
    q_classes.push_back(slot.cls);
  }
  const double ref = oracles::vanilla_episode_nll(sup_embeds, q_embeds, q_classes);
  CHECK(std::abs(loss.value - ref) < 1e-10);
  CHECK(loss.regularizer == 0.0);
}

TEST_CASE("equal logits give log(ways)") {
  const EncoderParams enc = oracles::identity_encoder(2);
  // all classes share the same support set -> identical stats -> equal logits
  const std::vector<Vector> shared = {{1.0, 2.0}, {3.0, 0.0}};
  const Episode ep = oracles::make_episode({shared, shared, shared},
                                           {{{0.5, 0.5}}, {{2.0, 1.0}}, {{1.0, 1.0}}});
  const EpisodeLoss loss = episode_loss(enc, ep, 0.0, LossMode::Eval);
  CHECK(loss.value == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("regularizer arithmetic on known variances") {
  const EncoderParams enc = oracles::identity_encoder(2);
  // class 0: mean m, offsets +/-d with d = (sqrt(3/2), sqrt(2)) -> var (3, 4)
  const double d0 = std::sqrt(1.5), d1 = std::sqrt(2.0);
  const std::vector<Vector> class0 = {{1.0 - d0, 2.0 - d1}, {1.0 + d0, 2.0 + d1}};
  // class 1: two identical supports -> var (0, 0)
  const std::vector<Vector> class1 = {{-3.0, 0.5}, {-3.0, 0.5}};
  const Episode ep = oracles::make_episode({class0, class1},
                                           {{{1.0, 2.0}}, {{-3.0, 0.4}}});
  const EpisodeLoss l0 = episode_loss(enc, ep, 0.0, LossMode::Eval);
  const EpisodeLoss l1 = episode_loss(enc, ep, 1.0, LossMode::Eval);
  // ||diag(3,4)||_F = 5, averaged over 2 ways -> 2.5
  CHECK(l1.regularizer == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(l1.value - l0.value == doctest::Approx(2.5).epsilon(1e-10));
  CHECK(l1.nll == doctest::Approx(l0.value).epsilon(1e-12));
}

TEST_CASE("regularizer matches a post-hoc recomputation from class stats") {
  Rng rng(33);
  Rng init = rng.substream("enc");
  const EncoderParams enc = EncoderParams::init(5, 7, 4, 0.0, init);
  for (int rep = 0; rep < 20; ++rep) {
    const Episode ep = oracles::random_episode(rng, 3, 4, 2, 5);
    const double lambda = rep % 2 == 0 ? 0.1 : 1.7;
    const EpisodeLoss loss = episode_loss(enc, ep, lambda, LossMode::Eval);
    double reg = 0.0;
    std::size_t offset = 0;
    for (std::uint32_t c = 0; c < ep.ways; ++c) {
      std::vector<Vector> sup;
      for (std::uint32_t i = 0; i < ep.supports; ++i) {
        sup.push_back(enc.forward(ep.support[offset + i].features));
      }
      offset += ep.supports;
      reg += class_stats(sup, CovKind::Diagonal).var_frobenius();
    }
    reg *= lambda / ep.ways;
    REQUIRE(loss.regularizer >= 0.0);
    REQUIRE(std::abs(loss.regularizer - reg) < 1e-10);
    REQUIRE(std::abs(loss.value - loss.nll - reg) < 1e-10);
  }
}

TEST_CASE("loss is invariant under class order permutation") {
  Rng rng(44);
  Rng init = rng.substream("enc");
  const EncoderParams enc = EncoderParams::init(4, 6, 5, 0.0, init);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::vector<Vector>> sup(3), qry(3);
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < 3; ++i) {
        Vector f(4);
        for (auto& x : f) x = rng.normal();
        sup[c].push_back(std::move(f));
      }
      Vector f(4);
      for (auto& x : f) x = rng.normal();
      qry[c].push_back(std::move(f));
    }
    const Episode ep = oracles::make_episode(sup, qry);
    const Episode flipped = oracles::make_episode({sup[2], sup[0], sup[1]},
                                                  {qry[2], qry[0], qry[1]});
    const double a = episode_loss(enc, ep, 0.1, LossMode::Eval).value;
    const double b = episode_loss(enc, flipped, 0.1, LossMode::Eval).value;
    REQUIRE(std::abs(a - b) < 1e-12);
  }
}

TEST_CASE("episode gradients match finite differences") {
  Rng rng(55);
  for (int rep = 0; rep < 6; ++rep) {
    const std::size_t dim = 3 + rng.below(4);
    Rng init = rng.split(rep);
    EncoderParams enc = EncoderParams::init(dim, 4, 3, 0.0, init);
    const Episode ep =
        oracles::unsaturated_episode(rng, enc, 2 + rng.below(2), 3, 2, dim);
    for (const double lambda : {0.0, 0.1}) {
      REQUIRE(oracles::episode_grad_check(enc, ep, lambda) < 1e-4);
    }
  }
}

TEST_CASE("isotropic episode gradients match finite differences") {
  Rng rng(66);
  Rng init = rng.substream("enc");
  EncoderParams enc = EncoderParams::init(4, 5, 4, 0.0, init);
  const Episode ep = oracles::unsaturated_episode(rng, enc, 3, 3, 2, 4);
  CHECK(oracles::episode_grad_check(enc, ep, 0.1, CovKind::Isotropic) < 1e-4);
}

TEST_CASE("shifting every embedding uniformly never changes the loss") {
  // the final bias enters every support and query embedding identically,
  // so its gradient is identically zero
  Rng rng(67);
  Rng init = rng.substream("enc");
  EncoderParams enc = EncoderParams::init(4, 5, 4, 0.0, init);
  const Episode ep = oracles::random_episode(rng, 3, 3, 2, 4);
  const double base = episode_loss(enc, ep, 0.1, LossMode::Eval).value;
  EncoderParams shifted = enc;
  for (auto& b : shifted.b2) b += 17.5;
  const double moved = episode_loss(shifted, ep, 0.1, LossMode::Eval).value;
  CHECK(std::abs(base - moved) < 1e-9);

  const auto grads = loss_gradients(enc, ep, 0.1);
  for (double g : grads[3]) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("train mode needs a dropout stream; eval mode ignores dropout") {
  Rng rng(77);
  Rng init = rng.substream("enc");
  EncoderParams enc = EncoderParams::init(3, 4, 3, 0.5, init);
  const Episode ep = oracles::random_episode(rng, 2, 2, 1, 3);
  CHECK_THROWS_AS(episode_loss(enc, ep, 0.0, LossMode::Train), UsageError);

  const double a = episode_loss(enc, ep, 0.0, LossMode::Eval).value;
  const double b = episode_loss(enc, ep, 0.0, LossMode::Eval).value;
  CHECK(a == b);

  Rng drop1(123), drop2(123), drop3(321);
  const double t1 = episode_loss(enc, ep, 0.0, LossMode::Train, CovKind::Diagonal, &drop1).value;
  const double t2 = episode_loss(enc, ep, 0.0, LossMode::Train, CovKind::Diagonal, &drop2).value;
  const double t3 = episode_loss(enc, ep, 0.0, LossMode::Train, CovKind::Diagonal, &drop3).value;
  CHECK(t1 == t2);       // same mask stream
  CHECK(t1 != t3);       // different masks move the loss
  CHECK(std::abs(a - t1) > 0.0);
}

TEST_CASE("lambda must be non-negative") {
  const EncoderParams enc = oracles::identity_encoder(2);
  const Episode ep = oracles::make_episode({{{1.0, 0.0}}, {{0.0, 1.0}}},
                                           {{{1.0, 0.1}}, {{0.1, 1.0}}});
  CHECK_THROWS_AS(episode_loss(enc, ep, -0.1, LossMode::Eval), UsageError);
}
