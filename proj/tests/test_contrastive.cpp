#include <doctest.h>

#include <cmath>
#include <numeric>

#include "g2p2/contrastive.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using g2p2::LossMask;
using g2p2::Parameter;
using g2p2::SimilarityBatch;
using g2p2::SimilarityKind;
using g2p2::Tape;
using g2p2::Tensor;
using g2p2::Var;

namespace {

SimilarityBatch constant_batch(Tape& tape, const Tensor& sim) {
  SimilarityBatch b;
  b.matrix = tape.constant(sim);
  b.targets.resize(sim.rows());
  std::iota(b.targets.begin(), b.targets.end(), 0);
  return b;
}

}  // namespace

TEST_SUITE("similarity_matrix") {
  TEST_CASE("orthonormal rows give exp(tau) on the diagonal only") {
    Tape tape;
    const Tensor basis = Tensor::matrix({{2, 0, 0}, {0, 3, 0}, {0, 0, 0.5f}});  // orthogonal rows
    Parameter tau("tau", Tensor::scalar(0.0f));
    Var a = tape.constant(basis);
    const SimilarityBatch batch =
        g2p2::similarity_matrix(tape, a, a, tape.param(tau), SimilarityKind::kTextNode);
    const Tensor& s = batch.matrix.value();
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(s.at(i, j) == doctest::Approx(i == j ? 1.0f : 0.0f).epsilon(1e-6));
      }
    }
    CHECK(batch.targets == std::vector<int>{0, 1, 2});
  }

  TEST_CASE("temperature scales every entry by exp(tau)") {
    g2p2::Rng rng(31);
    const Tensor a = testutil::random_tensor(4, 6, rng);
    const Tensor b = testutil::random_tensor(4, 6, rng);
    Parameter tau0("tau", Tensor::scalar(0.0f));
    Parameter tau_ln2("tau", Tensor::scalar(std::log(2.0f)));

    Tape t1, t2;
    const Tensor& s1 =
        g2p2::similarity_matrix(t1, t1.constant(a), t1.constant(b), t1.param(tau0), SimilarityKind::kTextNode)
            .matrix.value();
    const Tensor& s2 =
        g2p2::similarity_matrix(t2, t2.constant(a), t2.constant(b), t2.param(tau_ln2), SimilarityKind::kTextNode)
            .matrix.value();
    for (std::size_t i = 0; i < s1.numel(); ++i) CHECK(s2[i] == doctest::Approx(2.0f * s1[i]).epsilon(1e-5));
  }

  TEST_CASE("random batch matches the cosine oracle") {
    g2p2::Rng rng(37);
    const Tensor a = testutil::random_tensor(6, 4, rng, 2.0);
    const Tensor b = testutil::random_tensor(6, 4, rng, 2.0);
    const double tau = 0.7;
    Parameter tp("tau", Tensor::scalar(static_cast<float>(tau)));
    Tape tape;
    const Tensor& got =
        g2p2::similarity_matrix(tape, tape.constant(a), tape.constant(b), tape.param(tp), SimilarityKind::kNodeSummary)
            .matrix.value();
    const oracle::Mat want = oracle::cosine_similarity(oracle::from_tensor(a), oracle::from_tensor(b), tau);
    REQUIRE(got.numel() == want.data.size());
    for (std::size_t i = 0; i < got.numel(); ++i) CHECK(std::fabs(got[i] - want.data[i]) < 1e-6);
  }

  TEST_CASE("row-count mismatch is rejected") {
    Tape tape;
    Parameter tau("tau", Tensor::scalar(0.0f));
    Var a = tape.constant(Tensor(3, 4));
    Var b = tape.constant(Tensor(2, 4));
    CHECK_THROWS_AS(g2p2::similarity_matrix(tape, a, b, tape.param(tau), SimilarityKind::kTextNode),
                    g2p2::Error);
  }

  TEST_CASE("empty batches cannot even be represented") {
    CHECK_THROWS_AS(Tensor(0, 4), g2p2::ShapeError);
  }

  TEST_CASE("non-scalar tau is rejected") {
    Tape tape;
    Parameter tau("tau", Tensor::row({0.0f, 1.0f}));
    Var a = tape.constant(Tensor(3, 4));
    CHECK_THROWS_AS(g2p2::similarity_matrix(tape, a, a, tape.param(tau), SimilarityKind::kTextNode),
                    g2p2::ShapeError);
  }
}

TEST_SUITE("npair_loss") {
  TEST_CASE("single pair has zero loss") {
    Tape tape;
    const SimilarityBatch b = constant_batch(tape, Tensor::scalar(5.0f));
    CHECK(g2p2::npair_loss(tape, b).value()[0] == doctest::Approx(0.0f));
  }

  TEST_CASE("all-equal similarities give ln n") {
    Tape tape;
    const SimilarityBatch b = constant_batch(tape, Tensor(4, 4));
    CHECK(g2p2::npair_loss(tape, b).value()[0] == doctest::Approx(std::log(4.0)).epsilon(1e-6));
  }

  TEST_CASE("a strongly diagonal matrix drives the loss to zero") {
    Tensor sim(5, 5);
    for (std::size_t i = 0; i < 5; ++i) sim.at(i, i) = 20.0f;
    Tape tape;
    const SimilarityBatch b = constant_batch(tape, sim);
    CHECK(g2p2::npair_loss(tape, b).value()[0] < 1e-6f);
  }

  TEST_CASE("random matrix matches the oracle") {
    g2p2::Rng rng(41);
    const Tensor sim = testutil::random_tensor(5, 5, rng, 3.0);
    Tape tape;
    const SimilarityBatch b = constant_batch(tape, sim);
    const double want = oracle::npair(oracle::from_tensor(sim));
    CHECK(std::fabs(g2p2::npair_loss(tape, b).value()[0] - want) < 1e-6);
  }

  TEST_CASE("loss is symmetric under transposition") {
    g2p2::Rng rng(43);
    const Tensor sim = testutil::random_tensor(6, 6, rng, 2.0);
    Tensor simT(6, 6);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) simT.at(j, i) = sim.at(i, j);
    Tape t1, t2;
    const float a = g2p2::npair_loss(t1, constant_batch(t1, sim)).value()[0];
    const float b = g2p2::npair_loss(t2, constant_batch(t2, simT)).value()[0];
    CHECK(a == b);
  }

  TEST_CASE("adding a per-row constant leaves the row term unchanged") {
    // Softmax shift invariance: add c to an entire row AND the matching
    // column so both directions see a constant shift.
    g2p2::Rng rng(47);
    const Tensor sim = testutil::random_tensor(4, 4, rng, 2.0);
    Tensor shifted = sim;
    for (std::size_t j = 0; j < 4; ++j) shifted.at(2, j) += 5.0f;  // row shift only
    Tape t1, t2;
    const float base = g2p2::npair_loss(t1, constant_batch(t1, sim)).value()[0];
    const float moved = g2p2::npair_loss(t2, constant_batch(t2, shifted)).value()[0];
    // The row-direction term for row 2 is invariant; the column-direction
    // term changes, so the losses must differ while staying finite.
    CHECK(std::isfinite(moved));
    CHECK(moved != base);

    // Shifting every entry of the matrix leaves both directions unchanged.
    Tensor all_shift = sim;
    for (std::size_t i = 0; i < all_shift.numel(); ++i) all_shift[i] += 3.0f;
    Tape t3;
    const float same = g2p2::npair_loss(t3, constant_batch(t3, all_shift)).value()[0];
    CHECK(same == doctest::Approx(base).epsilon(1e-5));
  }

  TEST_CASE("random unit embeddings score near ln n") {
    // With random directions in d=64, similarities are weak and the loss sits
    // near the uninformed baseline ln(32).
    const double baseline = std::log(32.0);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      g2p2::Rng rng(seed);
      const Tensor a = testutil::random_tensor(32, 64, rng);
      const Tensor b = testutil::random_tensor(32, 64, rng);
      Parameter tau("tau", Tensor::scalar(0.0f));
      Tape tape;
      const SimilarityBatch batch =
          g2p2::similarity_matrix(tape, tape.constant(a), tape.constant(b), tape.param(tau),
                                  SimilarityKind::kTextNode);
      const float loss = g2p2::npair_loss(tape, batch).value()[0];
      CHECK(loss == doctest::Approx(baseline).epsilon(0.15));
    }
  }

  TEST_CASE("non-square matrix is rejected") {
    Tape tape;
    SimilarityBatch b;
    b.matrix = tape.constant(Tensor(3, 4));
    b.targets = {0, 1, 2};
    CHECK_THROWS_AS(g2p2::npair_loss(tape, b), g2p2::Error);
  }
}

TEST_SUITE("total_loss") {
  static float combine(float l1, float l2, float l3, float lambda, const LossMask& mask = {}) {
    Tape tape;
    Var v1 = tape.constant(Tensor::scalar(l1));
    Var v2 = tape.constant(Tensor::scalar(l2));
    Var v3 = tape.constant(Tensor::scalar(l3));
    return g2p2::total_loss(tape, v1, v2, v3, lambda, mask).value()[0];
  }

  TEST_CASE("weighted combination") {
    CHECK(combine(1.0f, 2.0f, 3.0f, 0.1f) == doctest::Approx(1.5f));
    CHECK(combine(1.0f, 0.0f, 0.0f, 10.0f) == doctest::Approx(1.0f));
    CHECK(combine(0.0f, 1.0f, 1.0f, 0.25f) == doctest::Approx(0.5f));
  }

  TEST_CASE("masks drop terms") {
    const LossMask l1_only{true, false, false};
    const LossMask l2_only{false, true, false};
    const LossMask no_l3{true, true, false};
    CHECK(combine(1.0f, 2.0f, 3.0f, 0.1f, l1_only) == doctest::Approx(1.0f));
    CHECK(combine(1.0f, 2.0f, 3.0f, 0.1f, l2_only) == doctest::Approx(0.2f));
    CHECK(combine(1.0f, 2.0f, 3.0f, 0.1f, no_l3) == doctest::Approx(1.2f));
  }

  TEST_CASE("invalid lambda or empty mask is rejected") {
    Tape tape;
    Var v = tape.constant(Tensor::scalar(1.0f));
    CHECK_THROWS_AS(g2p2::total_loss(tape, v, v, v, 0.0f), g2p2::ValidationError);
    CHECK_THROWS_AS(g2p2::total_loss(tape, v, v, v, -1.0f), g2p2::ValidationError);
    CHECK_THROWS_AS(g2p2::total_loss(tape, v, v, v, 0.1f, LossMask{false, false, false}),
                    g2p2::ValidationError);
  }
}

TEST_SUITE("temperature") {
  TEST_CASE("initial value matches the standard setting") {
    CHECK(g2p2::temperature_init() == doctest::Approx(std::log(1.0f / 0.07f)));
  }

  TEST_CASE("clamp caps exp(tau) at one hundred") {
    Parameter tau("tau", Tensor::scalar(10.0f));
    g2p2::clamp_temperature(tau);
    CHECK(std::exp(tau.value[0]) <= 100.0f + 1e-3f);

    Parameter mild("tau", Tensor::scalar(1.0f));
    g2p2::clamp_temperature(mild);
    CHECK(mild.value[0] == doctest::Approx(1.0f));
  }
}

TEST_SUITE("loss mask") {
  TEST_CASE("parses subsets case-insensitively") {
    const LossMask a = LossMask::parse("L1");
    CHECK(a.l1);
    CHECK_FALSE(a.l2);
    CHECK_FALSE(a.l3);
    const LossMask b = LossMask::parse("l1,l3");
    CHECK(b.l1);
    CHECK_FALSE(b.l2);
    CHECK(b.l3);
    const LossMask c = LossMask::parse("L1,L2,L3");
    CHECK(c.l1);
    CHECK(c.l2);
    CHECK(c.l3);
  }

  TEST_CASE("unknown terms are rejected") {
    CHECK_THROWS_AS(LossMask::parse("L4"), g2p2::ValidationError);
    CHECK_THROWS_AS(LossMask::parse("l1,bogus"), g2p2::ValidationError);
  }

  TEST_CASE("str round-trips") {
    const LossMask m{true, false, true};
    const LossMask back = LossMask::parse(m.str());
    CHECK(back.l1 == m.l1);
    CHECK(back.l2 == m.l2);
    CHECK(back.l3 == m.l3);
  }
}
