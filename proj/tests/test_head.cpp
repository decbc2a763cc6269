#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "dumn/grad_check.hpp"
#include "dumn/head.hpp"

using namespace dumn;

namespace {

Matrix random_matrix(std::mt19937_64& gen, std::size_t r, std::size_t c) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.values()) v = u(gen);
  return m;
}

double sigmoid_of(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(Fusion, ZeroGateWeightsHalveBothInputs) {
  ParamStore store;
  Rng rng(1);
  const auto f = Fusion::create(store, rng, "f", FusionMode::gate, 3, 2, 4);
  store[f.short_gate].value = Matrix(3, 3);
  store[f.long_gate].value = Matrix(3, 3);
  store[f.convert].value = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}});
  Tape t(&store);
  const Matrix u = f.forward(t, t.constant(Matrix::from_rows({{2, -4, 6}})), t.constant(Matrix::from_rows({{8, 10}})),
                             t.constant(Matrix(1, 4)))
                       .value();
  EXPECT_EQ(u, Matrix::from_rows({{1, -2, 3, 4, 5, 0}}));
}

TEST(Fusion, ZeroReadGivesZeroLongTermHalf) {
  ParamStore store;
  Rng rng(2);
  const auto f = Fusion::create(store, rng, "f", FusionMode::gate, 4, 3, 4);
  Tape t(&store);
  std::mt19937_64 gen(2);
  const Matrix u =
      f.forward(t, t.constant(random_matrix(gen, 1, 4)), t.constant(Matrix(1, 3)), t.constant(Matrix(1, 4))).value();
  for (std::size_t j = 4; j < 8; ++j) EXPECT_EQ(u[j], 0.0);
}

TEST(Fusion, GateModeMatchesStraightLineOracle) {
  std::mt19937_64 gen(3);
  ParamStore store;
  Rng rng(3);
  const std::size_t E = 4, Z = 3;
  const auto f = Fusion::create(store, rng, "f", FusionMode::gate, E, Z, 8);
  const Matrix fo = random_matrix(gen, 1, E);
  const Matrix r = random_matrix(gen, 1, Z);
  Tape t(&store);
  const Matrix u = f.forward(t, t.constant(fo), t.constant(r), t.constant(Matrix(1, 8))).value();
  const Matrix& conv = store[f.convert].value;
  const Matrix& w1 = store[f.short_gate].value;
  const Matrix& w2 = store[f.long_gate].value;
  std::vector<double> rc(E, 0.0);
  for (std::size_t j = 0; j < E; ++j)
    for (std::size_t i = 0; i < Z; ++i) rc[j] += r[i] * conv(i, j);
  for (std::size_t j = 0; j < E; ++j) {
    double gs = 0.0, gl = 0.0;
    for (std::size_t i = 0; i < E; ++i) {
      gs += fo[i] * w1(i, j);
      gl += rc[i] * w2(i, j);
    }
    EXPECT_NEAR(u[j], fo[j] * sigmoid_of(gs), 1e-14);
    EXPECT_NEAR(u[E + j], rc[j] * sigmoid_of(gl), 1e-14);
  }
}

TEST(Fusion, GatesStayStrictlyInsideUnitInterval) {
  std::mt19937_64 gen(4);
  ParamStore store;
  Rng rng(4);
  const auto f = Fusion::create(store, rng, "f", FusionMode::gate, 5, 5, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix fo = random_matrix(gen, 1, 5);
    Tape t(&store);
    const Matrix u = f.forward(t, t.constant(fo), t.constant(random_matrix(gen, 1, 5)), t.constant(Matrix(1, 5))).value();
    for (std::size_t j = 0; j < 5; ++j) {
      if (fo[j] == 0.0) continue;
      const double gate = u[j] / fo[j];
      EXPECT_GT(gate, 0.0);
      EXPECT_LT(gate, 1.0);
    }
  }
}

TEST(Fusion, ConcatEqualsGateWithUnitGates) {
  std::mt19937_64 gen(5);
  ParamStore gate_store, concat_store;
  Rng a(5), b(5);
  const auto g = Fusion::create(gate_store, a, "f", FusionMode::gate, 4, 3, 6);
  const auto c = Fusion::create(concat_store, b, "f", FusionMode::concat, 4, 3, 6);
  concat_store[c.convert].value = gate_store[g.convert].value;
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix fo = random_matrix(gen, 1, 4), r = random_matrix(gen, 1, 3), item = random_matrix(gen, 1, 6);
    Tape tg(&gate_store), tc(&concat_store);
    EXPECT_EQ(g.forward(tg, tg.constant(fo), tg.constant(r), tg.constant(item), true).value(),
              c.forward(tc, tc.constant(fo), tc.constant(r), tc.constant(item)).value());
  }
}

TEST(Fusion, AlternativeModesHaveDocumentedShapes) {
  ParamStore store;
  Rng rng(6);
  const Matrix fo = Matrix::from_rows({{1, 2}});
  const Matrix r = Matrix::from_rows({{3, 4}});
  for (FusionMode mode : {FusionMode::concat, FusionMode::cross, FusionMode::ffn, FusionMode::attention}) {
    const auto f = Fusion::create(store, rng, "f" + std::string(to_string(mode)), mode, 2, 2, 2);
    store[f.convert].value = Matrix::from_rows({{1, 0}, {0, 1}});
    Tape t(&store);
    const Matrix u = f.forward(t, t.constant(fo), t.constant(r), t.constant(Matrix::from_rows({{1, 1}}))).value();
    EXPECT_EQ(u.cols(), f.width());
    if (mode == FusionMode::cross) EXPECT_EQ(u, Matrix::from_rows({{4, 6, -2, -2, 3, 8}}));
    if (mode == FusionMode::attention) {
      // convex combination of (1,2) and (3,4): both coordinates move together
      EXPECT_NEAR(u[1] - u[0], 1.0, 1e-14);
      EXPECT_GE(u[0], 1.0);
      EXPECT_LE(u[0], 3.0);
    }
  }
}

TEST(Fusion, EveryModePassesFiniteDifferences) {
  std::mt19937_64 gen(7);
  for (FusionMode mode : {FusionMode::gate, FusionMode::concat, FusionMode::cross, FusionMode::ffn, FusionMode::attention}) {
    ParamStore store;
    Rng rng(7);
    const auto f = Fusion::create(store, rng, "f", mode, 3, 2, 4);
    for (Parameter& p : store.all()) p.value = random_matrix(gen, p.value.rows(), p.value.cols());
    const ParamId fo = store.add("fo", random_matrix(gen, 1, 3));
    const ParamId r = store.add("r", random_matrix(gen, 1, 2));
    const ParamId item = store.add("item", random_matrix(gen, 1, 4));
    const Matrix weights = random_matrix(gen, f.width(), 1);
    const auto report = grad_check(store, [&](Tape& t) {
      return matmul(f.forward(t, t.param(fo), t.param(r), t.param(item)), t.constant(weights));
    });
    EXPECT_TRUE(report.passed) << to_string(mode) << ": " << report.summary(store);
  }
}

TEST(CrossRepresentation, ConcatenatesInOrder) {
  ParamStore store;
  Tape t(&store);
  const std::vector<Var> parts{t.constant(Matrix::from_rows({{1, 2}})), t.constant(Matrix::from_rows({{3}})),
                               t.constant(Matrix::from_rows({{4, 5}}))};
  EXPECT_EQ(cross_representation(parts).value(), Matrix::from_rows({{1, 2, 3, 4, 5}}));
}

TEST(Predict, ZeroHeadGivesOneHalf) {
  ParamStore store;
  Rng rng(8);
  const std::vector<int> hidden{4, 3};
  const auto h = PredictionHead::create(store, rng, "h", 5, hidden);
  for (Parameter& p : store.all()) p.value = Matrix(p.value.rows(), p.value.cols());
  Tape t(&store);
  EXPECT_EQ(h.forward(t, t.constant(Matrix(1, 5, 1.0))).scalar(), 0.5);
}

TEST(Predict, LargeOutputBiasSaturates) {
  ParamStore store;
  Rng rng(9);
  const std::vector<int> hidden{4};
  const auto h = PredictionHead::create(store, rng, "h", 3, hidden);
  store[h.output_bias()].value = Matrix(1, 1, 40.0);
  Tape t(&store);
  EXPECT_NEAR(h.forward(t, t.constant(Matrix(1, 3, 0.1))).scalar(), 1.0, 1e-12);
}

TEST(Predict, MatchesStraightLineOracle) {
  std::mt19937_64 gen(10);
  ParamStore store;
  Rng rng(10);
  const std::vector<int> hidden{3};
  const auto h = PredictionHead::create(store, rng, "h", 2, hidden);
  store[h.biases[0]].value = random_matrix(gen, 1, 3);
  store[h.biases[1]].value = random_matrix(gen, 1, 1);
  const Matrix x = random_matrix(gen, 1, 2);
  const Matrix& w0 = store[h.weights[0]].value;
  const Matrix& b0 = store[h.biases[0]].value;
  const Matrix& w1 = store[h.weights[1]].value;
  const Matrix& b1 = store[h.biases[1]].value;
  double z = b1[0];
  for (std::size_t j = 0; j < 3; ++j) z += std::max(0.0, x[0] * w0(0, j) + x[1] * w0(1, j) + b0[j]) * w1(j, 0);
  Tape t(&store);
  EXPECT_NEAR(h.forward(t, t.constant(x)).scalar(), sigmoid_of(z), 1e-15);
}

TEST(Predict, MonotoneInOutputBias) {
  std::mt19937_64 gen(11);
  ParamStore store;
  Rng rng(11);
  const std::vector<int> hidden{6, 4};
  const auto h = PredictionHead::create(store, rng, "h", 5, hidden);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix x = random_matrix(gen, 1, 5);
    double previous = -1.0;
    for (double b = -20.0; b <= 20.0; b += 0.5) {
      store[h.output_bias()].value = Matrix(1, 1, b);
      Tape t(&store);
      const double y = h.forward(t, t.constant(x)).scalar();
      EXPECT_GE(y, previous);
      previous = y;
    }
  }
}

TEST(Logloss, OneHalfGivesLogTwo) {
  ParamStore store;
  Tape t(&store);
  const std::vector<Var> p{t.constant(Matrix(1, 1, 0.5)), t.constant(Matrix(1, 1, 0.5))};
  const std::vector<int> y{1, 0};
  EXPECT_NEAR(logloss(p, y, 1e-7).scalar(), std::log(2.0), 1e-15);
  const std::vector<double> plain{0.5, 0.5};
  EXPECT_NEAR(logloss(plain, y, 1e-7), std::log(2.0), 1e-15);
}

TEST(Logloss, ClampKeepsConfidentMistakesFinite) {
  const std::vector<double> p{0.0, 1.0};
  const std::vector<int> y{1, 0};
  const double loss = logloss(p, y, 1e-7);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, -std::log(1e-7), 1e-6);

  ParamStore store;
  const ParamId q = store.add("q", Matrix(1, 1, 0.0));
  Tape t(&store);
  Var l = binary_cross_entropy(t.param(q), 1, 1e-7);
  GradBuffer g(store);
  t.backward(l, g);
  EXPECT_TRUE(std::isfinite(l.scalar()));
  EXPECT_TRUE(std::isfinite(g.at(q.index).values()[0]));
}

TEST(Logloss, EmptyBatchIsRejected) {
  EXPECT_THROW(logloss(std::span<const double>{}, std::span<const int>{}, 1e-7), std::invalid_argument);
  EXPECT_THROW(logloss(std::span<const Var>{}, std::span<const int>{}, 1e-7), std::invalid_argument);
}

TEST(Triplet, HandExamples) {
  // d = 1 - cos; pick vectors with the requested distances
  const std::vector<double> q{1, 0};
  EXPECT_EQ(triplet(q, std::vector<double>{1, 0}, std::vector<double>{0, 1}, 0.2), 0.0);
  const double c_pos = 0.5, c_neg = 0.6;  // d_pos = 0.5, d_neg = 0.4
  const std::vector<double> pos{c_pos, std::sqrt(1 - c_pos * c_pos)};
  const std::vector<double> neg{c_neg, std::sqrt(1 - c_neg * c_neg)};
  EXPECT_NEAR(triplet(q, pos, neg, 0.2), 0.3, 1e-15);
  EXPECT_NEAR(triplet(q, pos, pos, 0.25), 0.25, 1e-15);

  ParamStore store;
  Tape t(&store);
  EXPECT_NEAR(
      triplet(t.constant(Matrix(1, 2, q)), t.constant(Matrix(1, 2, pos)), t.constant(Matrix(1, 2, neg)), 0.2).scalar(),
      0.3, 1e-15);
}

TEST(Triplet, NonnegativeAndZeroWhenSatisfied) {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> margin(0.0, 1.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const Matrix q = random_matrix(gen, 1, 4), p = random_matrix(gen, 1, 4), n = random_matrix(gen, 1, 4);
    const double m = margin(gen);
    const double l = triplet(q.values(), p.values(), n.values(), m);
    EXPECT_GE(l, 0.0);
    if (triplet_distance(q.values(), p.values()) + m <= triplet_distance(q.values(), n.values())) EXPECT_EQ(l, 0.0);
  }
}

TEST(TotalLoss, SumsTripletTermsUnlessDisabled) {
  const std::vector<double> terms{0.1, 0.1, 0.1, 0.1};
  EXPECT_NEAR(total_loss(0.5, terms, true), 0.9, 1e-15);
  EXPECT_EQ(total_loss(0.5, terms, false), 0.5);
  const std::vector<double> zeros(4, 0.0);
  EXPECT_EQ(total_loss(0.5, zeros, true), 0.5);

  ParamStore store;
  Tape t(&store);
  std::vector<Var> vars;
  for (double v : terms) vars.push_back(t.constant(Matrix(1, 1, v)));
  EXPECT_NEAR(total_loss(t.constant(Matrix(1, 1, 0.5)), vars, true).scalar(), 0.9, 1e-15);
  EXPECT_EQ(total_loss(t.constant(Matrix(1, 1, 0.5)), vars, false).scalar(), 0.5);
}

TEST(Mining, HardestMatchesExhaustiveSearch) {
  std::mt19937_64 gen(13);
  Rng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const Matrix q = random_matrix(gen, 1, 3);
    const Matrix pos = random_matrix(gen, 4, 3), neg = random_matrix(gen, 4, 3);
    const auto c = mine_triplet(q.values(), pos, neg, TripletMode::hardest, rng);
    ASSERT_TRUE(c.has_value());
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_GE(triplet_distance(q.values(), pos.row(c->positive)), triplet_distance(q.values(), pos.row(i)));
      EXPECT_LE(triplet_distance(q.values(), neg.row(c->negative)), triplet_distance(q.values(), neg.row(i)));
    }
  }
}

TEST(Mining, HandExampleAndLowestIndexTies) {
  Rng rng(14);
  const std::vector<double> q{1, 0};
  const Matrix pos = Matrix::from_rows({{1, 0}, {0, 1}, {-1, 0}, {-2, 0}});  // d = 0, 1, 2, 2
  const Matrix neg = Matrix::from_rows({{0, 1}, {3, 0}, {1, 1}, {5, 0}});    // d = 1, 0, 0.29, 0
  const auto c = mine_triplet(q, pos, neg, TripletMode::hardest, rng);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->positive, 2u);
  EXPECT_EQ(c->negative, 1u);
}

TEST(Mining, EmptyPoolOrOffModeGivesNoTriplet) {
  Rng rng(15);
  const std::vector<double> q{1, 0};
  const Matrix one = Matrix::from_rows({{1, 0}});
  EXPECT_FALSE(mine_triplet(q, Matrix(0, 2), one, TripletMode::hardest, rng));
  EXPECT_FALSE(mine_triplet(q, one, Matrix(0, 2), TripletMode::random, rng));
  EXPECT_FALSE(mine_triplet(q, one, one, TripletMode::off, rng));
  const auto single = mine_triplet(q, one, one, TripletMode::hardest, rng);
  ASSERT_TRUE(single.has_value());
  EXPECT_EQ(single->positive, 0u);
  EXPECT_EQ(single->negative, 0u);
}

TEST(Mining, RandomModeCoversEveryCandidate) {
  Rng rng(16);
  const std::vector<double> q{1, 0};
  const Matrix pos(5, 2, 1.0), neg(3, 2, 1.0);
  std::vector<int> seen_pos(5, 0), seen_neg(3, 0);
  for (int i = 0; i < 2000; ++i) {
    const auto c = mine_triplet(q, pos, neg, TripletMode::random, rng);
    ++seen_pos[c->positive];
    ++seen_neg[c->negative];
  }
  for (int n : seen_pos) EXPECT_GT(n, 300);
  for (int n : seen_neg) EXPECT_GT(n, 550);
}
