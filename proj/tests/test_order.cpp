#include "monolab/order.hpp"
#include "monolab/random.hpp"

#include <gtest/gtest.h>

using namespace monolab;

namespace {

StateVec random_state(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return StateVec(v);
}

}  // namespace

TEST(ConeOrder, StandardOrderPredicates) {
  const ConeOrder k = ConeOrder::standard(2);
  const StateVec x{0.0, 0.0}, y{1.0, 2.0};
  EXPECT_TRUE(cone_leq(x, y, k));
  EXPECT_TRUE(cone_lt(x, y, k));
  EXPECT_TRUE(cone_ll(x, y, k));
  EXPECT_FALSE(cone_leq(y, x, k));
}

TEST(ConeOrder, IncomparablePair) {
  const ConeOrder k = ConeOrder::standard(2);
  const StateVec x{1.0, 0.0}, y{0.0, 1.0};
  EXPECT_FALSE(cone_leq(x, y, k));
  EXPECT_FALSE(cone_leq(y, x, k));
}

TEST(ConeOrder, ReorientedOrthant) {
  const ConeOrder k({1, -1});
  EXPECT_TRUE(cone_leq(StateVec{0.0, 0.0}, StateVec{1.0, -2.0}, k));
  EXPECT_FALSE(cone_leq(StateVec{0.0, 0.0}, StateVec{1.0, 2.0}, k));
}

TEST(ConeOrder, StrictRequiresDifference) {
  const ConeOrder k = ConeOrder::standard(2);
  const StateVec x{0.5, 0.5};
  EXPECT_TRUE(cone_leq(x, x, k));
  EXPECT_FALSE(cone_lt(x, x, k));
  EXPECT_FALSE(cone_ll(x, x, k));
  // A partial increase is < but not <<.
  EXPECT_TRUE(cone_lt(x, StateVec{0.5, 0.6}, k));
  EXPECT_FALSE(cone_ll(x, StateVec{0.5, 0.6}, k));
  // << uses the margin eta.
  EXPECT_FALSE(cone_ll(x, StateVec{0.5 + 1e-12, 0.5 + 1e-12}, k));
}

TEST(ConeOrder, LayoutMismatchIsContractViolation) {
  const ConeOrder k = ConeOrder::standard(1);
  EXPECT_THROW(cone_leq(StateVec{0.0}, StateVec{0.0, 1.0}, k), ContractViolation);
}

TEST(ConeOrder, InvalidSpecifications) {
  EXPECT_THROW(ConeOrder({}), ContractViolation);
  EXPECT_THROW(ConeOrder({1, 0}), ContractViolation);
  EXPECT_THROW(ConeOrder({1}, 0.0), ContractViolation);
}

TEST(ConeOrder, SignsApplyPerSpeciesAcrossNodes) {
  const Layout layout{2, 3};
  const ConeOrder k({1, -1});
  StateVec x = StateVec::zeros(layout);
  StateVec y = StateVec::zeros(layout);
  for (std::size_t j = 0; j < 3; ++j) {
    y[layout.index(0, j)] = 1.0;
    y[layout.index(1, j)] = -1.0;
  }
  EXPECT_TRUE(cone_ll(x, y, k));
  y[layout.index(1, 2)] = 0.5;
  EXPECT_FALSE(cone_leq(x, y, k));
}

TEST(ConeOrder, PartialOrderAxiomsOnRandomTriples) {
  Rng rng(1);
  const ConeOrder k({1, -1, 1});
  for (int trial = 0; trial < 500; ++trial) {
    const StateVec x = random_state(rng, 3);
    const StateVec y = random_state(rng, 3);
    const StateVec z = random_state(rng, 3);
    EXPECT_TRUE(cone_leq(x, x, k));
    if (cone_leq(x, y, k) && cone_leq(y, x, k)) {
      EXPECT_TRUE(x == y);
    }
    if (cone_leq(x, y, k) && cone_leq(y, z, k)) {
      EXPECT_TRUE(cone_leq(x, z, k));
    }
    if (cone_ll(x, y, k)) {
      EXPECT_TRUE(cone_lt(x, y, k));
    }
    if (cone_lt(x, y, k)) {
      EXPECT_TRUE(cone_leq(x, y, k));
    }
  }
  // Constructed chains exercise the implications non-vacuously.
  for (int trial = 0; trial < 100; ++trial) {
    const StateVec x = random_state(rng, 3);
    const StateVec w = random_state(rng, 3, 0.1, 1.0);
    Eigen::VectorXd yv = x.values();
    for (int i = 0; i < 3; ++i) yv[i] += k.signs()[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
    const StateVec y(yv, x.layout());
    EXPECT_TRUE(cone_ll(x, y, k));
    EXPECT_TRUE(cone_lt(x, y, k));
    EXPECT_FALSE(cone_leq(y, x, k));
  }
}

TEST(Segment, EquispacedPoints) {
  const ConeOrder k = ConeOrder::standard(2);
  const auto pts = segment_points(Segment(StateVec{0.0, 0.0}, StateVec{1.0, 1.0}, k), 2);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_TRUE(pts[0] == (StateVec{0.0, 0.0}));
  EXPECT_TRUE(pts[1] == (StateVec{0.5, 0.5}));
  EXPECT_TRUE(pts[2] == (StateVec{1.0, 1.0}));
}

TEST(Segment, SinglePieceAndDiagonal) {
  const ConeOrder k = ConeOrder::standard(2);
  const auto one = segment_points(Segment(StateVec{2.0, 3.0}, StateVec{1.0, 0.5}, k), 1);
  ASSERT_EQ(one.size(), 2u);
  EXPECT_TRUE(one[0] == (StateVec{2.0, 3.0}));
  EXPECT_TRUE(one[1] == (StateVec{3.0, 3.5}));

  const auto pts = segment_points(Segment(StateVec{-3.0, -3.0}, StateVec{6.0, 6.0}, k), 3);
  ASSERT_EQ(pts.size(), 4u);
  const double expect[] = {-3.0, -1.0, 1.0, 3.0};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(pts[i][0], expect[i]);
    EXPECT_DOUBLE_EQ(pts[i][1], expect[i]);
  }
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_TRUE(cone_lt(pts[i - 1], pts[i], k));
}

TEST(Segment, DirectionMustBePositive) {
  const ConeOrder k = ConeOrder::standard(2);
  EXPECT_THROW(Segment(StateVec{0.0, 0.0}, StateVec{0.0, 0.0}, k), ContractViolation);
  EXPECT_THROW(Segment(StateVec{0.0, 0.0}, StateVec{1.0, -1.0}, k), ContractViolation);
  EXPECT_NO_THROW(Segment(StateVec{0.0, 0.0}, StateVec{1.0, -1.0}, ConeOrder({1, -1})));
  EXPECT_THROW(segment_points(Segment(StateVec{0.0}, StateVec{1.0}, ConeOrder::standard(1)), 0), ContractViolation);
}

TEST(PointwiseExtrema, Examples) {
  const ConeOrder k = ConeOrder::standard(2);
  const std::vector<StateVec> pair{StateVec{1.0, 0.0}, StateVec{0.0, 1.0}};
  EXPECT_TRUE(pointwise_inf(pair, k) == (StateVec{0.0, 0.0}));
  EXPECT_TRUE(pointwise_sup(pair, k) == (StateVec{1.0, 1.0}));

  const std::vector<StateVec> single{StateVec{0.3, -0.7}};
  EXPECT_TRUE(pointwise_inf(single, k) == single[0]);
  EXPECT_TRUE(pointwise_sup(single, k) == single[0]);

  const std::vector<StateVec> three{StateVec{1.0, 2.0}, StateVec{3.0, 0.0}, StateVec{2.0, 2.0}};
  EXPECT_TRUE(pointwise_inf(three, k) == (StateVec{1.0, 0.0}));
  EXPECT_THROW(pointwise_inf({}, k), ContractViolation);
}

TEST(PointwiseExtrema, GreatestLowerBoundOnRandomSamples) {
  Rng rng(7);
  const ConeOrder k({1, -1});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<StateVec> set;
    for (int i = 0; i < 5; ++i) set.push_back(random_state(rng, 2));
    const StateVec inf = pointwise_inf(set, k);
    const StateVec sup = pointwise_sup(set, k);
    for (const StateVec& s : set) {
      EXPECT_TRUE(cone_leq(inf, s, k));
      EXPECT_TRUE(cone_leq(s, sup, k));
    }
    // Any other lower bound from a random sample lies below inf.
    for (int i = 0; i < 50; ++i) {
      const StateVec c = random_state(rng, 2, -1.5, 1.0);
      const bool lower = std::all_of(set.begin(), set.end(), [&](const StateVec& s) { return cone_leq(c, s, k); });
      if (lower) {
        EXPECT_TRUE(cone_leq(c, inf, k));
      }
    }
  }
}

TEST(StateVec, InvariantsAndAccessors) {
  EXPECT_THROW(StateVec(Eigen::VectorXd::Zero(3), Layout{2, 2}), ContractViolation);
  EXPECT_FALSE(StateVec({std::nan("")}).all_finite());
  const Layout layout{2, 3};
  StateVec u = StateVec::constant(layout, 2.0);
  u[layout.index(1, 2)] = -5.0;
  EXPECT_EQ(u.at(1, 2), -5.0);
  EXPECT_EQ(u.sup_norm(), 5.0);
  EXPECT_EQ(sup_distance(u, StateVec::constant(layout, 2.0)), 7.0);
}

TEST(Rng, SubstreamsAreReproducibleAndDistinct) {
  Rng a = Rng::substream(42, 3), b = Rng::substream(42, 3), c = Rng::substream(42, 4);
  const double xa = a.uniform(), xb = b.uniform(), xc = c.uniform();
  EXPECT_EQ(xa, xb);
  EXPECT_NE(xa, xc);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform(-2.0, 3.0);
    EXPECT_GE(u, -2.0);
    EXPECT_LT(u, 3.0);
  }
}
