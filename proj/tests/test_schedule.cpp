// Ramp-up and learning-rate schedules: frozen values, monotonicity, and
// the two-phase curriculum contract.

#include <gtest/gtest.h>

#include <cmath>

#include "lcmt/schedule.hpp"

using lcmt::Curriculum;
using lcmt::LrPlan;
using lcmt::RampUp;

TEST(SigmoidRampup, FrozenValues) {
  EXPECT_DOUBLE_EQ(lcmt::sigmoid_rampup(0.0), std::exp(-5.0));
  EXPECT_DOUBLE_EQ(lcmt::sigmoid_rampup(0.0), 0.006737946999085467);
  EXPECT_DOUBLE_EQ(lcmt::sigmoid_rampup(1.0), 1.0);
  EXPECT_DOUBLE_EQ(lcmt::sigmoid_rampup(0.5), std::exp(-1.25));
  EXPECT_DOUBLE_EQ(lcmt::sigmoid_rampup(-3.0), lcmt::sigmoid_rampup(0.0));  // clamped below
  EXPECT_DOUBLE_EQ(lcmt::sigmoid_rampup(2.0), 1.0);                         // clamped above
}

TEST(SigmoidRampup, StrictlyIncreasingInside) {
  double prev = lcmt::sigmoid_rampup(0.0);
  for (int i = 1; i <= 100; ++i) {
    const double cur = lcmt::sigmoid_rampup(i / 100.0);
    EXPECT_GT(cur, prev) << "at x=" << i / 100.0;
    prev = cur;
  }
}

TEST(RampUp, CoefficientFrozenCases) {
  const RampUp r{/*start=*/0.0, /*length=*/80.0, /*max=*/20.0};
  EXPECT_DOUBLE_EQ(lcmt::coefficient_at(40.0, r), 20.0 * std::exp(-1.25));
  EXPECT_DOUBLE_EQ(lcmt::coefficient_at(40.0, r), 5.730095937203801);
  EXPECT_DOUBLE_EQ(lcmt::coefficient_at(80.0, r), 20.0);
  EXPECT_DOUBLE_EQ(lcmt::coefficient_at(200.0, r), 20.0);  // saturates at max
}

TEST(RampUp, ZeroStrictlyBeforeStartEpoch) {
  const RampUp r{200.0, 50.0, 5.0};
  EXPECT_DOUBLE_EQ(lcmt::coefficient_at(0.0, r), 0.0);
  EXPECT_DOUBLE_EQ(lcmt::coefficient_at(199.999, r), 0.0);
  // At the start epoch the sigmoid tail is already live (tiny but nonzero).
  EXPECT_DOUBLE_EQ(lcmt::coefficient_at(200.0, r), 5.0 * std::exp(-5.0));
  EXPECT_DOUBLE_EQ(lcmt::coefficient_at(225.0, r), 5.0 * std::exp(-1.25));
  EXPECT_DOUBLE_EQ(lcmt::coefficient_at(250.0, r), 5.0);
}

TEST(RampUp, MaxValueZeroIsAlwaysZero) {
  const RampUp r{0.0, 80.0, 0.0};
  EXPECT_DOUBLE_EQ(lcmt::coefficient_at(0.0, r), 0.0);
  EXPECT_DOUBLE_EQ(lcmt::coefficient_at(40.0, r), 0.0);
  EXPECT_DOUBLE_EQ(lcmt::coefficient_at(1000.0, r), 0.0);
}

TEST(RampUp, FractionalEpochGranularity) {
  const RampUp r{0.0, 10.0, 1.0};
  const double mid_iter = lcmt::coefficient_at(3.5, r);
  EXPECT_GT(mid_iter, lcmt::coefficient_at(3.0, r));
  EXPECT_LT(mid_iter, lcmt::coefficient_at(4.0, r));
  EXPECT_DOUBLE_EQ(mid_iter, lcmt::sigmoid_rampup(0.35));
}

TEST(RampUp, ValidationRejectsBadSettings) {
  EXPECT_NO_THROW((RampUp{0.0, 1.0, 0.0}).validate());
  EXPECT_THROW((RampUp{-1.0, 10.0, 1.0}).validate(), std::invalid_argument);
  EXPECT_THROW((RampUp{0.0, 0.0, 1.0}).validate(), std::invalid_argument);
  EXPECT_THROW((RampUp{0.0, 10.0, -1.0}).validate(), std::invalid_argument);
}

TEST(LrPlan, LinearDecayFrozenCases) {
  const LrPlan p{/*base_lr=*/0.05, /*decay_start=*/100.0, /*decay_length=*/100.0};
  EXPECT_DOUBLE_EQ(lcmt::lr_at(0.0, p), 0.05);
  EXPECT_DOUBLE_EQ(lcmt::lr_at(99.999, p), 0.05);
  EXPECT_DOUBLE_EQ(lcmt::lr_at(150.0, p), 0.025);  // midpoint
  EXPECT_DOUBLE_EQ(lcmt::lr_at(200.0, p), 0.0);    // exactly zero at the end
  EXPECT_DOUBLE_EQ(lcmt::lr_at(500.0, p), 0.0);
}

TEST(LrPlan, ValidationRejectsBadSettings) {
  EXPECT_NO_THROW((LrPlan{0.05, 0.0, 1.0}).validate());
  EXPECT_THROW((LrPlan{0.0, 0.0, 1.0}).validate(), std::invalid_argument);
  EXPECT_THROW((LrPlan{0.05, -1.0, 1.0}).validate(), std::invalid_argument);
  EXPECT_THROW((LrPlan{0.05, 0.0, 0.5}).validate(), std::invalid_argument);
}

TEST(Curriculum, PhaseSwitchContract) {
  Curriculum c;
  c.mt_only_epochs = 200.0;
  c.cons_rampup = RampUp{0.0, 80.0, 1.0};
  c.lc_rampup = RampUp{200.0, 50.0, 5.0};
  c.lr = LrPlan{0.05, 300.0, 100.0};
  c.total_epochs = 400;
  EXPECT_NO_THROW(c.validate());

  // Warm-up phase: only the consistency weight is live; afterwards the
  // clustering weight ramps in.
  const auto before = lcmt::active_losses(100.0, c);
  EXPECT_GT(before.lambda1, 0.0);
  EXPECT_DOUBLE_EQ(before.lambda2, 0.0);
  const auto after = lcmt::active_losses(225.0, c);
  EXPECT_DOUBLE_EQ(after.lambda1, 1.0);  // consistency long since saturated
  EXPECT_DOUBLE_EQ(after.lambda2, 5.0 * std::exp(-1.25));

  c.lc_rampup.start_epoch = 150.0;  // misaligned with the warm-up length
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Curriculum, RejectsNegativeSettings) {
  Curriculum c;
  c.mt_only_epochs = -1.0;
  c.cons_rampup = RampUp{0.0, 80.0, 1.0};
  c.lc_rampup = RampUp{0.0, 50.0, 5.0};
  c.lr = LrPlan{0.05, 0.0, 1.0};
  c.total_epochs = 10;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.mt_only_epochs = 0.0;
  c.total_epochs = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.total_epochs = 10;
  EXPECT_NO_THROW(c.validate());
}
