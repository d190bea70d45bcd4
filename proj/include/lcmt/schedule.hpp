#pragma once
// Loss-coefficient ramps, the learning-rate plan, and the two-phase
// curriculum that switches the regularizer on after a warm-up phase.

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lcmt {

// exp(-5 (1 - x)^2) with x clamped to [0, 1]: 0 -> e^-5, 1 -> 1.
inline double sigmoid_rampup(double x) {
  x = std::clamp(x, 0.0, 1.0);
  const double d = 1.0 - x;
  return std::exp(-5.0 * d * d);
}

struct RampUp {
  double start_epoch = 0.0;
  double length_epochs = 1.0;
  double max_value = 0.0;

  void validate() const {
    if (start_epoch < 0.0) throw std::invalid_argument("rampup: start_epoch must be >= 0");
    if (length_epochs < 1.0) throw std::invalid_argument("rampup: length_epochs must be >= 1");
    if (max_value < 0.0) throw std::invalid_argument("rampup: max_value must be >= 0");
  }
};

// 0 strictly before the start epoch, then max_value * sigmoid_rampup of the
// normalized position; epoch may be fractional for per-iteration granularity.
inline double coefficient_at(double epoch, const RampUp& r) {
  if (r.max_value == 0.0 || epoch < r.start_epoch) return 0.0;
  return r.max_value * sigmoid_rampup((epoch - r.start_epoch) / r.length_epochs);
}

struct LrPlan {
  double base_lr = 0.05;
  double decay_start_epoch = 0.0;
  double decay_length_epochs = 1.0;

  void validate() const {
    if (base_lr <= 0.0) throw std::invalid_argument("lr plan: base_lr must be > 0");
    if (decay_start_epoch < 0.0) throw std::invalid_argument("lr plan: decay_start_epoch must be >= 0");
    if (decay_length_epochs < 1.0) throw std::invalid_argument("lr plan: decay_length_epochs must be >= 1");
  }
};

// Constant at base_lr, then linear decay reaching exactly 0 at the end.
inline double lr_at(double epoch, const LrPlan& p) {
  if (epoch < p.decay_start_epoch) return p.base_lr;
  const double t = (epoch - p.decay_start_epoch) / p.decay_length_epochs;
  return t >= 1.0 ? 0.0 : p.base_lr * (1.0 - t);
}

struct Curriculum {
  double mt_only_epochs = 0.0;  // epochs trained with the consistency pair only
  RampUp cons_rampup;           // consistency weight, ramping from epoch 0
  RampUp lc_rampup;             // clustering weight, ramping from mt_only_epochs
  LrPlan lr;
  int total_epochs = 1;

  void validate() const {
    cons_rampup.validate();
    lc_rampup.validate();
    lr.validate();
    if (total_epochs < 1) throw std::invalid_argument("curriculum: total_epochs must be >= 1");
    if (mt_only_epochs < 0.0) throw std::invalid_argument("curriculum: mt_only_epochs must be >= 0");
    if (lc_rampup.start_epoch != mt_only_epochs)
      throw std::invalid_argument("curriculum: clustering ramp must start when the warm-up phase ends");
  }
};

struct LossCoefficients {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

inline LossCoefficients active_losses(double epoch, const Curriculum& c) {
  return {coefficient_at(epoch, c.cons_rampup), coefficient_at(epoch, c.lc_rampup)};
}

}  // namespace lcmt
