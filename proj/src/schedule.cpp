#include "evorag/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace evorag {

std::string_view to_string(Stage stage) {
  return stage == Stage::Discovery ? "discovery" : "refinement";
}

std::string_view to_string(ScheduleMode mode) {
  switch (mode) {
    case ScheduleMode::NoReward:
      return "no_reward";
    case ScheduleMode::TwoStageFixed:
      return "two_stage";
    case ScheduleMode::TimeDynamic:
      return "time_dynamic";
  }
  return "unknown";
}

Stage parse_stage(std::string_view name) {
  if (name == "discovery") return Stage::Discovery;
  if (name == "refinement") return Stage::Refinement;
  throw std::invalid_argument("unknown stage '" + std::string(name) + "'");
}

ScheduleMode parse_schedule_mode(std::string_view name) {
  if (name == "no_reward") return ScheduleMode::NoReward;
  if (name == "two_stage") return ScheduleMode::TwoStageFixed;
  if (name == "time_dynamic") return ScheduleMode::TimeDynamic;
  throw std::invalid_argument("unknown schedule mode '" + std::string(name) + "'");
}

WeightVector::Coefficients WeightVector::coefficients() const {
  Coefficients c;
  c << beta, lambda, gamma, delta, rho, eta, kappa;
  return c;
}

WeightVector WeightVector::from_coefficients(const Coefficients& c) {
  return {c(0), c(1), c(2), c(3), c(4), c(5), c(6)};
}

double& WeightVector::operator[](int i) {
  switch (i) {
    case 0: return beta;
    case 1: return lambda;
    case 2: return gamma;
    case 3: return delta;
    case 4: return rho;
    case 5: return eta;
    case 6: return kappa;
  }
  throw std::out_of_range("weight index");
}

double WeightVector::operator[](int i) const {
  return const_cast<WeightVector&>(*this)[i];
}

bool WeightVector::valid() const {
  for (int i = 0; i < kSize; ++i) {
    const double v = (*this)[i];
    if (!std::isfinite(v) || v < 0.0) return false;
  }
  return true;
}

WeightVector operator+(const WeightVector& a, const WeightVector& b) {
  return WeightVector::from_coefficients(a.coefficients() + b.coefficients());
}

WeightVector operator*(double s, const WeightVector& w) {
  return WeightVector::from_coefficients(s * w.coefficients());
}

bool WeightAnchors::follows_table_trends() const {
  if (start.rho != mid.rho || mid.rho != end.rho) return false;
  auto non_increasing = [](double a, double b, double c) { return a >= b && b >= c; };
  auto non_decreasing = [](double a, double b, double c) { return a <= b && b <= c; };
  return non_increasing(start.beta, mid.beta, end.beta) &&
         non_increasing(start.lambda, mid.lambda, end.lambda) &&
         non_decreasing(start.gamma, mid.gamma, end.gamma) &&
         non_decreasing(start.delta, mid.delta, end.delta) &&
         non_decreasing(start.eta, mid.eta, end.eta) &&
         non_decreasing(start.kappa, mid.kappa, end.kappa);
}

WeightAnchors default_anchors() {
  WeightAnchors a;
  //          beta lambda gamma delta rho  eta   kappa
  a.start = {2.0, 1.5, 0.1, 0.3, 0.5, 0.02, 0.05};
  a.mid = {1.0, 0.8, 0.5, 0.5, 0.5, 0.05, 0.10};
  a.end = {0.5, 0.4, 1.2, 1.0, 0.5, 0.10, 1.00};
  return a;
}

WeightAnchors swapped_lambda_gamma_anchors() {
  WeightAnchors a = default_anchors();
  for (WeightVector* w : {&a.start, &a.mid, &a.end}) std::swap(w->lambda, w->gamma);
  return a;
}

WeightAnchors mask_components(const WeightAnchors& anchors,
                              const std::array<bool, WeightVector::kSize>& keep) {
  WeightAnchors out = anchors;
  for (WeightVector* w : {&out.start, &out.mid, &out.end}) {
    for (int i = 0; i < WeightVector::kSize; ++i) {
      if (!keep[static_cast<std::size_t>(i)]) (*w)[i] = 0.0;
    }
  }
  return out;
}

double progress(int t, int t_max) {
  if (t_max < 1) throw std::invalid_argument("t_max must be >= 1");
  if (t < 0 || t > t_max) {
    throw std::invalid_argument("step " + std::to_string(t) + " outside [0, " +
                                std::to_string(t_max) + "]");
  }
  return static_cast<double>(t) / static_cast<double>(t_max);
}

WeightVector interpolate(const WeightVector& early, const WeightVector& late, double p) {
  return WeightVector::from_coefficients((1.0 - p) * early.coefficients() +
                                         p * late.coefficients());
}

WeightVector weights_at(const ScheduleConfig& cfg, Stage stage, int t) {
  const double p = progress(t, cfg.t_max);
  const WeightAnchors& a = cfg.anchors;
  switch (cfg.mode) {
    case ScheduleMode::NoReward: {
      WeightVector w;
      w.kappa = 1.0;
      return w;
    }
    case ScheduleMode::TwoStageFixed:
      return stage == Stage::Discovery ? a.start : a.end;
    case ScheduleMode::TimeDynamic:
      return stage == Stage::Discovery ? interpolate(a.start, a.mid, p)
                                       : interpolate(a.mid, a.end, p);
  }
  throw std::logic_error("unhandled schedule mode");
}

}  // namespace evorag
