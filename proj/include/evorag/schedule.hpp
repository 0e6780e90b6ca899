#pragma once

#include <array>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace evorag {

enum class Stage { Discovery, Refinement };

enum class ScheduleMode { NoReward, TwoStageFixed, TimeDynamic };

std::string_view to_string(Stage stage);
std::string_view to_string(ScheduleMode mode);
Stage parse_stage(std::string_view name);
ScheduleMode parse_schedule_mode(std::string_view name);

/// Per-component reward coefficients at one timestep.
///
/// Component order everywhere in the library is
/// (beta, lambda, gamma, delta, rho, eta, kappa), i.e. retrieval bonus,
/// retrieval action penalty, overlap penalty, backtrack penalty, refusal
/// reward, step cost, answer correctness.
struct WeightVector {
  double beta = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  double rho = 0.0;
  double eta = 0.0;
  double kappa = 0.0;

  static constexpr int kSize = 7;
  using Coefficients = Eigen::Matrix<double, kSize, 1>;

  Coefficients coefficients() const;
  static WeightVector from_coefficients(const Coefficients& c);

  double& operator[](int i);
  double operator[](int i) const;

  /// All components finite and non-negative.
  bool valid() const;

  friend bool operator==(const WeightVector&, const WeightVector&) = default;
};

inline constexpr std::array<std::string_view, WeightVector::kSize> kWeightNames = {
    "beta", "lambda", "gamma", "delta", "rho", "eta", "kappa"};

WeightVector operator+(const WeightVector& a, const WeightVector& b);
WeightVector operator*(double s, const WeightVector& w);

struct WeightAnchors {
  WeightVector start;
  WeightVector mid;
  WeightVector end;

  /// rho constant, beta/lambda non-increasing, the rest non-decreasing.
  bool follows_table_trends() const;
};

/// The start/mid/end anchors of the training schedule.
WeightAnchors default_anchors();

/// Alternative reading in which the lambda and gamma rows are exchanged, so
/// that lambda rises 0.1 -> 0.5 -> 1.2 over training.
WeightAnchors swapped_lambda_gamma_anchors();

/// Zeroes every weight whose component is not kept, at all three anchors.
WeightAnchors mask_components(const WeightAnchors& anchors,
                              const std::array<bool, WeightVector::kSize>& keep);

struct ScheduleConfig {
  int t_max = 20;
  WeightAnchors anchors = default_anchors();
  ScheduleMode mode = ScheduleMode::TimeDynamic;
};

/// t / t_max. Throws std::invalid_argument for t_max < 1 or t outside [0, t_max].
double progress(int t, int t_max);

/// (1 - p) * early + p * late, componentwise.
WeightVector interpolate(const WeightVector& early, const WeightVector& late, double p);

/// Weight vector for step t of an episode trained in `stage`.
WeightVector weights_at(const ScheduleConfig& cfg, Stage stage, int t);

}  // namespace evorag
