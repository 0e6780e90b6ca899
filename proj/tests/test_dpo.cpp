#include <doctest.h>

#include <limits>

#include <cmath>
#include <stdexcept>

#include "evorag/dpo.hpp"
#include "oracles.hpp"

using namespace evorag;

namespace {

DpoExample random_example(Rng& rng) {
  const int rows = 2 + static_cast<int>(rng.below(5));
  DpoExample d;
  d.features = Eigen::MatrixXd(rows, kFeatureDim);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < kFeatureDim; ++c) d.features(r, c) = 2 * rng.uniform() - 1;
  }
  d.positive = static_cast<int>(rng.below(static_cast<std::uint64_t>(rows)));
  d.negative = (d.positive + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(rows - 1)))) % rows;
  d.temperature = 0.3 + rng.uniform();
  return d;
}

PolicyParams random_params(Rng& rng) {
  PolicyParams p;
  for (int c = 0; c < kFeatureDim; ++c) p.weights(c) = 2 * rng.uniform() - 1;
  return p;
}

}  // namespace

TEST_CASE("loss constants") {
  CHECK(std::abs(dpo_loss(-0.7, -0.7, 0.1) - std::log(2.0)) <= 1e-12);
  CHECK(std::abs(dpo_loss(0.0, -1.0, 0.1) - oracle::softplus(-0.1)) <= 1e-12);
  CHECK(dpo_loss(0.0, -1e6, 0.1) < 1e-12);
  CHECK_THROWS_AS(dpo_loss(std::nan(""), 0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(dpo_loss(-std::numeric_limits<double>::infinity(), 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("loss is decreasing in the margin and convex around zero") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double a = 4 * rng.uniform() - 2, b = 4 * rng.uniform() - 2, beta = 0.05 + rng.uniform();
    CHECK(dpo_loss(a + 0.1, b, beta) < dpo_loss(a, b, beta));
    CHECK(dpo_loss(a, b, beta) + dpo_loss(b, a, beta) >= 2 * std::log(2.0) - 1e-15);
  }
}

TEST_CASE("gradient matches central differences on 100 instances") {
  const double h = 1e-5;
  for (int inst = 0; inst < 100; ++inst) {
    Rng rng(44, static_cast<std::uint64_t>(inst));
    const PolicyParams p = random_params(rng);
    std::vector<DpoExample> ex;
    for (int i = 0, n = 1 + static_cast<int>(rng.below(5)); i < n; ++i) ex.push_back(random_example(rng));
    const double beta = 0.05 + 2 * rng.uniform();
    const Eigen::VectorXd g = dpo_gradient(p, ex, beta);
    Eigen::VectorXd n(kFeatureDim);
    for (int c = 0; c < kFeatureDim; ++c) {
      PolicyParams a = p, b = p;
      a.weights(c) += h;
      b.weights(c) -= h;
      n(c) = (dpo_mean_loss(a, ex, beta) - dpo_mean_loss(b, ex, beta)) / (2 * h);
    }
    CHECK(oracle::rel_error(g, n) < 1e-4);
  }
}

TEST_CASE("a small step on one pair does not shrink its margin") {
  for (int inst = 0; inst < 100; ++inst) {
    Rng rng(45, static_cast<std::uint64_t>(inst));
    const PolicyParams p = random_params(rng);
    const std::vector<DpoExample> ex{random_example(rng)};
    const auto margin = [&](const PolicyParams& q) {
      return log_prob(q, ex[0].features, ex[0].positive, ex[0].temperature) -
             log_prob(q, ex[0].features, ex[0].negative, ex[0].temperature);
    };
    PolicyParams q = p;
    q.weights -= 1e-4 * dpo_gradient(p, ex, 0.1);
    CHECK(margin(q) >= margin(p));
  }
}

TEST_CASE("training") {
  Rng rng(7);
  std::vector<DpoExample> ex;
  for (int i = 0; i < 20; ++i) ex.push_back(random_example(rng));
  const PolicyParams p = random_params(rng);
  DpoConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 6;
  SUBCASE("zero learning rate keeps the weights and a flat curve") {
    cfg.learning_rate = 0.0;
    const DpoResult r = dpo_train(p, ex, cfg, 1);
    CHECK(r.params.weights == p.weights);
    CHECK(r.params.version == p.version + 1);
    REQUIRE(r.epoch_losses.size() == 3);
    for (double l : r.epoch_losses) CHECK(l == doctest::Approx(dpo_mean_loss(p, ex, cfg.beta)));
  }
  SUBCASE("consistent pairs raise the preferred action's probability") {
    DpoExample d = random_example(rng);
    const std::vector<DpoExample> same(10, d);
    cfg.learning_rate = 1.0;
    const DpoResult r = dpo_train(p, same, cfg, 2);
    CHECK(log_prob(r.params, d.features, d.positive, d.temperature) >
          log_prob(p, d.features, d.positive, d.temperature));
  }
  SUBCASE("deterministic under a seed") {
    const DpoResult a = dpo_train(p, ex, cfg, 9);
    const DpoResult b = dpo_train(p, ex, cfg, 9);
    CHECK(a.params.weights == b.params.weights);
    CHECK(a.epoch_losses == b.epoch_losses);
  }
  CHECK_THROWS_AS(dpo_train(p, std::vector<DpoExample>{}, cfg, 1), std::invalid_argument);
}

TEST_CASE("zero beta gives a zero gradient") {
  Rng rng(8);
  const std::vector<DpoExample> ex{random_example(rng)};
  // beta = 0 is outside the training config but the loss is defined there.
  CHECK(dpo_gradient(random_params(rng), ex, 0.0).isZero());
}

TEST_CASE("malformed examples and configs are rejected") {
  Rng rng(9);
  DpoExample d = random_example(rng);
  d.negative = d.positive;
  CHECK_THROWS_AS(dpo_gradient(PolicyParams{}, std::vector<DpoExample>{d}, 0.1), std::invalid_argument);
  d = random_example(rng);
  d.features = Eigen::MatrixXd(0, kFeatureDim);
  CHECK_THROWS_AS(dpo_gradient(PolicyParams{}, std::vector<DpoExample>{d}, 0.1), std::invalid_argument);
  DpoConfig cfg;
  cfg.beta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("examples come from a shared origin with different actions") {
  Branch a, b;
  StepRecord s;
  s.candidates = {Action::search("e1"), Action::refuse()};
  s.features = Eigen::MatrixXd::Zero(2, kFeatureDim);
  s.chosen = 0;
  a.suffix.steps = {s};
  s.chosen = 1;
  b.suffix.steps = {s};
  PreferencePair pair{std::make_shared<const Branch>(a), std::make_shared<const Branch>(b)};
  const DpoExample d = dpo_example(pair, 0.5);
  CHECK(d.positive == 0);
  CHECK(d.negative == 1);
  CHECK(d.temperature == 0.5);
  PreferencePair same{pair.positive, pair.positive};
  CHECK_THROWS_AS(dpo_example(same, 1.0), std::invalid_argument);
  b.origin.step_index = 3;
  PreferencePair apart{pair.positive, std::make_shared<const Branch>(b)};
  CHECK_THROWS_AS(dpo_example(apart, 1.0), std::invalid_argument);
}
