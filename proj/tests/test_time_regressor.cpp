#include <doctest.h>

#include <cmath>
#include <vector>

#include "survgen/rng.hpp"
#include "survgen/time_regressor.hpp"

using namespace survgen;

TEST_SUITE("time_regressor") {

TEST_CASE("constant targets are fit exactly by the base score") {
  Eigen::MatrixXd x(6, 2);
  x.setRandom();
  const std::vector<double> y(6, 3.25);
  GbtConfig cfg;
  cfg.n_estimators = 5;
  const auto model = GbtRegressor::train(x, y, cfg);
  for (int i = 0; i < 6; ++i)
    CHECK(model.predict(Eigen::RowVectorXd(x.row(i))) ==
          doctest::Approx(3.25));
  CHECK(model.training_loss().back() == doctest::Approx(0.0));
}

TEST_CASE("a single binary feature step is learned quickly") {
  Eigen::MatrixXd x(100, 1);
  std::vector<double> y(100);
  for (int i = 0; i < 100; ++i) {
    x(i, 0) = i % 2;
    y[i] = i % 2 ? 10.0 : 2.0;
  }
  GbtConfig cfg;
  cfg.n_estimators = 50;
  cfg.max_depth = 1;
  const auto model = GbtRegressor::train(x, y, cfg);

  Eigen::RowVectorXd lo(1), hi(1);
  lo << 0.0;
  hi << 1.0;
  CHECK(model.predict(lo) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(model.predict(hi) == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("smooth univariate regression reaches a small rmse") {
  Rng rng(11);
  const int n = 600;
  Eigen::MatrixXd x(n, 1);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(-1.5, 1.5);
    y[i] = std::exp(x(i, 0));
  }
  const auto model = GbtRegressor::train(x, y, GbtConfig{});

  double sse = 0.0;
  for (int i = 0; i < n; ++i) {
    const double p = model.predict(Eigen::RowVectorXd(x.row(i)));
    sse += (p - y[i]) * (p - y[i]);
  }
  CHECK(std::sqrt(sse / n) < 0.2);
}

TEST_CASE("training loss never increases across boosting rounds") {
  Rng rng(21);
  Eigen::MatrixXd x(200, 3);
  std::vector<double> y(200);
  for (int i = 0; i < 200; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    y[i] = x(i, 0) - 2.0 * x(i, 1) + 0.5 * x(i, 2) * x(i, 2) + 0.1 * rng.normal();
  }
  GbtConfig cfg;
  cfg.n_estimators = 60;
  const auto model = GbtRegressor::train(x, y, cfg);
  const auto& loss = model.training_loss();
  REQUIRE(loss.size() == 60);
  for (std::size_t i = 1; i < loss.size(); ++i)
    CHECK(loss[i] <= loss[i - 1] + 1e-12);
}

TEST_CASE("boosting is deterministic and survives a json round trip") {
  Rng rng(33);
  Eigen::MatrixXd x(150, 2);
  std::vector<double> y(150);
  for (int i = 0; i < 150; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.uniform();
    y[i] = std::sin(x(i, 0)) + x(i, 1);
  }
  GbtConfig cfg;
  cfg.n_estimators = 25;
  const auto a = GbtRegressor::train(x, y, cfg);
  const auto b = GbtRegressor::train(x, y, cfg);
  const auto c = GbtRegressor::from_json(a.to_json());
  const Eigen::VectorXd pa = a.predict(x);
  CHECK(pa == b.predict(x));
  CHECK(pa == c.predict(x));
}

TEST_CASE("time head trains on curves and reproduces grouped times") {
  // two populations separated by the event flag with distinct typical times;
  // the regressor sees [covariates | curve | E] and must use E
  const int n = 400;
  Rng rng(44);
  Eigen::MatrixXd enc(n, 2);
  Eigen::MatrixXd curves(n, 5);
  std::vector<double> t(n);
  std::vector<int> e(n);
  for (int i = 0; i < n; ++i) {
    enc(i, 0) = rng.normal();
    enc(i, 1) = rng.normal();
    e[i] = i % 2;
    for (int j = 0; j < 5; ++j) curves(i, j) = 1.0 - 0.2 * j;  // identical
    t[i] = e[i] ? 4.0 : 1.0;
  }
  GbtConfig cfg;
  cfg.n_estimators = 60;
  cfg.max_depth = 2;
  const auto model = TimeRegressor::train(enc, curves, t, e, cfg);

  const Eigen::RowVectorXd x0 = enc.row(0);
  const Eigen::RowVectorXd cv = curves.row(0);
  CHECK(model.predict_time(x0, cv, 1) == doctest::Approx(4.0).epsilon(0.05));
  CHECK(model.predict_time(x0, cv, 0) == doctest::Approx(1.0).epsilon(0.05));

  SUBCASE("round trip preserves predictions") {
    const auto back = TimeRegressor::from_json(model.to_json());
    CHECK(back.predict_time(x0, cv, 1) == model.predict_time(x0, cv, 1));
  }
}

TEST_CASE("predicted times are never negative even for zero targets") {
  const int n = 50;
  Rng rng(55);
  Eigen::MatrixXd enc(n, 1);
  Eigen::MatrixXd curves(n, 3);
  std::vector<double> t(n, 0.0);  // fitting log(eps) everywhere
  std::vector<int> e(n, 1);
  for (int i = 0; i < n; ++i) {
    enc(i, 0) = rng.normal();
    curves.row(i) << 0.9, 0.5, 0.1;
  }
  const auto model = TimeRegressor::train(enc, curves, t, e, GbtConfig{});
  for (int i = 0; i < 5; ++i) {
    const double pred = model.predict_time(Eigen::RowVectorXd(enc.row(i)),
                                           Eigen::RowVectorXd(curves.row(i)), 1);
    CHECK(pred >= 0.0);
    CHECK(pred == doctest::Approx(0.0).epsilon(1e-3));
  }
}

TEST_CASE("log-time training recovers a multiplicative covariate effect") {
  const int n = 500;
  Rng rng(66);
  Eigen::MatrixXd enc(n, 1);
  Eigen::MatrixXd curves = Eigen::MatrixXd::Ones(n, 4);
  std::vector<double> t(n);
  std::vector<int> e(n, 1);
  for (int i = 0; i < n; ++i) {
    enc(i, 0) = rng.uniform(-1.0, 1.0);
    t[i] = std::exp(enc(i, 0));
  }
  const auto model = TimeRegressor::train(enc, curves, t, e, GbtConfig{});

  double sse = 0.0;
  for (int i = 0; i < n; ++i) {
    const double pred = model.predict_time(Eigen::RowVectorXd(enc.row(i)),
                                           Eigen::RowVectorXd(curves.row(i)), 1);
    const double diff = std::log(pred + 1e-6) - std::log(t[i] + 1e-6);
    sse += diff * diff;
  }
  CHECK(std::sqrt(sse / n) < 0.2);
}

}  // TEST_SUITE
