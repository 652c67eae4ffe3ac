#include <doctest.h>

#include <cmath>

#include "survgen/gan.hpp"
#include "survgen/nn.hpp"

using namespace survgen;
using ad::Var;

namespace {

double rel_close(double a, double b) {
  return std::abs(a - b) / (1.0 + std::max(std::abs(a), std::abs(b)));
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("squaring a scalar doubles it in the gradient") {
  const Var x = ad::scalar(3.0, true);
  const auto grads = ad::backward(ad::square(x));
  CHECK(grads.at(x).value()(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("euclidean norm gradient is the unit vector") {
  Eigen::MatrixXd w(1, 2);
  w << 3.0, 4.0;
  const Var v = ad::leaf(w, true);
  const Var norm = ad::sqrt(ad::sum_all(ad::square(v)));
  CHECK(norm.value()(0, 0) == doctest::Approx(5.0));
  const auto grads = ad::backward(norm);
  CHECK(grads.at(v).value()(0, 0) == doctest::Approx(0.6));
  CHECK(grads.at(v).value()(0, 1) == doctest::Approx(0.8));
}

TEST_CASE("double backward differentiates a gradient") {
  // f = x^3, g = (df/dx)^2 = 9x^4, dg/dx = 36x^3 = 288 at x = 2.
  const Var x = ad::scalar(2.0, true);
  const Var f = ad::mul(ad::mul(x, x), x);
  const Var df = ad::backward(f).at(x);
  CHECK(df.value()(0, 0) == doctest::Approx(12.0));
  const Var g = ad::square(df);
  const auto outer = ad::backward(g);
  CHECK(outer.at(x).value()(0, 0) == doctest::Approx(288.0));
}

TEST_CASE("structural ops agree with finite differences") {
  Rng rng(31);
  const Var x = ad::leaf(random_matrix(3, 4, rng), true);
  const Var c = ad::constant(random_matrix(3, 4, rng));

  auto loss_of = [&](const Var& in) {
    // exercise cumsum, slicing, padding, concat, softmax, tile in one graph
    const Var a = ad::cumsum_rows(in);
    const Var b = ad::rev_cumsum_rows(ad::mul(in, c));
    const Var s = ad::softmax_rows(ad::slice_cols(in, 1, 2));
    const Var joined = ad::hconcat(a, ad::hconcat(b, s));
    const Var padded = ad::pad_cols(ad::row_sum(joined), 0, 2);
    return ad::mean_all(ad::square(ad::add_scalar(padded, 0.25)));
  };

  const Var loss = loss_of(x);
  const auto grads = ad::backward(loss);
  const Eigen::MatrixXd gx = grads.at(x).value();

  const double h = 1e-6;
  Eigen::MatrixXd base = x.value();
  for (Eigen::Index i = 0; i < base.rows(); ++i) {
    for (Eigen::Index j = 0; j < base.cols(); ++j) {
      Eigen::MatrixXd up = base, dn = base;
      up(i, j) += h;
      dn(i, j) -= h;
      const double fd = (loss_of(ad::constant(up)).value()(0, 0) -
                         loss_of(ad::constant(dn)).value()(0, 0)) /
                        (2 * h);
      CHECK(rel_close(gx(i, j), fd) < 1e-5);
    }
  }
}

TEST_CASE("gradients accumulate across shared subexpressions") {
  const Var x = ad::scalar(1.5, true);
  const Var y = ad::add(ad::square(x), ad::scale(x, 3.0));  // x^2 + 3x
  const auto grads = ad::backward(y);
  CHECK(grads.at(x).value()(0, 0) == doctest::Approx(2.0 * 1.5 + 3.0));
}

TEST_CASE("relu and leaky relu kink behaviour") {
  Eigen::MatrixXd v(1, 3);
  v << -2.0, 0.5, 3.0;
  const Var x = ad::leaf(v, true);

  const auto g_relu = ad::backward(ad::sum_all(ad::relu(x))).at(x).value();
  CHECK(g_relu(0, 0) == 0.0);
  CHECK(g_relu(0, 1) == 1.0);
  CHECK(g_relu(0, 2) == 1.0);

  const auto g_leaky =
      ad::backward(ad::sum_all(ad::leaky_relu(x, 0.2))).at(x).value();
  CHECK(g_leaky(0, 0) == doctest::Approx(0.2));
  CHECK(g_leaky(0, 1) == 1.0);
}

TEST_CASE("one hundred random mlps match finite differences") {
  Rng rng(101);
  int nets_checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int in_dim = 1 + static_cast<int>(rng.below(4));
    const int layers = 1 + static_cast<int>(rng.below(2));
    nn::MlpConfig cfg;
    cfg.input_dim = in_dim;
    for (int l = 0; l < layers; ++l) {
      cfg.widths.push_back(1 + static_cast<int>(rng.below(8)));
      cfg.acts.push_back(nn::Activation::tanh);
    }
    cfg.widths.push_back(1 + static_cast<int>(rng.below(3)));
    cfg.acts.push_back(nn::Activation::identity);
    cfg.batch_norm = trial % 3 == 0;
    // every third batch-norm net runs in training mode so the gradient has to
    // flow through the batch statistics, not just the affine part
    const bool training = cfg.batch_norm && trial % 9 == 0;

    Rng init = rng.split(trial);
    const nn::Mlp net(cfg, init);
    const Eigen::MatrixXd input = random_matrix(4, in_dim, rng);
    const Eigen::MatrixXd target = random_matrix(4, cfg.widths.back(), rng);

    auto loss_value = [&] {
      const Var out = net.forward(ad::constant(input), training, nullptr);
      return ad::mean_all(ad::square(ad::sub(out, ad::constant(target))));
    };

    const auto grads = ad::backward(loss_value());
    for (Var p : net.parameters()) {  // copies share the underlying node
      const Eigen::MatrixXd analytic = grads.at(p).value();
      Eigen::MatrixXd v = p.value();
      for (Eigen::Index i = 0; i < v.rows(); ++i) {
        for (Eigen::Index j = 0; j < v.cols(); ++j) {
          const double keep = v(i, j);
          const double h = 1e-5;
          v(i, j) = keep + h;
          p.set_value(v);
          const double up = loss_value().value()(0, 0);
          v(i, j) = keep - h;
          p.set_value(v);
          const double dn = loss_value().value()(0, 0);
          v(i, j) = keep;
          p.set_value(v);
          REQUIRE(rel_close(analytic(i, j), (up - dn) / (2 * h)) < 1e-4);
        }
      }
    }
    ++nets_checked;
  }
  CHECK(nets_checked == 100);
}

TEST_CASE("adam follows the textbook update") {
  SUBCASE("zero gradient leaves parameters alone") {
    const Var p = ad::leaf(Eigen::MatrixXd::Constant(1, 1, 2.5), true);
    nn::Adam opt({p}, nn::AdamConfig{});
    const Var loss = ad::scalar(0.0, true);  // p not part of the graph
    opt.step(ad::backward(loss));
    CHECK(p.value()(0, 0) == 2.5);
  }
  SUBCASE("first step with unit gradient moves by about lr") {
    const Var p = ad::leaf(Eigen::MatrixXd::Constant(1, 1, 1.0), true);
    nn::Adam opt({p}, nn::AdamConfig{});
    const auto grads = ad::backward(p);  // d(p)/dp = 1
    opt.step(grads);
    // m_hat = 1, v_hat = 1 -> update = lr / (1 + eps)
    CHECK(p.value()(0, 0) == doctest::Approx(1.0 - 1e-3).epsilon(1e-7));
  }
  SUBCASE("decoupled weight decay shrinks parameters without gradient") {
    nn::AdamConfig cfg;
    cfg.weight_decay = 1e-3;
    const Var p = ad::leaf(Eigen::MatrixXd::Constant(1, 1, 4.0), true);
    nn::Adam opt({p}, cfg);
    opt.step(ad::backward(ad::scalar(0.0, true)));
    CHECK(p.value()(0, 0) == doctest::Approx(4.0 * (1.0 - 1e-3 * 1e-3)));
  }
}

TEST_CASE("non-finite forward values raise an error naming the op") {
  const Var big = ad::leaf(Eigen::MatrixXd::Constant(1, 1, 1e308), true);
  try {
    ad::exp(big);
    FAIL("expected finite_error");
  } catch (const ad::finite_error& e) {
    CHECK(e.op == "exp");
    CHECK(std::string(e.what()).find("exp") != std::string::npos);
  }
}

TEST_CASE("gradient penalty second order matches finite differences") {
  Rng rng(55);
  nn::MlpConfig dcfg;
  dcfg.input_dim = 5;  // 2 condition + 3 data columns
  dcfg.widths = {4, 1};
  dcfg.acts = {nn::Activation::tanh, nn::Activation::identity};
  Rng init = rng.split(9);
  const nn::Mlp disc(dcfg, init);

  const Var cond = ad::constant(random_matrix(4, 2, rng));
  const Eigen::MatrixXd x_val = random_matrix(4, 3, rng);

  auto penalty_value = [&] {
    const Var x = ad::leaf(x_val, true);
    return gradient_penalty(disc, cond, x);
  };

  const auto grads = ad::backward(penalty_value());
  for (Var p : disc.parameters()) {
    // the output bias shifts D by a constant, so grad_x D (and the penalty)
    // never sees it and no gradient entry exists for it
    if (!grads.contains(p)) continue;
    const Eigen::MatrixXd analytic = grads.at(p).value();
    Eigen::MatrixXd v = p.value();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      for (Eigen::Index j = 0; j < v.cols(); ++j) {
        const double keep = v(i, j);
        const double h = 1e-5;
        v(i, j) = keep + h;
        p.set_value(v);
        const double up = penalty_value().value()(0, 0);
        v(i, j) = keep - h;
        p.set_value(v);
        const double dn = penalty_value().value()(0, 0);
        v(i, j) = keep;
        p.set_value(v);
        REQUIRE(rel_close(analytic(i, j), (up - dn) / (2 * h)) < 1e-3);
      }
    }
  }
}

TEST_CASE("set_value is restricted to leaves") {
  const Var x = ad::scalar(1.0, true);
  const Var y = ad::square(x);
  CHECK_THROWS_AS(const_cast<Var&>(y).set_value(Eigen::MatrixXd::Ones(1, 1)),
                  std::logic_error);
}

TEST_CASE("detach blocks gradient flow") {
  const Var x = ad::scalar(2.0, true);
  const Var y = ad::square(ad::square(x).detach());
  const auto grads = ad::backward(y);
  CHECK_FALSE(grads.contains(x));
}

}  // TEST_SUITE
