#include <limits>

#include "doctest.h"
#include "gradcheck.hpp"

using namespace neunet;

TEST_SUITE("autograd") {

TEST_CASE("sum gives an all-ones gradient") {
  std::mt19937_64 rng(31);
  ag::Tape<double> tape;
  auto x = tape.leaf(oracle::random_volume<double>({2, 3, 4, 2}, rng), true);
  tape.backward(ag::sum(x));
  auto g = tape.grad(x);
  CHECK(g.shape() == x.shape());
  CHECK((g.data() == 1.0).all());
}

TEST_CASE("every operator passes the finite-difference check") {
  for (auto& c : gradcheck::all_cases()) {
    auto out = gradcheck::run(c);
    INFO(out.name << " worst relative error " << out.check.worst_rel);
    CHECK(out.check.checked > 0);
    CHECK(out.check.failures == 0);
  }
}

TEST_CASE("shared sub-expressions accumulate like the split graph") {
  std::mt19937_64 rng(32);
  auto xv = oracle::random_volume<double>({3, 3, 3, 2}, rng);
  auto wv = oracle::random_volume<double>(kernel_shape(2, 2, ConvGeometry::same({3, 3, 3})), rng);
  auto bv = oracle::random_volume<double>({1, 1, 1, 2}, rng);
  const auto g = ConvGeometry::same({3, 3, 3});

  ag::Tape<double> shared;
  auto x = shared.leaf(xv, true);
  auto w = shared.leaf(wv, true);
  auto b = shared.leaf(bv, true);
  auto y = ag::conv3d(x, w, b, g);
  shared.backward(ag::sum(ag::mul(ag::tanh(y), ag::leaky_relu(ag::conv3d(y, w, b, g)))));

  // Same function with each use of x, w, b given its own leaf; the sum of
  // the split gradients must equal the shared one.
  ag::Tape<double> split;
  auto x1 = split.leaf(xv, true);
  auto w1 = split.leaf(wv, true), w2 = split.leaf(wv, true);
  auto b1 = split.leaf(bv, true), b2 = split.leaf(bv, true);
  auto y1 = ag::conv3d(x1, w1, b1, g);
  split.backward(ag::sum(ag::mul(ag::tanh(y1), ag::leaky_relu(ag::conv3d(y1, w2, b2, g)))));

  CHECK((shared.grad(x).data() - split.grad(x1).data()).abs().maxCoeff() < 1e-12);
  CHECK((shared.grad(w).data() - (split.grad(w1).data() + split.grad(w2).data())).abs().maxCoeff() < 1e-12);
  CHECK((shared.grad(b).data() - (split.grad(b1).data() + split.grad(b2).data())).abs().maxCoeff() < 1e-12);
}

TEST_CASE("unused leaves get zero gradients") {
  ag::Tape<double> tape;
  auto a = tape.leaf(Volume4<double>::constant({2, 2, 2, 1}, 1.0), true);
  auto unused = tape.leaf(Volume4<double>::constant({1, 2, 1, 3}, 1.0), true);
  tape.backward(ag::sum(a));
  auto g = tape.grad(unused);
  CHECK(g.shape() == Shape4{1, 2, 1, 3});
  CHECK(g.data().abs().maxCoeff() == 0.0);
}

TEST_CASE("non-scalar loss is rejected") {
  ag::Tape<double> tape;
  auto a = tape.leaf(Volume4<double>::constant({2, 1, 1, 1}, 1.0), true);
  CHECK_THROWS_AS(tape.backward(a), ArgumentError);
}

TEST_CASE("sgd examples") {
  std::vector<ag::Parameter<double>> params{{"p", Volume4<double>::constant({1, 1, 1, 2}, 2.0)}};
  ag::SgdState<double> state;

  SUBCASE("zero gradients and no decay leave parameters unchanged") {
    std::vector<Volume4<double>> grads{Volume4<double>(Shape4{1, 1, 1, 2})};
    ag::sgd_step(params, grads, {0.1, 0.9, 0.0}, state);
    CHECK((params[0].value.data() == 2.0).all());
  }
  SUBCASE("first step from zero velocity") {
    std::vector<Volume4<double>> grads{Volume4<double>::constant({1, 1, 1, 2}, 0.5)};
    const double g = 0.5 + 3e-5 * 2.0;
    SUBCASE("heavy ball") {
      ag::sgd_step(params, grads, {0.1, 0.99, 3e-5, false}, state);
      CHECK(params[0].value.data()[0] == doctest::Approx(2.0 - 0.1 * g).epsilon(1e-15));
    }
    SUBCASE("nesterov") {
      ag::sgd_step(params, grads, {0.1, 0.99, 3e-5, true}, state);
      CHECK(params[0].value.data()[0] == doctest::Approx(2.0 - 0.1 * (g + 0.99 * g)).epsilon(1e-15));
    }
  }
  SUBCASE("two steps on a scalar quadratic") {
    // f(p) = (p - 3)^2 with gradient 2 (p - 3), recurrences written out by hand.
    const double lr = 0.05, mu = 0.9, wd = 0.01;
    for (bool nesterov : {false, true}) {
      params[0].value.data().setConstant(2.0);
      state.velocity.clear();
      double p = 2.0, v = 0.0;
      for (int step = 0; step < 2; ++step) {
        std::vector<Volume4<double>> grads{
            Volume4<double>::constant({1, 1, 1, 2}, 2.0 * (params[0].value.data()[0] - 3.0))};
        ag::sgd_step(params, grads, {lr, mu, wd, nesterov}, state);
        const double g = 2.0 * (p - 3.0) + wd * p;
        v = mu * v + g;
        p = nesterov ? p - lr * (g + mu * v) : p - lr * v;
        CHECK(params[0].value.data()[0] == doctest::Approx(p).epsilon(1e-14));
      }
    }
  }
  SUBCASE("non-finite gradient aborts the step and names the parameter") {
    std::vector<ag::Parameter<double>> two{{"enc0.unit0.w", Volume4<double>::constant({1, 1, 1, 1}, 1.0)},
                                           {"head0.b", Volume4<double>::constant({1, 1, 1, 1}, 1.0)}};
    std::vector<Volume4<double>> grads{Volume4<double>::constant({1, 1, 1, 1}, 1.0),
                                       Volume4<double>::constant({1, 1, 1, 1}, std::numeric_limits<double>::quiet_NaN())};
    try {
      ag::sgd_step(two, grads, {0.1, 0.9, 0.0}, state);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("head0.b") != std::string::npos);
    }
    CHECK(two[0].value.data()[0] == 1.0);
    CHECK(two[1].value.data()[0] == 1.0);
  }
  SUBCASE("non-positive learning rate") {
    std::vector<Volume4<double>> grads{Volume4<double>(Shape4{1, 1, 1, 2})};
    CHECK_THROWS_AS(ag::sgd_step(params, grads, {0.0, 0.9, 0.0}, state), ArgumentError);
  }
}

TEST_CASE("tape float and double agree") {
  std::mt19937_64 rng(33);
  auto xd = oracle::random_volume<double>({3, 3, 3, 2}, rng);
  auto wd = oracle::random_volume<double>(kernel_shape(2, 2, ConvGeometry::same({3, 3, 3})), rng);
  auto bd = oracle::random_volume<double>({1, 1, 1, 2}, rng);
  ag::Tape<double> td;
  auto x = td.leaf(xd, true);
  td.backward(ag::sum(ag::tanh(ag::conv3d(x, td.leaf(wd), td.leaf(bd), ConvGeometry::same({3, 3, 3})))));
  ag::Tape<float> tf;
  auto xf = tf.leaf(xd.cast<float>(), true);
  tf.backward(ag::sum(ag::tanh(ag::conv3d(xf, tf.leaf(wd.cast<float>()), tf.leaf(bd.cast<float>()),
                                          ConvGeometry::same({3, 3, 3})))));
  CHECK((td.grad(x).data() - tf.grad(xf).data().cast<double>()).abs().maxCoeff() < 1e-4);
}

}  // TEST_SUITE
