#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ikh/error.hpp"
#include "ikh/net.hpp"

using namespace ikh;
using namespace ikh::net;

namespace {

using MatD = Matrix<double>;
using VecD = Vector<double>;

BasicMlp<double> single_layer(MatD w, VecD b, Activation act) {
  return BasicMlp<double>({Layer<double>{std::move(w), std::move(b), act}});
}

// Straight-line re-evaluation with explicit loops.
VecD reference_forward(const BasicMlp<double>& net, VecD x) {
  for (const auto& l : net.layers()) {
    VecD y(l.weight.rows());
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
      double acc = l.bias(i);
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) acc += l.weight(i, j) * x(j);
      switch (l.activation) {
        case Activation::ReLU: acc = acc > 0 ? acc : 0; break;
        case Activation::Tanh: acc = std::tanh(acc); break;
        case Activation::Identity: break;
      }
      y(i) = acc;
    }
    x = y;
  }
  return x;
}

double objective(const BasicMlp<double>& net, const VecD& x, const VecD& up) { return net.forward(x).dot(up); }

}  // namespace

TEST_CASE("forward: zero weights with identity output the bias") {
  VecD b(3);
  b << 1.5, -2.0, 0.25;
  const auto net = single_layer(MatD::Zero(3, 4), b, Activation::Identity);
  CHECK(net.forward(VecD(VecD::Random(4))) == b);
}

TEST_CASE("forward: ReLU gate closes on negative pre-activation") {
  const auto net = single_layer(MatD::Constant(1, 1, 2.0), VecD::Zero(1), Activation::ReLU);
  CHECK(net.forward(VecD(VecD::Constant(1, -3.0)))(0) == 0.0);
}

TEST_CASE("forward: matches loop re-evaluation on a 4-8-2 net") {
  Rng rng(3);
  auto net = BasicMlp<double>::xavier(std::vector<std::size_t>{4, 8, 2}, Activation::Tanh, Activation::Identity, rng);
  for (int k = 0; k < 20; ++k) {
    const VecD x = VecD::Random(4);
    CHECK((net.forward(x) - reference_forward(net, x)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("forward: batch columns equal single-sample passes") {
  Rng rng(5);
  auto net = testutil::random_net<float>(rng, 6, 3);
  const Matrix<float> batch = Matrix<float>::Random(6, 7);
  const auto out = net.forward(batch);
  for (Eigen::Index c = 0; c < 7; ++c) {
    const Vector<float> single = net.forward(Vector<float>(batch.col(c)));
    CHECK((out.col(c) - single).cwiseAbs().maxCoeff() < 1e-5f);
  }
}

TEST_CASE("forward: wrong input dim is DimMismatch") {
  Rng rng(1);
  auto net = testutil::random_net<float>(rng, 5, 2);
  CHECK_THROWS_AS(net.forward(Vector<float>(Vector<float>::Zero(4))), Error);
  try {
    net.forward(Vector<float>(Vector<float>::Zero(4)));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimMismatch);
  }
}

TEST_CASE("backward: linear 1-1 weight gradient is the input") {
  const auto net = single_layer(MatD::Constant(1, 1, 0.7), VecD::Zero(1), Activation::Identity);
  const auto g = backward(net, VecD(VecD::Constant(1, -2.5)), VecD(VecD::Constant(1, 1.0)));
  CHECK(g.weight[0](0, 0) == doctest::Approx(-2.5));
  CHECK(g.bias[0](0) == doctest::Approx(1.0));
  CHECK(g.input(0, 0) == doctest::Approx(0.7));
}

TEST_CASE("backward: dead ReLU unit passes no gradient") {
  MatD w(2, 1);
  w << 1.0, -1.0;
  const auto net = single_layer(w, VecD::Zero(2), Activation::ReLU);
  const auto g = backward(net, VecD(VecD::Constant(1, 2.0)), VecD(VecD::Ones(2)));
  CHECK(g.weight[0](1, 0) == 0.0);
  CHECK(g.bias[0](1) == 0.0);
  CHECK(g.weight[0](0, 0) == doctest::Approx(2.0));
}

TEST_CASE("backward: upstream dim mismatch is an error") {
  Rng rng(2);
  auto net = testutil::random_net<double>(rng, 3, 2);
  CHECK_THROWS_AS(backward(net, VecD(VecD::Zero(3)), VecD(VecD::Zero(3))), Error);
}

TEST_CASE("backward: central finite differences on random nets, every activation") {
  Rng rng(11);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    auto net = testutil::random_net<double>(rng);
    const VecD x = VecD::Random(static_cast<Eigen::Index>(net.input_dim()));
    const VecD up = VecD::Random(static_cast<Eigen::Index>(net.output_dim()));
    const auto g = backward(net, x, up);
    auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-7}); };
    for (std::size_t k = 0; k < net.layers().size(); ++k) {
      auto& w = net.layers()[k].weight;
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double keep = w(i);
        w(i) = keep + h;
        const double plus = objective(net, x, up);
        w(i) = keep - h;
        const double minus = objective(net, x, up);
        w(i) = keep;
        worst = std::max(worst, rel(g.weight[k](i), (plus - minus) / (2 * h)));
      }
      auto& b = net.layers()[k].bias;
      for (Eigen::Index i = 0; i < b.size(); ++i) {
        const double keep = b(i);
        b(i) = keep + h;
        const double plus = objective(net, x, up);
        b(i) = keep - h;
        const double minus = objective(net, x, up);
        b(i) = keep;
        worst = std::max(worst, rel(g.bias[k](i), (plus - minus) / (2 * h)));
      }
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      VecD xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      worst = std::max(worst, rel(g.input(i, 0), (objective(net, xp, up) - objective(net, xm, up)) / (2 * h)));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("backward: batched gradients are the sum of per-sample gradients") {
  Rng rng(8);
  auto net = testutil::random_net<double>(rng, 4, 3);
  const MatD xs = MatD::Random(4, 5);
  const MatD ups = MatD::Random(3, 5);
  ForwardCache<double> cache;
  net.forward(xs, &cache);
  const auto batch = net.backward(cache, ups);
  auto sum = net.zero_gradients();
  for (Eigen::Index c = 0; c < 5; ++c) sum += backward(net, VecD(xs.col(c)), VecD(ups.col(c)));
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    CHECK((batch.weight[k] - sum.weight[k]).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((batch.bias[k] - sum.bias[k]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("adam: zero gradient leaves parameters and counts the step") {
  Rng rng(4);
  auto net = testutil::random_net<float>(rng);
  const auto before = net;
  AdamState<float> opt(net, 1e-2);
  adam_step(net, net.zero_gradients(), opt);
  CHECK(net == before);
  CHECK(opt.step == 1);
}

TEST_CASE("adam: first step on a scalar moves by the learning rate") {
  auto net = single_layer(MatD::Zero(1, 1), VecD::Zero(1), Activation::Identity);
  AdamState<double> opt(net, 0.1);
  auto g = net.zero_gradients();
  g.weight[0](0, 0) = 1.0;
  adam_step(net, g, opt);
  // m_hat = 1, v_hat = 1  =>  delta = -lr / (1 + eps)
  CHECK(net.layers()[0].weight(0, 0) == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam: quadratic loss strictly decreases after step 10") {
  auto net = single_layer(MatD::Constant(1, 1, 3.0), VecD::Constant(1, -2.0), Activation::Identity);
  AdamState<double> opt(net, 1e-3);
  auto loss = [&] {
    const auto& l = net.layers()[0];
    return l.weight(0, 0) * l.weight(0, 0) + l.bias(0) * l.bias(0);
  };
  double prev = loss();
  for (int step = 1; step <= 1000; ++step) {
    auto g = net.zero_gradients();
    g.weight[0](0, 0) = 2.0 * net.layers()[0].weight(0, 0);
    g.bias[0](0) = 2.0 * net.layers()[0].bias(0);
    adam_step(net, g, opt);
    const double now = loss();
    if (step > 10) REQUIRE(now < prev);
    prev = now;
  }
}

TEST_CASE("soft_update: tau extremes and convexity") {
  Rng rng(6);
  auto online = testutil::random_net<float>(rng, 5, 3);
  auto target = online;
  for (auto& l : target.layers()) l.weight.setRandom();
  const auto original = target;

  auto t0 = original;
  soft_update(t0, online, 0.0);
  CHECK(t0 == original);

  auto t1 = original;
  soft_update(t1, online, 1.0);
  CHECK(t1 == online);

  auto tm = original;
  soft_update(tm, online, 0.9);
  for (std::size_t k = 0; k < tm.layers().size(); ++k) {
    const auto& a = original.layers()[k].weight;
    const auto& b = online.layers()[k].weight;
    const auto& m = tm.layers()[k].weight;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      CHECK(m(i) >= std::min(a(i), b(i)) - 1e-6f);
      CHECK(m(i) <= std::max(a(i), b(i)) + 1e-6f);
    }
  }
}

TEST_CASE("soft_update: incongruent nets are ShapeMismatch") {
  Rng rng(7);
  auto a = testutil::random_net<float>(rng, 3, 2);
  auto b = testutil::random_net<float>(rng, 4, 2);
  try {
    soft_update(a, b, 0.5);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("parameter_hash tracks any parameter change") {
  Rng rng(9);
  auto net = testutil::random_net<float>(rng);
  const auto h = parameter_hash(net);
  CHECK(parameter_hash(net) == h);
  net.layers().back().bias(0) += 1e-3f;
  CHECK(parameter_hash(net) != h);
}
