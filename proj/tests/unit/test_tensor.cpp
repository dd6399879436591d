#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "hpnet/errors.hpp"
#include "hpnet/grad_check.hpp"
#include "hpnet/ops.hpp"

using namespace hpnet;
using testutil::random_tensor;

namespace {

Tensor probe(const Tensor& y) {
  return sum(hadamard(y, Tensor::from_data(y.shape(), testutil::probe_weights(y.numel()))));
}

}  // namespace

TEST_CASE("tensor construction and shape errors") {
  Tensor t = Tensor::full({2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK(t.dim(1) == 3);
  CHECK(shape_str(t.shape()) == "[2,3]");
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0}), DimensionError);
  CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
  CHECK_THROWS_AS(Tensor::zeros({2}).item(), std::exception);
}

TEST_CASE("gradients accumulate across uses and calls") {
  Tensor x = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
  backward(sum(add(hadamard(x, x), x)));  // d/dx (x^2 + x) = 2x + 1
  CHECK(x.grad()[0] == doctest::Approx(3.0));
  CHECK(x.grad()[1] == doctest::Approx(-3.0));
  backward(sum(x));
  CHECK(x.grad()[2] == doctest::Approx(3.0));
  x.zero_grad();
  CHECK((!x.has_grad() || x.grad()[0] == 0.0));
}

TEST_CASE("no-grad guard records nothing") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  Tensor y;
  {
    NoGradGuard g;
    CHECK_FALSE(grad_enabled());
    y = sum(hadamard(x, x));
  }
  CHECK(grad_enabled());
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("elementwise values against closed forms") {
  Tensor x = Tensor::from_data({4}, {-2.0, -0.5, 0.5, 3.0});
  const Tensor ts = sigmoid(x), tt = tanh(x), tr = relu(x), tsat = satlu(x, 1.0);
  auto s = ts.data(), th = tt.data(), r = tr.data(), sat = tsat.data();
  for (std::size_t i = 0; i < 4; ++i) {
    const double v = x.data()[i];
    CHECK(s[i] == doctest::Approx(1.0 / (1.0 + std::exp(-v))).epsilon(1e-14));
    CHECK(th[i] == doctest::Approx(std::tanh(v)).epsilon(1e-14));
    CHECK(r[i] == (v > 0 ? v : 0.0));
    CHECK(sat[i] == std::min(v, 1.0));
  }
  CHECK(mean_squared_error(x, Tensor::zeros({4})).item() ==
        doctest::Approx((4.0 + 0.25 + 0.25 + 9.0) / 4.0));
}

TEST_CASE("satlu and relu gradients at the kinks") {
  Tensor x = Tensor::from_data({3}, {0.0, 1.0, 2.0}, true);
  backward(sum(satlu(x, 1.0)));
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[2] == 0.0);
  Tensor y = Tensor::from_data({2}, {0.0, 1.0}, true);
  backward(sum(relu(y)));
  CHECK(y.grad()[0] == 0.0);
  CHECK(y.grad()[1] == 1.0);
}

TEST_CASE("structural ops") {
  Rng rng(1);
  Tensor a = random_tensor(rng, {2, 1, 2, 2}), b = random_tensor(rng, {1, 1, 2, 2});
  Tensor c = concat_channels({a, b});
  CHECK(c.shape() == Shape{3, 1, 2, 2});
  CHECK(testutil::max_abs_diff(slice_channels(c, 2, 1).data(), b.data()) == 0.0);
  CHECK_THROWS_AS(slice_channels(c, 2, 2), DimensionError);

  Tensor m = Tensor::from_data({1, 1, 2, 4}, {1, 5, 2, 2, 3, 0, 7, 2});
  const Tensor pooled = maxpool_spatial(m);
  auto mp = pooled.data();
  CHECK(mp[0] == 5.0);
  CHECK(mp[1] == 7.0);
  const Tensor upsampled = upsample_spatial(Tensor::from_data({1, 1, 1, 2}, {1, 2}));
  auto up = upsampled.data();
  CHECK(std::vector<double>(up.begin(), up.end()) == std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2});
  CHECK_THROWS_AS(maxpool_spatial(Tensor::zeros({1, 1, 3, 4})), DimensionError);
}

TEST_CASE("maxpool ties route the gradient to the lowest index") {
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 1, 1, 1}, true);
  backward(sum(maxpool_spatial(x)));
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] + x.grad()[2] + x.grad()[3] == 0.0);
}

TEST_CASE("finite-difference gradient check for every elementwise and structural op") {
  Rng rng(2);
  const Shape s{2, 2, 4, 4};
  const Tensor other = random_tensor(rng, s);
  auto nokink = [&](double kink) {
    Tensor t = random_tensor(rng, s, -1, 1, true);
    for (auto& v : t.mutable_data())
      if (std::fabs(v - kink) < 0.05) v += 0.1;
    return t;
  };
  auto check = [&](const char* name, auto f, Tensor x) {
    INFO(name);
    CHECK(grad_check(f, x) < 1e-4);
  };
  check("add", [&](const Tensor& x) { return probe(add(x, other)); }, random_tensor(rng, s, -1, 1, true));
  check("sub", [&](const Tensor& x) { return probe(sub(other, x)); }, random_tensor(rng, s, -1, 1, true));
  check("hadamard", [&](const Tensor& x) { return probe(hadamard(x, x)); }, random_tensor(rng, s, -1, 1, true));
  check("scale", [&](const Tensor& x) { return probe(scale(x, 0.3)); }, random_tensor(rng, s, -1, 1, true));
  check("relu", [&](const Tensor& x) { return probe(relu(x)); }, nokink(0.0));
  check("satlu", [&](const Tensor& x) { return probe(satlu(x, 0.25)); }, nokink(0.25));
  check("sigmoid", [&](const Tensor& x) { return probe(sigmoid(x)); }, random_tensor(rng, s, -3, 3, true));
  check("tanh", [&](const Tensor& x) { return probe(tanh(x)); }, random_tensor(rng, s, -3, 3, true));
  check("sum", [&](const Tensor& x) { return sum(hadamard(x, other)); }, random_tensor(rng, s, -1, 1, true));
  check("mean", [&](const Tensor& x) { return mean(hadamard(x, x)); }, random_tensor(rng, s, -1, 1, true));
  check("mse", [&](const Tensor& x) { return mean_squared_error(x, other); }, random_tensor(rng, s, -1, 1, true));
  check("concat", [&](const Tensor& x) { return probe(concat_channels({x, other, x})); }, random_tensor(rng, s, -1, 1, true));
  check("slice", [&](const Tensor& x) { return probe(slice_channels(x, 1, 1)); }, random_tensor(rng, s, -1, 1, true));
  check("maxpool", [&](const Tensor& x) { return probe(maxpool_spatial(x)); }, random_tensor(rng, s, -1, 1, true));
  check("upsample", [&](const Tensor& x) { return probe(upsample_spatial(x)); }, random_tensor(rng, s, -1, 1, true));
}
