#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "hpnet/errors.hpp"
#include "hpnet/training.hpp"

using namespace hpnet;
namespace fs = std::filesystem;

namespace {

HPNetConfig tiny_config() {
  HPNetConfig c;
  c.levels = 2;
  c.channels = {2, 3};
  c.block_depth = 2;
  c.block_stride = 2;
  c.frame_height = c.frame_width = 8;
  c.validate();
  return c;
}

std::vector<BlockSequence> tiny_data(std::size_t n, std::uint64_t seed) {
  SequenceSpec base;
  base.height = base.width = 8;
  base.n_frames = 6;
  base.min_size = base.max_size = 3;
  std::vector<BlockSequence> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(extract_blocks(generate_sequence(dataset_item_spec(base, seed, i, true)).frames, 2, 2));
  return out;
}

bool same_params(const HPNetParams& a, const HPNetParams& b) {
  const auto na = a.named(), nb = b.named();
  if (na.size() != nb.size()) return false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    const auto da = na[i].tensor.data(), db = nb[i].tensor.data();
    if (!std::equal(da.begin(), da.end(), db.begin(), db.end())) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("adam follows the bias-corrected recursion") {
  Tensor x = Tensor::from_data({2}, {1.0, -2.0}, true);
  std::vector<NamedTensor> params{{"x", x}};
  AdamConfig cfg;
  cfg.lr = 0.05;
  auto state = make_optimizer(params, cfg);
  double ref[2] = {1.0, -2.0}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 50; ++t) {
    auto g = x.mutable_grad();
    for (int k = 0; k < 2; ++k) g[k] = 2.0 * (x.data()[k] - 3.0);
    adam_step(params, state);
    for (int k = 0; k < 2; ++k) {
      const double gk = 2.0 * (ref[k] - 3.0);
      m[k] = 0.9 * m[k] + 0.1 * gk;
      v[k] = 0.999 * v[k] + 0.001 * gk * gk;
      const double mh = m[k] / (1.0 - std::pow(0.9, t)), vh = v[k] / (1.0 - std::pow(0.999, t));
      ref[k] -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(std::fabs(x.data()[0] - ref[0]) < 1e-12);
    CHECK(std::fabs(x.data()[1] - ref[1]) < 1e-12);
    for (double gk : x.grad()) CHECK(gk == 0.0);
  }
  CHECK(state.step == 50);
}

TEST_CASE("adam's first step has magnitude lr regardless of gradient scale") {
  for (double g0 : {1e-3, 1.0, 1e3}) {
    Tensor x = Tensor::from_data({1}, {0.0}, true);
    std::vector<NamedTensor> params{{"x", x}};
    auto state = make_optimizer(params);
    x.mutable_grad()[0] = g0;
    adam_step(params, state);
    CHECK(x.data()[0] == doctest::Approx(-1e-3).epsilon(1e-4));
  }
}

TEST_CASE("non-finite gradients are rejected before any update") {
  Tensor a = Tensor::from_data({1}, {1.0}, true), b = Tensor::from_data({1}, {2.0}, true);
  std::vector<NamedTensor> params{{"a", a}, {"b", b}};
  auto state = make_optimizer(params);
  a.mutable_grad()[0] = 1.0;
  b.mutable_grad()[0] = std::nan("");
  try {
    adam_step(params, state);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("b") != std::string::npos);
  }
  CHECK(a.data()[0] == 1.0);
  CHECK(state.step == 0);
}

TEST_CASE("gradient clipping scales to the joint norm") {
  Tensor a = Tensor::from_data({2}, {0, 0}, true), b = Tensor::from_data({1}, {0}, true);
  std::vector<NamedTensor> params{{"a", a}, {"b", b}};
  a.mutable_grad()[0] = 3.0;
  a.mutable_grad()[1] = 0.0;
  b.mutable_grad()[0] = 4.0;
  CHECK(clip_grad_norm(params, 10.0) == doctest::Approx(5.0));
  CHECK(a.grad()[0] == 3.0);
  CHECK(clip_grad_norm(params, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
  CHECK(b.grad()[0] == doctest::Approx(0.8));
  CHECK(clip_grad_norm(params, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("training reduces the loss on a tiny problem and is deterministic") {
  const auto data = tiny_data(6, 3);
  auto s1 = make_train_state(tiny_config(), 7, {.lr = 1e-2});
  auto s2 = make_train_state(tiny_config(), 7, {.lr = 1e-2});
  const double before = evaluate_loss(s1.config, s1.params, data);
  std::vector<std::size_t> seen;
  TrainOptions opts;
  opts.on_epoch = [&](const TrainRecord& r) { seen.push_back(r.epoch); };
  const auto log = train(s1, data, data, 4, opts);
  train(s2, data, data, 4);
  CHECK(seen == std::vector<std::size_t>{1, 2, 3, 4});
  CHECK(log.size() == 4);
  CHECK(std::isfinite(log.back().val_loss));
  CHECK(log.back().val_loss == doctest::Approx(evaluate_loss(s1.config, s1.params, data)));
  CHECK(evaluate_loss(s1.config, s1.params, data) < before);
  CHECK(same_params(s1.params, s2.params));
  CHECK(s1.rng == s2.rng);
  CHECK(s1.epochs_done == 4);
  CHECK(std::isnan(train(s1, data, {}, 1).back().val_loss));
}

TEST_CASE("checkpoints round trip and resuming matches a continuous run") {
  const auto data = tiny_data(4, 5);
  const fs::path path = fs::temp_directory_path() / "hpnet_unit_ckpt.hpnc";

  auto cont = make_train_state(tiny_config(), 11);
  train(cont, data, {}, 3);

  auto part = make_train_state(tiny_config(), 11);
  train(part, data, {}, 1);
  save_checkpoint(path, part);
  auto resumed = load_checkpoint(path);
  CHECK(resumed.config == part.config);
  CHECK(same_params(resumed.params, part.params));
  CHECK(resumed.optimizer.step == part.optimizer.step);
  CHECK(resumed.optimizer.m == part.optimizer.m);
  CHECK(resumed.optimizer.v == part.optimizer.v);
  CHECK(resumed.optimizer.config == part.optimizer.config);
  CHECK(resumed.rng == part.rng);
  CHECK(resumed.epochs_done == 1);
  train(resumed, data, {}, 2);
  CHECK(same_params(resumed.params, cont.params));
  CHECK(resumed.epochs_done == 3);

  std::ifstream is(path, std::ios::binary);
  std::vector<char> bytes{std::istreambuf_iterator<char>(is), {}};
  is.close();
  bytes.resize(bytes.size() / 2);
  {
    std::ofstream os(path, std::ios::binary);
    os.write(bytes.data(), std::streamsize(bytes.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  bytes[0] = 'Z';
  {
    std::ofstream os(path, std::ios::binary);
    os.write(bytes.data(), std::streamsize(bytes.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  fs::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("divergence raises NumericError") {
  const auto data = tiny_data(2, 9);
  auto s = make_train_state(tiny_config(), 1);
  TrainOptions opts;
  opts.divergence_limit = 1e-12;
  CHECK_THROWS_AS(train(s, data, {}, 1, opts), NumericError);
}

TEST_CASE("zero gradients leave parameters unchanged but count the step") {
  Tensor x = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
  std::vector<NamedTensor> params{{"x", x}};
  auto state = make_optimizer(params);
  x.mutable_grad();
  adam_step(params, state);
  CHECK(x.data()[1] == 2.0);
  CHECK(state.step == 1);
}

TEST_CASE("a constant gradient gives steps of size lr") {
  Tensor x = Tensor::from_data({2}, {0.0, 0.0}, true);
  std::vector<NamedTensor> params{{"x", x}};
  auto state = make_optimizer(params, {.lr = 0.01});
  double prev[2] = {0.0, 0.0};
  for (int t = 0; t < 200; ++t) {
    x.mutable_grad()[0] = 0.3;
    x.mutable_grad()[1] = -7.0;
    adam_step(params, state);
    CHECK(x.data()[0] - prev[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(x.data()[1] - prev[1] == doctest::Approx(0.01).epsilon(1e-6));
    prev[0] = x.data()[0];
    prev[1] = x.data()[1];
  }
}

TEST_CASE("adam minimises a scalar quadratic within 500 steps") {
  Tensor x = Tensor::from_data({1}, {0.0}, true);
  std::vector<NamedTensor> params{{"x", x}};
  auto state = make_optimizer(params, {.lr = 0.05});
  for (int t = 0; t < 500; ++t) {
    Tensor loss = mean_squared_error(x, Tensor::from_data({1}, {2.5}));
    backward(loss);
    adam_step(params, state);
  }
  CHECK(std::fabs(x.data()[0] - 2.5) < 1e-3);
}

TEST_CASE("zero epochs and zero learning rate change nothing") {
  const auto data = tiny_data(3, 12);
  auto s = make_train_state(tiny_config(), 2);
  const auto before = s.params.clone();
  CHECK(train(s, data, {}, 0).empty());
  CHECK(same_params(s.params, before));
  auto frozen = make_train_state(tiny_config(), 2, {.lr = 0.0});
  const auto log = train(frozen, data, data, 3);
  CHECK(log[0].val_loss == log[2].val_loss);
  CHECK(log[0].train_loss == doctest::Approx(log[2].train_loss).epsilon(1e-14));
  CHECK(same_params(frozen.params, before));
}
