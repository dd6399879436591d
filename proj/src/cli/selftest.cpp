#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "hpnet/cli.hpp"
#include "hpnet/conv_kernels.hpp"
#include "hpnet/grad_check.hpp"
#include "hpnet/metrics.hpp"

namespace hpnet::cli {

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0, bool grad = true) {
  std::vector<double> d(shape_numel(shape));
  for (auto& v : d) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(d), grad);
}

// Values kept away from kinks (relu at 0, satlu at p_max, maxpool ties).
Tensor away_from(Rng& rng, Shape shape, double kink) {
  Tensor t = random_tensor(rng, std::move(shape));
  for (auto& v : t.mutable_data())
    if (std::fabs(v - kink) < 0.05) v += 0.1;
  return t;
}

// Weighted sum, so every output element gets a distinct gradient.
Tensor probe(const Tensor& y) {
  std::vector<double> w(y.numel());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.7 * std::sin(1.7 * double(i) + 0.4);
  return sum(hadamard(y, Tensor::from_data(y.shape(), std::move(w))));
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << v;
  return ss.str();
}

CheckResult bound(std::string name, double value, double limit) {
  return {std::move(name), value < limit, "max " + fmt(value) + " < " + fmt(limit)};
}

}  // namespace

std::vector<CheckResult> run_selftest(std::ostream& log) {
  std::vector<CheckResult> out;
  Rng rng(20240601);
  const double tol = 1e-4;
  auto gc = [&](const char* name, const std::function<Tensor(const Tensor&)>& f, Tensor x) {
    out.push_back(bound(std::string("grad ") + name, grad_check(f, std::move(x)), tol));
  };

  const Shape s{2, 2, 3, 4};
  const Tensor other = random_tensor(rng, s, -1, 1, false);
  gc("add", [&](const Tensor& x) { return probe(add(x, other)); }, random_tensor(rng, s));
  gc("sub", [&](const Tensor& x) { return probe(sub(other, x)); }, random_tensor(rng, s));
  gc("hadamard", [&](const Tensor& x) { return probe(hadamard(x, other)); }, random_tensor(rng, s));
  gc("scale", [&](const Tensor& x) { return probe(scale(x, -1.5)); }, random_tensor(rng, s));
  gc("relu", [&](const Tensor& x) { return probe(relu(x)); }, away_from(rng, s, 0.0));
  gc("sigmoid", [&](const Tensor& x) { return probe(sigmoid(x)); }, random_tensor(rng, s));
  gc("tanh", [&](const Tensor& x) { return probe(tanh(x)); }, random_tensor(rng, s));
  gc("satlu", [&](const Tensor& x) { return probe(satlu(x, 0.5)); }, away_from(rng, s, 0.5));
  gc("mean", [&](const Tensor& x) { return mean(hadamard(x, x)); }, random_tensor(rng, s));
  gc("mse", [&](const Tensor& x) { return mean_squared_error(x, other); }, random_tensor(rng, s));
  gc("concat", [&](const Tensor& x) { return probe(concat_channels({other, x, x})); },
     random_tensor(rng, s));
  gc("slice", [&](const Tensor& x) { return probe(slice_channels(x, 1, 1)); },
     random_tensor(rng, s));
  gc("maxpool", [&](const Tensor& x) { return probe(maxpool_spatial(x)); },
     random_tensor(rng, {2, 2, 4, 4}));
  gc("upsample", [&](const Tensor& x) { return probe(upsample_spatial(x)); },
     random_tensor(rng, s));

  const Tensor cin = random_tensor(rng, {3, 3, 5, 6}, -1, 1, false);
  const Tensor w = random_tensor(rng, {2, 3, 3, 3, 3}, -0.5, 0.5, false);
  const Tensor b = random_tensor(rng, {2}, -0.5, 0.5, false);
  gc("conv3d input", [&](const Tensor& x) { return probe(conv3d(x, {w, b})); },
     random_tensor(rng, {3, 3, 5, 6}));
  gc("conv3d weight", [&](const Tensor& x) { return probe(conv3d(cin, {x, b})); },
     random_tensor(rng, {2, 3, 3, 3, 3}, -0.5, 0.5));
  gc("conv3d bias", [&](const Tensor& x) { return probe(conv3d(cin, {w, x})); },
     random_tensor(rng, {2}));
  gc("sparse_conv3d input", [&](const Tensor& x) { return probe(sparse_conv3d(x, {w, {}})); },
     random_tensor(rng, {3, 3, 5, 6}));
  gc("sparse_conv3d weight", [&](const Tensor& x) { return probe(sparse_conv3d(cin, {x, {}})); },
     random_tensor(rng, {2, 3, 3, 3, 3}, -0.5, 0.5));

  {
    // Full network: two levels, 8x8 frames, blocks of two frames.
    HPNetConfig cfg;
    cfg.levels = 2;
    cfg.channels = {2, 3};
    cfg.block_depth = cfg.block_stride = 2;
    cfg.frame_height = cfg.frame_width = 8;
    Rng init(7);
    const HPNetParams params = HPNetParams::initialize(cfg, init);
    std::vector<Tensor> blocks;
    for (int k = 0; k < 3; ++k) blocks.push_back(random_tensor(rng, {1, 2, 8, 8}, 0, 1, false));
    double worst = 0.0;
    for (const auto& nt : params.named()) {
      worst = std::max(worst, grad_check([&](const Tensor&) {
                         return forward_sequence(cfg, params, blocks).total_loss;
                       }, nt.tensor));
    }
    out.push_back(bound("grad hpnet sequence", worst, tol));
  }

  {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      Tensor x = random_tensor(rng, {2, 3, 4, 5}, -1, 1, false);
      for (auto& v : x.mutable_data())
        if (rng.uniform() < 0.6) v = 0.0;
      const ConvKernel3D k{random_tensor(rng, {3, 2, 3, 3, 3}, -1, 1, false), {}};
      const Tensor a = sparse_conv3d(x, k), d = conv3d(x, k);
      for (std::size_t i = 0; i < a.numel(); ++i)
        worst = std::max(worst, std::fabs(a.data()[i] - d.data()[i]));
    }
    out.push_back(bound("sparse equals dense", worst, 1e-12));
  }

  {
    const Tensor x = random_tensor(rng, {5, 3, 9, 13}, -1, 1, false);
    const ConvKernel3D k{random_tensor(rng, {6, 5, 3, 3, 3}, -1, 1, false),
                         random_tensor(rng, {6}, -1, 1, false)};
    auto run_with = [&](const kernels::ConvKernelSet* ks) {
      kernels::set_active_kernels(ks);
      Tensor xin = x.detach();
      xin.set_requires_grad(true);
      Tensor wt = k.weight.detach();
      wt.set_requires_grad(true);
      backward(probe(conv3d(xin, {wt, k.bias})));
      std::vector<double> all(xin.grad().begin(), xin.grad().end());
      all.insert(all.end(), wt.grad().begin(), wt.grad().end());
      const Tensor y = conv3d(x, k);
      all.insert(all.end(), y.data().begin(), y.data().end());
      kernels::set_active_kernels(nullptr);
      return all;
    };
    const auto ref = run_with(&kernels::scalar_kernels());
    for (const auto* ks : kernels::available_kernels()) {
      const auto got = run_with(ks);
      double worst = 0.0;
      for (std::size_t i = 0; i < ref.size(); ++i)
        worst = std::max(worst, std::fabs(got[i] - ref[i]) / std::max(1.0, std::fabs(ref[i])));
      out.push_back(bound("kernels " + std::string(ks->name) + " match scalar", worst, 1e-12));
    }
  }

  {
    Frame a(24, 24), c(24, 24);
    for (auto& p : a.pixels) p = rng.uniform();
    for (auto& p : c.pixels) p = rng.uniform();
    out.push_back(bound("ssim self-similarity", std::fabs(ssim(a, a) - 1.0), 1e-9));
    out.push_back(bound("ssim symmetry", std::fabs(ssim(a, c) - ssim(c, a)), 1e-12));
  }
  log << std::flush;
  return out;
}

}  // namespace hpnet::cli
