#include "doctest.h"
#include "helpers.hpp"
#include "hpnet/conv_kernels.hpp"
#include "hpnet/ops.hpp"

using namespace hpnet;
using namespace hpnet::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double rel_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]) / std::max(1.0, std::fabs(b[i])));
  return m;
}

std::vector<ConvGeometry> geometries() {
  std::vector<ConvGeometry> gs;
  for (std::size_t w : {1, 3, 7, 8, 9, 16, 17, 32, 33})
    for (std::size_t kw : {1, 3, 5}) {
      ConvGeometry g;
      g.cin = 3;
      g.cout = 9;  // one full block of 4 or 8 plus a remainder
      g.t = 3;
      g.h = 5;
      g.w = w;
      g.kt = 3;
      g.kh = kw == 5 ? 3 : kw;
      g.kw = kw;
      gs.push_back(g);
    }
  return gs;
}

}  // namespace

TEST_CASE("every kernel variant matches the scalar reference") {
  Rng rng(21);
  const auto& ref = scalar_kernels();
  for (const ConvKernelSet* ks : available_kernels()) {
    for (const auto& g : geometries()) {
      INFO(ks->name << " w=" << g.w << " kw=" << g.kw);
      const auto in = random_vec(rng, g.cin * g.out_plane());
      PaddedBuffer padded;
      pad_input(g, g.cin, in, padded);
      const auto weights = random_vec(rng, g.cout * g.cin * g.taps());
      const auto grad_out = random_vec(rng, g.cout * g.out_plane());

      std::vector<double> a(g.cout * g.out_plane(), 7.0), b(a.size(), -7.0);
      ref.forward(g, padded, weights, a, 0, g.cout);
      ks->forward(g, padded, weights, b, 0, g.cout);
      CHECK(rel_diff(b, a) < 1e-12);

      // A sub-range touches only its own channels.
      std::vector<double> c(a.size(), 3.0);
      ks->forward(g, padded, weights, c, 2, 7);
      for (std::size_t i = 0; i < c.size(); ++i) {
        const std::size_t co = i / g.out_plane();
        if (co >= 2 && co < 7) CHECK(std::fabs(c[i] - a[i]) < 1e-12 * std::max(1.0, std::fabs(a[i])));
        else CHECK(c[i] == 3.0);
      }

      std::vector<double> ga(weights.size(), 0.5), gb(weights.size(), 0.5);
      ref.weight_grad(g, padded, grad_out, ga, 0, g.cout);
      ks->weight_grad(g, padded, grad_out, gb, 0, g.cout);
      CHECK(rel_diff(gb, ga) < 1e-12);
    }
  }
}

TEST_CASE("sparse scatter and gather variants match the scalar reference") {
  Rng rng(22);
  const auto& ref = scalar_kernels();
  for (const ConvKernelSet* ks : available_kernels()) {
    ConvGeometry g;
    g.cin = 3;
    g.cout = 11;
    g.t = 4;
    g.h = 6;
    g.w = 10;
    g.kt = g.kh = g.kw = 3;
    std::vector<SparseSite> sites;
    for (std::size_t ci = 0; ci < g.cin; ++ci)
      for (std::size_t t = 0; t < g.t; ++t)
        for (std::size_t h = 0; h < g.h; ++h)
          for (std::size_t w = 0; w < g.w; ++w)
            if (rng.uniform() < 0.3) sites.push_back({ci, t, h, w, rng.uniform(-1.0, 1.0)});
    const auto wt = random_vec(rng, g.cin * g.taps() * g.cout);
    const auto go = random_vec(rng, g.out_plane() * g.cout);
    std::vector<double> a(g.out_plane() * g.cout, 0.0), b(a.size(), 0.0);
    ref.sparse_scatter(g, sites, wt, a);
    ks->sparse_scatter(g, sites, wt, b);
    CHECK(rel_diff(b, a) < 1e-12);
    std::vector<double> ga(wt.size(), 0.0), gb(wt.size(), 0.0);
    ref.sparse_weight_grad(g, sites, go, ga);
    ks->sparse_weight_grad(g, sites, go, gb);
    CHECK(rel_diff(gb, ga) < 1e-12);
  }
}

TEST_CASE("conv3d and its gradients agree across variants") {
  Rng rng(23);
  const Tensor x = testutil::random_tensor(rng, {5, 3, 9, 13});
  const ConvKernel3D k{testutil::random_tensor(rng, {6, 5, 3, 3, 3}), testutil::random_tensor(rng, {6})};
  auto run_with = [&](const ConvKernelSet* ks) {
    set_active_kernels(ks);
    Tensor xi = x.detach();
    xi.set_requires_grad(true);
    Tensor wi = k.weight.detach();
    wi.set_requires_grad(true);
    const Tensor y = conv3d(xi, {wi, k.bias});
    backward(sum(hadamard(y, y)));
    std::vector<double> all(y.data().begin(), y.data().end());
    all.insert(all.end(), xi.grad().begin(), xi.grad().end());
    all.insert(all.end(), wi.grad().begin(), wi.grad().end());
    set_active_kernels(nullptr);
    return all;
  };
  const auto ref = run_with(&scalar_kernels());
  for (const auto* ks : available_kernels()) {
    INFO(ks->name);
    CHECK(rel_diff(run_with(ks), ref) < 1e-12);
  }
}
